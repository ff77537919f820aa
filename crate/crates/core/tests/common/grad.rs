//! Finite-difference gradient cases shared by the gradient and acceptance
//! suites. Each case builds a random model from a seed, runs the analytic
//! backward pass and compares it against central differences.

use gcan_fusion::fusion::{FusionInput, FusionModel};
use gcan_fusion::graph::DocAdjacency;
use gcan_fusion::nn::gradcheck::{check, GradReport};
use gcan_fusion::nn::{
    AttentionConfig, ClassifierHead, GcanLayer, ImageEncoder, LayerNorm, Linear, ModelOutput,
    MultiHeadAttention, ParametersExt, TextEncoder, TextModel,
};
use gcan_fusion::preprocess::{ImageTensor, LabelVector, TokenIdSequence, PAD};
use gcan_fusion::training::{class_weights, Objective, Setup};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::random_symmetric;

pub const EPS: f64 = 1e-6;

fn rand2(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.gen_range(-1.0..1.0))
}

fn rand1(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0))
}

fn weighted_sum(y: &Array2<f64>, r: &Array2<f64>) -> f64 {
    (y * r).sum()
}

/// Spread the output biases so class probabilities never tie. A tie makes
/// the argmax in the teacher-forcing term flip under a tiny perturbation.
fn untie(head: &mut ClassifierHead, rng: &mut ChaCha8Rng) {
    let n = head.output.bias.len();
    head.output.bias = Array1::from_shape_fn(n, |c| c as f64 * 0.4 - 0.6 + rng.gen_range(-0.05..0.05));
}

fn small() -> AttentionConfig {
    AttentionConfig::new(8, 2, 2).unwrap()
}

pub fn linear(seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layer = Linear::init(&mut rng, 5, 4);
    let x = rand2(&mut rng, 3, 5);
    let r = rand2(&mut rng, 3, 4);
    let mut grad = layer.zeros_like();
    layer.backward(&x, &r, &mut grad);
    check(&layer, &grad, |m| weighted_sum(&m.forward(&x).unwrap(), &r), EPS)
}

pub fn layer_norm(seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut norm = LayerNorm::new(6);
    norm.gamma = rand1(&mut rng, 6);
    norm.beta = rand1(&mut rng, 6);
    let x = rand2(&mut rng, 4, 6);
    let r = rand2(&mut rng, 4, 6);
    let (_, cache) = norm.forward(&x);
    let mut grad = norm.zeros_like();
    norm.backward(&cache, &r, &mut grad);
    check(&norm, &grad, |m| weighted_sum(&m.forward(&x).0, &r), EPS)
}

pub fn attention(seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = small();
    let mha = MultiHeadAttention::init(&mut rng, &cfg);
    let x = rand2(&mut rng, 5, cfg.d_att);
    let rs: Vec<Array2<f64>> = (0..cfg.heads).map(|_| rand2(&mut rng, 5, cfg.d_k())).collect();
    let (_, cache) = mha.forward(&x).unwrap();
    let mut grad = mha.zeros_like();
    mha.backward(&cache, &rs, &mut grad);
    check(
        &mha,
        &grad,
        |m| {
            let (heads, _) = m.forward(&x).unwrap();
            heads.iter().zip(&rs).map(|(h, r)| weighted_sum(h, r)).sum()
        },
        EPS,
    )
}

pub fn gcan_layer(seed: u64, is_last: bool) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = small();
    let mut layer = GcanLayer::init(&mut rng, &cfg, is_last);
    layer.norm.gamma = rand1(&mut rng, cfg.d_att);
    let x = rand2(&mut rng, 5, cfg.d_att);
    let adj = random_symmetric(&mut rng, 5);
    let r = rand2(&mut rng, 5, cfg.d_att);
    let (_, cache) = layer.forward(&x, Some(&adj)).unwrap();
    let mut grad = layer.zeros_like();
    layer.backward(&cache, Some(&adj), &r, &mut grad);
    check(&layer, &grad, |m| weighted_sum(&m.forward(&x, Some(&adj)).unwrap().0, &r), EPS)
}

pub fn classifier_head(seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let head = ClassifierHead::init(&mut rng, 8, 4, 0.5);
    let f = rand1(&mut rng, 8);
    let r = rand1(&mut rng, 4);
    let mask_seed = seed ^ 0xd0;
    let (_, cache) = head.forward(&f, Some(&mut ChaCha8Rng::seed_from_u64(mask_seed))).unwrap();
    let mut grad = head.zeros_like();
    head.backward(&cache, &r, &mut grad);
    check(
        &head,
        &grad,
        |m| {
            let (p, _) = m.forward(&f, Some(&mut ChaCha8Rng::seed_from_u64(mask_seed))).unwrap();
            p.dot(&r)
        },
        EPS,
    )
}

fn random_outputs(rng: &mut ChaCha8Rng, members: usize, classes: usize, width: usize) -> FusionInput {
    let outputs = (0..members)
        .map(|_| ModelOutput {
            p: Array1::from_shape_fn(classes, |_| rng.gen_range(0.05..0.95)),
            f: rand1(rng, width),
        })
        .collect();
    FusionInput::new(outputs).unwrap()
}

pub fn fusion_heads(seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = random_outputs(&mut rng, 3, 4, 5);
    let model = FusionModel::init(&mut rng, input.concat_len(), 3, 4, 0.5);
    let r = rand1(&mut rng, 4);
    let mask_seed = seed ^ 0xf0;
    let (_, cache) = model.forward(&input, Some(&mut ChaCha8Rng::seed_from_u64(mask_seed))).unwrap();
    let mut grad = model.zeros_like();
    model.backward(&cache, &r, &mut grad);
    check(
        &model,
        &grad,
        |m| {
            let (o, _) = m.forward(&input, Some(&mut ChaCha8Rng::seed_from_u64(mask_seed))).unwrap();
            o.p.dot(&r)
        },
        EPS,
    )
}

fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<LabelVector> {
    (0..n)
        .map(|i| {
            let mut sub = [false; 4];
            sub[i % 4] = rng.gen_bool(0.7);
            sub[(i + 1) % 4] |= rng.gen_bool(0.3);
            LabelVector::from_sub_labels(sub)
        })
        .collect()
}

fn objective() -> Objective {
    Objective {
        setup: Setup::B,
        weights: class_weights(&[3, 5, 2, 4], 10).unwrap(),
        mix: (0.7, 0.3),
    }
}

/// Batch loss of a Setup B objective through any model, with seeded
/// dropout masks per sample.
fn batch_loss<F>(n: usize, labels: &[LabelVector], forward: F) -> (f64, Vec<Array1<f64>>)
where
    F: Fn(usize, &mut ChaCha8Rng) -> Array1<f64>,
{
    let probs: Vec<Array1<f64>> = (0..n)
        .map(|i| forward(i, &mut ChaCha8Rng::seed_from_u64(1000 + i as u64)))
        .collect();
    objective().evaluate(&probs, labels)
}

fn random_doc(rng: &mut ChaCha8Rng, vocab: usize, len: usize) -> (TokenIdSequence, DocAdjacency) {
    let true_length = rng.gen_range(2..=len);
    let ids: Vec<u32> = (0..len)
        .map(|p| match p {
            0 => 1,
            p if p < true_length => rng.gen_range(2..vocab as u32),
            _ => PAD,
        })
        .collect();
    let matrix = random_symmetric(rng, len) * 0.5;
    (
        TokenIdSequence { ids, true_length },
        DocAdjacency { matrix, doc: gcan_fusion::graph::DocNode::Unseen },
    )
}

/// GCAN text encoder trained through the full Setup B objective.
pub fn text_end_to_end(seed: u64, model: TextModel) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = small();
    let mut enc = TextEncoder::init(&mut rng, model, 12, &cfg, 4, 0.5);
    untie(&mut enc.head, &mut rng);
    // Sum pooling can push a sigmoid to within 1e-9 of one, where
    // log(1 - p) keeps too few digits for a finite-difference probe.
    enc.head.hidden.weight *= 0.3;
    let docs: Vec<_> = (0..3).map(|_| random_doc(&mut rng, 12, 6)).collect();
    let labels = random_labels(&mut rng, docs.len());
    let forward = |m: &TextEncoder, i: usize, r: &mut ChaCha8Rng| m.forward(&docs[i].0, Some(&docs[i].1), Some(r)).unwrap();
    let (_, dps) = batch_loss(docs.len(), &labels, |i, r| forward(&enc, i, r).0.p);
    let mut grad = enc.zeros_like();
    for (i, dp) in dps.iter().enumerate() {
        let (_, cache) = forward(&enc, i, &mut ChaCha8Rng::seed_from_u64(1000 + i as u64));
        enc.backward(&cache, dp, None, &mut grad);
    }
    check(&enc, &grad, |m| batch_loss(docs.len(), &labels, |i, r| forward(m, i, r).0.p).0, EPS)
}

pub fn image_end_to_end(seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = small();
    let mut enc = ImageEncoder::init(&mut rng, 2, &cfg, 4, 0.5);
    untie(&mut enc.head, &mut rng);
    let images: Vec<ImageTensor> = (0..3)
        .map(|_| ImageTensor {
            side: 4,
            values: (0..48).map(|_| rng.gen_range(-1.5..1.5)).collect(),
        })
        .collect();
    let labels = random_labels(&mut rng, images.len());
    let forward = |m: &ImageEncoder, i: usize, r: &mut ChaCha8Rng| m.forward(&images[i], Some(r)).unwrap();
    let (_, dps) = batch_loss(images.len(), &labels, |i, r| forward(&enc, i, r).0.p);
    let mut grad = enc.zeros_like();
    for (i, dp) in dps.iter().enumerate() {
        let (_, cache) = forward(&enc, i, &mut ChaCha8Rng::seed_from_u64(1000 + i as u64));
        enc.backward(&cache, dp, None, &mut grad);
    }
    check(&enc, &grad, |m| batch_loss(images.len(), &labels, |i, r| forward(m, i, r).0.p).0, EPS)
}

pub fn fusion_end_to_end(seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<FusionInput> = (0..4).map(|_| random_outputs(&mut rng, 2, 4, 6)).collect();
    let mut model = FusionModel::init(&mut rng, inputs[0].concat_len(), 2, 4, 0.5);
    untie(&mut model.classifier, &mut rng);
    let labels = random_labels(&mut rng, inputs.len());
    let forward = |m: &FusionModel, i: usize, r: &mut ChaCha8Rng| m.forward(&inputs[i], Some(r)).unwrap();
    let (_, dps) = batch_loss(inputs.len(), &labels, |i, r| forward(&model, i, r).0.p);
    let mut grad = model.zeros_like();
    for (i, dp) in dps.iter().enumerate() {
        let (_, cache) = forward(&model, i, &mut ChaCha8Rng::seed_from_u64(1000 + i as u64));
        model.backward(&cache, dp, &mut grad);
    }
    check(&model, &grad, |m| batch_loss(inputs.len(), &labels, |i, r| forward(m, i, r).0.p).0, EPS)
}

/// Per-layer cases with their names.
pub fn layer_cases(seed: u64) -> Vec<(&'static str, GradReport)> {
    vec![
        ("linear", linear(seed)),
        ("layer_norm", layer_norm(seed)),
        ("attention", attention(seed)),
        ("gcan_layer_inner", gcan_layer(seed, false)),
        ("gcan_layer_last", gcan_layer(seed, true)),
        ("classifier_head", classifier_head(seed)),
        ("fusion_heads", fusion_heads(seed)),
    ]
}

pub fn end_to_end_cases(seed: u64) -> Vec<(&'static str, GradReport)> {
    vec![
        ("gcan_encoder", text_end_to_end(seed, TextModel::Gcan)),
        ("bertc_encoder", text_end_to_end(seed, TextModel::Bertc)),
        ("image_encoder", image_end_to_end(seed)),
        ("fusion_model", fusion_end_to_end(seed)),
    ]
}
