//! Feature preparation, k-fold training of member and fusion models, and
//! scoring. The command line tool and the test suites both go through
//! these functions.

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::RunConfig;
use super::models::ModelKind;
use crate::ensemble::{
    binary_f1_scores, derive_task_a_label, derive_task_a_prob, f1_scores, soft_vote, threshold,
    EnsemblePrediction, F1Scores, FoldRun,
};
use crate::error::{Error, Result};
use crate::fusion::{FusionInput, FusionModel};
use crate::graph::{build_adjacency, count_windows, extract_document_adjacency, CorpusGraph};
use crate::nn::{Checkpoint, ImageEncoder, ModelOutput, ParametersExt, TextEncoder, TextModel};
use crate::preprocess::{
    encode_document, normalize_image, tokenize, ImageTensor, LabelVector, RawSample, Vocabulary,
};
use crate::training::{
    predict, train_fold, EpochRecord, FoldData, Setup, TextInput, TrainConfig, Trainable,
};

/// Model-ready inputs for a train and a test split.
pub struct Prepared {
    pub vocab: Vocabulary,
    pub graph: CorpusGraph,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub train_labels: Vec<LabelVector>,
    pub test_labels: Vec<LabelVector>,
    pub text_train: Vec<TextInput>,
    pub text_test: Vec<TextInput>,
    pub image_train: Vec<ImageTensor>,
    pub image_test: Vec<ImageTensor>,
}

fn token_ids(samples: &[RawSample], vocab: Option<&Vocabulary>) -> (Vec<Vec<String>>, Option<Vec<Vec<u32>>>) {
    let tokens: Vec<Vec<String>> = samples.iter().map(|s| tokenize(&s.merged_text())).collect();
    let ids = vocab.map(|v| tokens.iter().map(|t| v.ids(t)).collect());
    (tokens, ids)
}

/// Vocabulary and corpus graph over the training texts.
pub fn build_graph(train: &[RawSample], window_len: usize, min_freq: usize) -> Result<(Vocabulary, CorpusGraph, Vec<Vec<String>>)> {
    let (tokens, _) = token_ids(train, None);
    let vocab = Vocabulary::build(&tokens, min_freq, None)?;
    let corpus: Vec<Vec<u32>> = tokens.iter().map(|t| vocab.ids(t)).collect();
    let stats = count_windows(&corpus, window_len)?;
    let graph = build_adjacency(&corpus, &stats, &vocab)?;
    Ok((vocab, graph, tokens))
}

pub fn prepare(train: &[RawSample], test: &[RawSample], cfg: &RunConfig) -> Result<Prepared> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::Empty("train and test splits must both be non-empty"));
    }
    let (vocab, graph, train_tokens) = build_graph(train, cfg.window_len, cfg.min_freq)?;
    let text_train = train_tokens
        .par_iter()
        .enumerate()
        .map(|(k, t)| {
            let seq = encode_document(t, &vocab, cfg.seq_len)?;
            let adjacency = Some(extract_document_adjacency(&graph, k, &seq)?);
            Ok(TextInput { seq, adjacency })
        })
        .collect::<Result<Vec<_>>>()?;
    let (test_tokens, _) = token_ids(test, None);
    let text_test = test_tokens
        .par_iter()
        .map(|t| {
            let seq = encode_document(t, &vocab, cfg.seq_len)?;
            let unseen = graph.unseen_doc(&vocab.ids(t))?;
            let adjacency = Some(graph.extract_unseen(&unseen, &seq));
            Ok(TextInput { seq, adjacency })
        })
        .collect::<Result<Vec<_>>>()?;
    let images = |s: &[RawSample]| -> Result<Vec<ImageTensor>> {
        s.par_iter()
            .map(|x| normalize_image(&x.image, cfg.image_resize, cfg.image_crop))
            .collect()
    };
    Ok(Prepared {
        image_train: images(train)?,
        image_test: images(test)?,
        train_ids: train.iter().map(|s| s.id.clone()).collect(),
        test_ids: test.iter().map(|s| s.id.clone()).collect(),
        train_labels: train.iter().map(|s| s.labels).collect(),
        test_labels: test.iter().map(|s| s.labels).collect(),
        vocab,
        graph,
        text_train,
        text_test,
    })
}

/// Output of one trained fold.
#[derive(Debug, Clone)]
pub struct FoldResult {
    pub run: FoldRun,
    pub records: Vec<EpochRecord>,
    pub checkpoint: Checkpoint,
}

fn model_seed(kind: ModelKind, base: u64, fold: usize) -> u64 {
    let salt = ModelKind::ALL.iter().position(|&m| m == kind).unwrap_or(0) as u64;
    base.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(salt << 32)
        .wrapping_add(fold as u64)
}

/// A uni-modal member with freshly initialized parameters.
#[derive(Debug, Clone)]
pub enum Member {
    Text(TextEncoder),
    Image(ImageEncoder),
}

pub fn init_member(kind: ModelKind, prepared: &Prepared, cfg: &RunConfig, seed: u64) -> Result<Member> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = cfg.train.setup.classes();
    let dropout = cfg.train.dropout;
    Ok(match kind {
        ModelKind::Bertc | ModelKind::Gcan => {
            let model = if kind == ModelKind::Bertc { TextModel::Bertc } else { TextModel::Gcan };
            Member::Text(TextEncoder::init(&mut rng, model, prepared.vocab.len(), &cfg.attention, classes, dropout))
        }
        ModelKind::Vit => Member::Image(ImageEncoder::init(&mut rng, cfg.patch, &cfg.attention, classes, dropout)),
        other => return Err(Error::invalid(format!("{other} is a fusion model, not a member"))),
    })
}

fn fold_data<'a, I>(fold: usize, folds: &[Vec<usize>], inputs: &'a [I], labels: &[LabelVector]) -> FoldData<'a, I> {
    let mut in_val = vec![false; inputs.len()];
    for &i in &folds[fold] {
        in_val[i] = true;
    }
    let pick = |want: bool| {
        (0..inputs.len())
            .filter(|&i| in_val[i] == want)
            .map(|i| (&inputs[i], labels[i]))
            .collect()
    };
    FoldData {
        fold,
        train: pick(false),
        val: pick(true),
    }
}

fn run_fold<M: Trainable>(
    kind: ModelKind,
    fold: usize,
    model: M,
    train_inputs: &[M::Input],
    test_inputs: &[M::Input],
    labels: &[LabelVector],
    folds: &[Vec<usize>],
    cfg: &TrainConfig,
) -> Result<FoldResult> {
    let data = fold_data(fold, folds, train_inputs, labels);
    let cfg = TrainConfig {
        seed: cfg.seed.wrapping_add(fold as u64),
        ..cfg.clone()
    };
    let outcome = train_fold(model, &data, &cfg)?;
    let test_refs: Vec<&M::Input> = test_inputs.iter().collect();
    let test_probs = predict(&outcome.model, &test_refs)?.into_iter().map(|o| o.p).collect();
    let checkpoint = outcome
        .checkpoint
        .with_meta("model", kind.name())
        .with_meta("fold", fold.to_string())
        .with_meta("setup", cfg.setup.name())
        .with_meta("best_f1", outcome.best_f1.to_string());
    Ok(FoldResult {
        run: FoldRun {
            model: kind.name().to_string(),
            fold,
            best_f1: outcome.best_f1,
            test_probs,
        },
        records: outcome.records,
        checkpoint,
    })
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Trains a uni-modal model on every fold. Folds run concurrently up to
/// `cfg.jobs`, each with seed `seed + fold`.
pub fn train_member(kind: ModelKind, prepared: &Prepared, cfg: &RunConfig, folds: &[Vec<usize>]) -> Result<Vec<FoldResult>> {
    let train_cfg = &cfg.train;
    in_pool(cfg.jobs, || {
        (0..folds.len())
            .into_par_iter()
            .map(|j| {
                let seed = model_seed(kind, train_cfg.seed, j);
                match init_member(kind, prepared, cfg, seed)? {
                    Member::Text(m) => run_fold(kind, j, m, &prepared.text_train, &prepared.text_test, &prepared.train_labels, folds, train_cfg),
                    Member::Image(m) => run_fold(kind, j, m, &prepared.image_train, &prepared.image_test, &prepared.train_labels, folds, train_cfg),
                }
            })
            .collect()
    })?
}

/// Evaluation-mode outputs of a stored member on the train and test
/// splits. The checkpoint is only read.
pub fn member_outputs(
    kind: ModelKind,
    checkpoint: &Checkpoint,
    prepared: &Prepared,
    cfg: &RunConfig,
) -> Result<(Vec<ModelOutput>, Vec<ModelOutput>)> {
    fn run<M: Trainable>(mut m: M, ckpt: &Checkpoint, train: &[M::Input], test: &[M::Input]) -> Result<(Vec<ModelOutput>, Vec<ModelOutput>)> {
        ckpt.load_into(&mut m)?;
        let tr: Vec<&M::Input> = train.iter().collect();
        let te: Vec<&M::Input> = test.iter().collect();
        Ok((predict(&m, &tr)?, predict(&m, &te)?))
    }
    match init_member(kind, prepared, cfg, 0)? {
        Member::Text(m) => run(m, checkpoint, &prepared.text_train, &prepared.text_test),
        Member::Image(m) => run(m, checkpoint, &prepared.image_train, &prepared.image_test),
    }
}

fn fusion_inputs(per_member: Vec<Vec<ModelOutput>>) -> Result<Vec<FusionInput>> {
    let n = per_member.first().map_or(0, Vec::len);
    let mut columns: Vec<std::vec::IntoIter<ModelOutput>> = per_member.into_iter().map(Vec::into_iter).collect();
    (0..n)
        .map(|_| FusionInput::new(columns.iter_mut().map(|c| c.next().expect("aligned outputs")).collect()))
        .collect()
}

/// Trains a fusion model on every fold over frozen members.
/// `members[i][j]` is the checkpoint of member `i` for fold `j`. Member
/// outputs are computed once per fold and reused for every epoch, and
/// the member checkpoints are hashed before and after training.
pub fn train_fusion(
    kind: ModelKind,
    prepared: &Prepared,
    cfg: &RunConfig,
    folds: &[Vec<usize>],
    members: &[Vec<Checkpoint>],
) -> Result<Vec<FoldResult>> {
    let member_kinds = kind.members();
    if member_kinds.is_empty() {
        return Err(Error::invalid(format!("{kind} is not a fusion model")));
    }
    if members.len() != member_kinds.len() || members.iter().any(|m| m.len() != folds.len()) {
        return Err(Error::Dependency(format!(
            "{kind} needs {} member runs with {} folds each",
            member_kinds.len(),
            folds.len()
        )));
    }
    let before: Vec<Vec<String>> = members.iter().map(|m| m.iter().map(Checkpoint::content_hash).collect()).collect();
    let fusion_cfg = cfg.fusion_train();
    let results = in_pool(cfg.jobs, || {
        (0..folds.len())
            .into_par_iter()
            .map(|j| {
                let mut train_out = Vec::new();
                let mut test_out = Vec::new();
                for (mk, ckpts) in member_kinds.iter().zip(members) {
                    let (tr, te) = member_outputs(*mk, &ckpts[j], prepared, cfg)?;
                    train_out.push(tr);
                    test_out.push(te);
                }
                let train_inputs = fusion_inputs(train_out)?;
                let test_inputs = fusion_inputs(test_out)?;
                let concat_len = train_inputs[0].concat_len();
                let mut rng = ChaCha8Rng::seed_from_u64(model_seed(kind, fusion_cfg.seed, j));
                let model = FusionModel::init(&mut rng, concat_len, member_kinds.len(), fusion_cfg.setup.classes(), fusion_cfg.dropout);
                run_fold(kind, j, model, &train_inputs, &test_inputs, &prepared.train_labels, folds, &fusion_cfg)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let after: Vec<Vec<String>> = members.iter().map(|m| m.iter().map(Checkpoint::content_hash).collect()).collect();
    if before != after {
        return Err(Error::Validation("member checkpoints changed during fusion training".into()));
    }
    Ok(results)
}

/// Scores of one set of predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    /// Binary scores for Setup A, the four sub-labels for Setup B.
    pub native: F1Scores,
    /// Binary misogyny scores; derived by OR / max for Setup B.
    pub task_a: F1Scores,
}

impl Scores {
    /// The metric each setup is judged by: macro F1 for A, weighted F1
    /// over the sub-labels for B.
    pub fn headline(&self, setup: Setup) -> f64 {
        match setup {
            Setup::A => self.native.macro_f1,
            Setup::B => self.native.weighted_f1,
        }
    }
}

pub fn setup_of(probs: &[Array1<f64>]) -> Result<Setup> {
    match probs.first().map(Array1::len) {
        Some(1) => Ok(Setup::A),
        Some(4) => Ok(Setup::B),
        Some(n) => Err(Error::shape(format!("predictions have {n} columns, expected 1 or 4"))),
        None => Err(Error::Empty("no predictions")),
    }
}

/// Task A labels and probabilities for either setup.
pub fn task_a(probs: &[Array1<f64>]) -> Result<(Vec<f64>, Vec<bool>)> {
    let p: Vec<f64> = match setup_of(probs)? {
        Setup::A => probs.iter().map(|r| r[0]).collect(),
        Setup::B => probs.iter().map(derive_task_a_prob).collect(),
    };
    let labels = match setup_of(probs)? {
        Setup::A => threshold(&p),
        Setup::B => probs
            .iter()
            .map(|r| derive_task_a_label(&threshold(r.as_slice().expect("contiguous"))))
            .collect(),
    };
    Ok((p, labels))
}

pub fn score(probs: &[Array1<f64>], labels: &[LabelVector]) -> Result<Scores> {
    if probs.len() != labels.len() {
        return Err(Error::shape(format!("{} predictions for {} labels", probs.len(), labels.len())));
    }
    let truth_a: Vec<bool> = labels.iter().map(|l| l.mis).collect();
    let (_, pred_a) = task_a(probs)?;
    let task_a = binary_f1_scores(&pred_a, &truth_a)?;
    let native = match setup_of(probs)? {
        Setup::A => task_a.clone(),
        Setup::B => {
            let pred: Vec<Vec<bool>> = probs.iter().map(|r| threshold(r.as_slice().expect("contiguous"))).collect();
            let truth: Vec<Vec<bool>> = labels.iter().map(|l| l.sub_labels().to_vec()).collect();
            f1_scores(&pred, &truth)?
        }
    };
    Ok(Scores { native, task_a })
}

/// Per-fold and soft-voted scores of one model on the test split.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub per_fold: Vec<Scores>,
    pub ensemble: EnsemblePrediction,
    pub soft_vote: Scores,
}

pub fn evaluate(runs: &[FoldRun], labels: &[LabelVector]) -> Result<Evaluation> {
    let per_fold = runs.iter().map(|r| score(&r.test_probs, labels)).collect::<Result<Vec<_>>>()?;
    let ensemble = soft_vote(runs)?;
    let soft_vote = score(&ensemble.probs, labels)?;
    Ok(Evaluation {
        per_fold,
        ensemble,
        soft_vote,
    })
}

/// Number of parameters of a freshly built member, for reporting.
pub fn member_size(kind: ModelKind, prepared: &Prepared, cfg: &RunConfig) -> Result<usize> {
    Ok(match init_member(kind, prepared, cfg, 0)? {
        Member::Text(m) => m.num_params(),
        Member::Image(m) => m.num_params(),
    })
}
