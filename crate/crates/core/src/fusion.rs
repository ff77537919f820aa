//! Bi-modal fusion: stream weighting over member probabilities plus a
//! representation classifier over the concatenated member outputs, with
//! the two predictions averaged.

use ndarray::{concatenate, Array1, Axis};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{join, ClassifierHead, HeadCache, ModelOutput, Parameters};

/// Member outputs in fusion order.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionInput {
    pub outputs: Vec<ModelOutput>,
}

impl FusionInput {
    pub fn new(outputs: Vec<ModelOutput>) -> Result<Self> {
        if outputs.len() < 2 {
            return Err(Error::invalid("fusion needs at least two member models"));
        }
        let n = outputs[0].p.len();
        if outputs.iter().any(|o| o.p.len() != n) {
            return Err(Error::shape("member models disagree on the class count"));
        }
        Ok(FusionInput { outputs })
    }

    /// `[p_1 | f_1 | ... | p_m | f_m]`
    pub fn concat(&self) -> Array1<f64> {
        let views: Vec<_> = self
            .outputs
            .iter()
            .flat_map(|o| [o.p.view(), o.f.view()])
            .collect();
        concatenate(Axis(0), &views).expect("1-d views concatenate")
    }

    pub fn concat_len(&self) -> usize {
        self.outputs.iter().map(|o| o.p.len() + o.f.len()).sum()
    }
}

/// Non-negative member weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamWeights(pub Array1<f64>);

/// Sigmoid scores from the weight predictor normalized onto the simplex.
pub fn normalize_scores(scores: &Array1<f64>) -> StreamWeights {
    StreamWeights(scores / scores.sum())
}

/// Runs the weight predictor (a classifier block with `m` outputs) and
/// normalizes its sigmoid outputs.
pub fn weight_predictor(concat: &Array1<f64>, head: &ClassifierHead) -> Result<StreamWeights> {
    Ok(normalize_scores(&head.forward(concat, None)?.0))
}

/// `sum_i w_i p_i`
pub fn stream_weighting(probs: &[Array1<f64>], weights: &StreamWeights) -> Result<Array1<f64>> {
    if probs.is_empty() || probs.len() != weights.0.len() {
        return Err(Error::shape(format!(
            "{} probability vectors for {} weights",
            probs.len(),
            weights.0.len()
        )));
    }
    let n = probs[0].len();
    if probs.iter().any(|p| p.len() != n) {
        return Err(Error::shape("probability vectors differ in length"));
    }
    let mut out = Array1::zeros(n);
    for (p, &w) in probs.iter().zip(weights.0.iter()) {
        out.scaled_add(w, p);
    }
    Ok(out)
}

/// Classifier block over the concatenated representation.
pub fn representation_fusion(concat: &Array1<f64>, head: &ClassifierHead) -> Result<Array1<f64>> {
    Ok(head.forward(concat, None)?.0)
}

/// Elementwise mean of the stream-weighting and representation-fusion
/// probabilities.
pub fn fuse(p_sw: &Array1<f64>, p_rf: &Array1<f64>) -> Result<Array1<f64>> {
    if p_sw.len() != p_rf.len() {
        return Err(Error::shape("fusion probability vectors differ in length"));
    }
    Ok((p_sw + p_rf) * 0.5)
}

/// Trainable part of a fusion model. Member encoders are frozen and only
/// enter through their precomputed outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    pub weight_predictor: ClassifierHead,
    pub classifier: ClassifierHead,
}

pub struct FusionCache {
    member_probs: Vec<Array1<f64>>,
    scores: Array1<f64>,
    weights: Array1<f64>,
    predictor: HeadCache,
    classifier: HeadCache,
}

impl FusionModel {
    pub fn init(rng: &mut ChaCha8Rng, concat_len: usize, members: usize, classes: usize, dropout: f64) -> Self {
        FusionModel {
            weight_predictor: ClassifierHead::init(rng, concat_len, members, dropout),
            classifier: ClassifierHead::init(rng, concat_len, classes, dropout),
        }
    }

    pub fn zeros(concat_len: usize, members: usize, classes: usize) -> Self {
        FusionModel {
            weight_predictor: ClassifierHead::zeros(concat_len, members),
            classifier: ClassifierHead::zeros(concat_len, classes),
        }
    }

    pub fn members(&self) -> usize {
        self.weight_predictor.classes()
    }

    pub fn classes(&self) -> usize {
        self.classifier.classes()
    }

    pub fn forward(
        &self,
        input: &FusionInput,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(ModelOutput, FusionCache)> {
        if input.outputs.len() != self.members() {
            return Err(Error::shape(format!(
                "fusion model expects {} members, got {}",
                self.members(),
                input.outputs.len()
            )));
        }
        let concat = input.concat();
        let (scores, predictor) = self
            .weight_predictor
            .forward(&concat, dropout_rng.as_deref_mut())?;
        let weights = normalize_scores(&scores);
        let member_probs: Vec<Array1<f64>> = input.outputs.iter().map(|o| o.p.clone()).collect();
        let p_sw = stream_weighting(&member_probs, &weights)?;
        let (p_rf, classifier) = self.classifier.forward(&concat, dropout_rng)?;
        let p = fuse(&p_sw, &p_rf)?;
        Ok((
            ModelOutput { p, f: concat },
            FusionCache {
                member_probs,
                scores,
                weights: weights.0,
                predictor,
                classifier,
            },
        ))
    }

    pub fn backward(&self, cache: &FusionCache, dp: &Array1<f64>, grad: &mut FusionModel) {
        let half = dp * 0.5;
        self.classifier
            .backward(&cache.classifier, &half, &mut grad.classifier);
        // p_sw = sum_i w_i p_i with w = s / sum(s)
        let dw: Array1<f64> = cache.member_probs.iter().map(|p| p.dot(&half)).collect();
        let total = cache.scores.sum();
        let inner = dw.dot(&cache.weights);
        let dscores = (dw - inner) / total;
        self.weight_predictor
            .backward(&cache.predictor, &dscores, &mut grad.weight_predictor);
    }
}

impl Parameters for FusionModel {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.weight_predictor.visit(&join(prefix, "weight_predictor"), f);
        self.classifier.visit(&join(prefix, "classifier"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.weight_predictor
            .visit_mut(&join(prefix, "weight_predictor"), f);
        self.classifier.visit_mut(&join(prefix, "classifier"), f);
    }
}
