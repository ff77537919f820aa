use ndarray::Array1;

use crate::error::{Error, Result};
use crate::preprocess::LabelVector;

const CLAMP: f64 = 1e-12;

fn clamp(p: f64) -> f64 {
    p.clamp(CLAMP, 1.0 - CLAMP)
}

fn bce_term(p: f64, y: f64) -> f64 {
    let p = clamp(p);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

fn bce_slope(p: f64, y: f64) -> f64 {
    let p = clamp(p);
    -y / p + (1.0 - y) / (1.0 - p)
}

/// Binary cross-entropy averaged over all components, with probabilities
/// clamped to `[1e-12, 1 - 1e-12]`.
pub fn bce(p: &[f64], y: &[f64]) -> f64 {
    assert_eq!(p.len(), y.len(), "bce length mismatch");
    if p.is_empty() {
        return 0.0;
    }
    p.iter().zip(y).map(|(&p, &y)| bce_term(p, y)).sum::<f64>() / p.len() as f64
}

/// Sub-task B class order.
pub const SUB_CLASSES: [&str; 4] = ["shm", "ste", "obj", "vio"];

/// Inverse-support class weights normalized to sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights(pub [f64; 4]);

impl LossWeights {
    pub const UNIFORM: LossWeights = LossWeights([0.25; 4]);

    /// Weights from positive counts per class over the label vectors.
    pub fn from_labels(labels: &[LabelVector]) -> Result<Self> {
        let mut counts = [0u64; 4];
        for l in labels {
            for (c, &b) in counts.iter_mut().zip(l.sub_labels().iter()) {
                *c += b as u64;
            }
        }
        class_weights(&counts, labels.len() as u64)
    }
}

/// `w_c = (NoS / NoS(c)) / sum_c' (NoS / NoS(c'))`
pub fn class_weights(counts: &[u64; 4], total: u64) -> Result<LossWeights> {
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::invalid(format!(
            "class {} has no positive samples",
            SUB_CLASSES[c]
        )));
    }
    let ratios = counts.map(|n| total as f64 / n as f64);
    let sum: f64 = ratios.iter().sum();
    Ok(LossWeights(ratios.map(|r| r / sum)))
}

/// `sum_c w_c * BCE(p_c, y_c)` where each class term is averaged over
/// the batch. Rows of `probs` and `targets` are samples with four columns.
pub fn weighted_bce(probs: &[Array1<f64>], targets: &[Array1<f64>], weights: &LossWeights) -> f64 {
    (0..4)
        .map(|c| {
            let p: Vec<f64> = probs.iter().map(|r| r[c]).collect();
            let y: Vec<f64> = targets.iter().map(|r| r[c]).collect();
            weights.0[c] * bce(&p, &y)
        })
        .sum()
}

/// Sub-task A probability: the largest sub-category probability.
pub fn pseudo_mis(p: &Array1<f64>) -> f64 {
    p.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn argmax(p: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Mean over the batch of `(max_c p_c - y_mis)^2`.
pub fn teacher_forcing_loss(probs: &[Array1<f64>], mis: &[f64]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    probs
        .iter()
        .zip(mis)
        .map(|(p, &y)| (pseudo_mis(p) - y).powi(2))
        .sum::<f64>()
        / probs.len() as f64
}

/// `mix.0 * L1 + mix.1 * L2`
pub fn combined_loss(l1: f64, l2: f64, mix: (f64, f64)) -> f64 {
    mix.0 * l1 + mix.1 * l2
}

/// Binary identification with one output (`A`) or four sub-categories
/// with weighted BCE and teacher forcing (`B`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Setup {
    A,
    B,
}

impl Setup {
    pub fn classes(&self) -> usize {
        match self {
            Setup::A => 1,
            Setup::B => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Setup::A => "A",
            Setup::B => "B",
        }
    }
}

impl std::str::FromStr for Setup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Setup::A),
            "B" | "b" => Ok(Setup::B),
            other => Err(Error::invalid(format!("unknown setup `{other}`"))),
        }
    }
}

/// Loss for one setup together with its gradient per sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub setup: Setup,
    pub weights: LossWeights,
    pub mix: (f64, f64),
}

impl Objective {
    /// Batch loss and `dL/dp` for every sample.
    pub fn evaluate(&self, probs: &[Array1<f64>], labels: &[LabelVector]) -> (f64, Vec<Array1<f64>>) {
        let b = probs.len() as f64;
        match self.setup {
            Setup::A => {
                let p: Vec<f64> = probs.iter().map(|r| r[0]).collect();
                let y: Vec<f64> = labels.iter().map(|l| l.mis as u8 as f64).collect();
                let grads = p
                    .iter()
                    .zip(&y)
                    .map(|(&p, &y)| Array1::from_elem(1, bce_slope(p, y) / b))
                    .collect();
                (bce(&p, &y), grads)
            }
            Setup::B => {
                let targets: Vec<Array1<f64>> =
                    labels.iter().map(|l| Array1::from(l.targets(4))).collect();
                let mis: Vec<f64> = labels.iter().map(|l| l.mis as u8 as f64).collect();
                let l1 = weighted_bce(probs, &targets, &self.weights);
                let l2 = teacher_forcing_loss(probs, &mis);
                let grads = probs
                    .iter()
                    .zip(&targets)
                    .zip(&mis)
                    .map(|((p, y), &ym)| {
                        let mut g = Array1::from_shape_fn(4, |c| {
                            self.mix.0 * self.weights.0[c] * bce_slope(p[c], y[c]) / b
                        });
                        g[argmax(p)] += self.mix.1 * 2.0 * (pseudo_mis(p) - ym) / b;
                        g
                    })
                    .collect();
                (combined_loss(l1, l2, self.mix), grads)
            }
        }
    }
}
