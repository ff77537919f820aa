use ndarray::Array1;

use crate::error::{Error, Result};

/// Test-set output of one fold of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRun {
    pub model: String,
    pub fold: usize,
    pub best_f1: f64,
    pub test_probs: Vec<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePrediction {
    pub probs: Vec<Array1<f64>>,
    pub labels: Vec<Vec<bool>>,
}

impl EnsemblePrediction {
    pub fn from_probs(probs: Vec<Array1<f64>>) -> Self {
        let labels = probs
            .iter()
            .map(|p| p.iter().map(|&x| x >= 0.5).collect())
            .collect();
        EnsemblePrediction { probs, labels }
    }
}

/// Fold weights `F1_j / sum_f F1_f`.
pub fn fold_weights(f1: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = f1.iter().sum();
    if f1.is_empty() || total <= 0.0 {
        return Err(Error::invalid(
            "soft voting needs at least one fold with a positive F1",
        ));
    }
    Ok(f1.iter().map(|f| f / total).collect())
}

/// F1-weighted average of the fold probabilities.
pub fn soft_vote(runs: &[FoldRun]) -> Result<EnsemblePrediction> {
    let first = runs.first().ok_or(Error::Empty("no fold runs to vote over"))?;
    for r in runs {
        if r.model != first.model || r.test_probs.len() != first.test_probs.len() {
            return Err(Error::shape(format!(
                "fold {} ({}) does not match fold {} ({})",
                r.fold, r.model, first.fold, first.model
            )));
        }
    }
    let weights = fold_weights(&runs.iter().map(|r| r.best_f1).collect::<Vec<_>>())?;
    let mut probs = Vec::with_capacity(first.test_probs.len());
    for i in 0..first.test_probs.len() {
        let mut acc = Array1::<f64>::zeros(first.test_probs[i].len());
        for (r, &w) in runs.iter().zip(&weights) {
            if r.test_probs[i].len() != acc.len() {
                return Err(Error::shape("fold probability widths differ"));
            }
            acc.scaled_add(w, &r.test_probs[i]);
        }
        probs.push(acc);
    }
    Ok(EnsemblePrediction::from_probs(probs))
}

/// Majority rule: a label is set iff at least half of the `m` models set
/// it, i.e. `2 * count >= m`.
pub fn hard_vote(models: &[Vec<Vec<bool>>]) -> Result<Vec<Vec<bool>>> {
    let first = models.first().ok_or(Error::Empty("no models to vote over"))?;
    let m = models.len();
    let mut out = Vec::with_capacity(first.len());
    for (i, row) in first.iter().enumerate() {
        let mut counts = vec![0usize; row.len()];
        for model in models {
            let r = model
                .get(i)
                .filter(|r| r.len() == row.len() && model.len() == first.len())
                .ok_or_else(|| Error::shape("hard vote inputs are not aligned"))?;
            for (c, &v) in counts.iter_mut().zip(r) {
                *c += v as usize;
            }
        }
        out.push(counts.iter().map(|&c| 2 * c >= m).collect());
    }
    Ok(out)
}

/// Sub-task A label: any sub-category set.
pub fn derive_task_a_label(labels_b: &[bool]) -> bool {
    labels_b.iter().any(|&x| x)
}

/// Sub-task A probability: the largest sub-category probability.
pub fn derive_task_a_prob(p_b: &Array1<f64>) -> f64 {
    p_b.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
