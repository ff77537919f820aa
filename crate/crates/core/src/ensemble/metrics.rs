use crate::error::{Error, Result};

/// F1 of one binary column, 0 when precision + recall is 0.
pub fn f1_binary(pred: &[bool], truth: &[bool]) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    // 2PR/(P+R) simplifies to 2tp / (2tp + fp + fn)
    let denom = 2 * tp + fp + fn_;
    if tp == 0 || denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Per-class F1 together with both averages.
#[derive(Debug, Clone, PartialEq)]
pub struct F1Scores {
    pub per_class: Vec<f64>,
    pub support: Vec<usize>,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

fn check_lengths<T>(pred: &[T], truth: &[T]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} targets",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

fn summarize(per_class: Vec<f64>, support: Vec<usize>) -> F1Scores {
    let macro_f1 = per_class.iter().sum::<f64>() / per_class.len().max(1) as f64;
    let total: usize = support.iter().sum();
    let weighted_f1 = if total == 0 {
        0.0
    } else {
        per_class
            .iter()
            .zip(&support)
            .map(|(f, &s)| f * s as f64)
            .sum::<f64>()
            / total as f64
    };
    F1Scores {
        per_class,
        support,
        macro_f1,
        weighted_f1,
    }
}

/// Multi-label scores: one column per class, rows are samples.
pub fn f1_scores(pred: &[Vec<bool>], truth: &[Vec<bool>]) -> Result<F1Scores> {
    check_lengths(pred, truth)?;
    let classes = truth.first().map_or(0, Vec::len);
    if pred.iter().chain(truth).any(|r| r.len() != classes) {
        return Err(Error::shape("label rows have different widths"));
    }
    let mut per_class = Vec::with_capacity(classes);
    let mut support = Vec::with_capacity(classes);
    for c in 0..classes {
        let p: Vec<bool> = pred.iter().map(|r| r[c]).collect();
        let t: Vec<bool> = truth.iter().map(|r| r[c]).collect();
        per_class.push(f1_binary(&p, &t));
        support.push(t.iter().filter(|&&x| x).count());
    }
    Ok(summarize(per_class, support))
}

/// Binary scores over both classes: index 0 is the negative class and
/// index 1 the positive one.
pub fn binary_f1_scores(pred: &[bool], truth: &[bool]) -> Result<F1Scores> {
    check_lengths(pred, truth)?;
    let neg = |v: &[bool]| v.iter().map(|x| !x).collect::<Vec<_>>();
    let pos_support = truth.iter().filter(|&&x| x).count();
    Ok(summarize(
        vec![f1_binary(&neg(pred), &neg(truth)), f1_binary(pred, truth)],
        vec![truth.len() - pos_support, pos_support],
    ))
}

/// `p >= 0.5` elementwise.
pub fn threshold(p: &[f64]) -> Vec<bool> {
    p.iter().map(|&x| x >= 0.5).collect()
}
