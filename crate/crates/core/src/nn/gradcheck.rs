//! Central finite-difference checks for hand-written backward passes.

use super::params::{Parameters, ParametersExt};

/// `dL/dtheta` by central differences, one parameter at a time.
pub fn numeric_gradient<M, F>(model: &M, loss: F, eps: f64) -> Vec<f64>
where
    M: Parameters + Clone,
    F: Fn(&M) -> f64,
{
    let base = model.to_flat();
    let mut probe = model.clone();
    let mut theta = base.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        theta[i] = base[i] + eps;
        probe.set_flat(&theta);
        let plus = loss(&probe);
        theta[i] = base[i] - eps;
        probe.set_flat(&theta);
        let minus = loss(&probe);
        theta[i] = base[i];
        out.push((plus - minus) / (2.0 * eps));
    }
    out
}

/// Below this combined norm a gradient counts as vanishing and the error is
/// judged in absolute terms, since central differences carry round-off of
/// roughly `ulp(loss) / eps` per entry.
pub const SCALE_FLOOR: f64 = 1e-6;

/// `|a - b| / (|a| + |b|)` over a vector, with the denominator floored at
/// [`SCALE_FLOOR`].
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / scale.max(SCALE_FLOOR)
}

/// Relative error per named parameter array.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub per_param: Vec<(String, f64)>,
}

impl GradReport {
    pub fn max_error(&self) -> f64 {
        self.per_param.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&(String, f64)> {
        self.per_param
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Compares an analytic gradient (stored in a model-shaped container)
/// against central differences of `loss`.
pub fn check<M, F>(model: &M, analytic: &M, loss: F, eps: f64) -> GradReport
where
    M: Parameters + Clone,
    F: Fn(&M) -> f64,
{
    let numeric = numeric_gradient(model, loss, eps);
    let analytic_flat = analytic.to_flat();
    let mut per_param = Vec::new();
    let mut offset = 0;
    model.visit("", &mut |name, _, data| {
        let span = offset..offset + data.len();
        per_param.push((
            name.to_string(),
            relative_error(&analytic_flat[span.clone()], &numeric[span]),
        ));
        offset += data.len();
    });
    GradReport { per_param }
}
