use ndarray::{Array1, Array2, Axis};

use super::params::{visit1, visit1_mut, Parameters};

const EPS: f64 = 1e-5;

/// Per-row layer normalization with a learned scale and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

pub struct LayerNormCache {
    normed: Array2<f64>,
    inv_std: Array1<f64>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        LayerNorm {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, LayerNormCache) {
        let d = x.ncols() as f64;
        let mut normed = x.clone();
        let mut inv_std = Array1::zeros(x.nrows());
        for (mut row, s) in normed.axis_iter_mut(Axis(0)).zip(inv_std.iter_mut()) {
            let mean = row.sum() / d;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|v| v * v).sum::<f64>() / d;
            *s = 1.0 / (var + EPS).sqrt();
            let inv = *s;
            row.mapv_inplace(|v| v * inv);
        }
        let y = &normed * &self.gamma + &self.beta;
        (y, LayerNormCache { normed, inv_std })
    }

    pub fn backward(&self, cache: &LayerNormCache, dy: &Array2<f64>, grad: &mut LayerNorm) -> Array2<f64> {
        grad.gamma += &(dy * &cache.normed).sum_axis(Axis(0));
        grad.beta += &dy.sum_axis(Axis(0));
        let dn = dy * &self.gamma;
        let d = dy.ncols() as f64;
        let mut dx = Array2::zeros(dy.raw_dim());
        for (i, mut out) in dx.axis_iter_mut(Axis(0)).enumerate() {
            let g = dn.row(i);
            let n = cache.normed.row(i);
            let mean_g = g.sum() / d;
            let mean_gn = g.dot(&n) / d;
            let s = cache.inv_std[i];
            for ((o, &gi), &ni) in out.iter_mut().zip(g.iter()).zip(n.iter()) {
                *o = s * (gi - mean_g - ni * mean_gn);
            }
        }
        dx
    }
}

impl Parameters for LayerNorm {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        visit1(prefix, "gamma", &self.gamma, f);
        visit1(prefix, "beta", &self.beta, f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        visit1_mut(prefix, "gamma", &mut self.gamma, f);
        visit1_mut(prefix, "beta", &mut self.beta, f);
    }
}
