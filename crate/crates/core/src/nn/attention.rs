use ndarray::{s, Array2, Axis};
use rand_chacha::ChaCha8Rng;

use super::init::glorot;
use super::params::{visit2, visit2_mut, Parameters};
use crate::error::{Error, Result};

/// Attention dimensions shared by every attention-based layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionConfig {
    pub d_att: usize,
    pub heads: usize,
    pub layers: usize,
}

impl AttentionConfig {
    pub const FULL: AttentionConfig = AttentionConfig {
        d_att: 1024,
        heads: 8,
        layers: 3,
    };
    pub const TOY: AttentionConfig = AttentionConfig {
        d_att: 32,
        heads: 4,
        layers: 3,
    };

    pub fn new(d_att: usize, heads: usize, layers: usize) -> Result<Self> {
        if heads == 0 || d_att == 0 || d_att % heads != 0 {
            return Err(Error::invalid(format!(
                "head count {heads} must divide attention dimension {d_att}"
            )));
        }
        Ok(AttentionConfig {
            d_att,
            heads,
            layers,
        })
    }

    pub fn d_k(&self) -> usize {
        self.d_att / self.heads
    }
}

impl Default for AttentionConfig {
    fn default() -> Self {
        Self::TOY
    }
}

/// Per-head query/key/value projections. Head `j` owns rows
/// `j*d_k..(j+1)*d_k` of each `(d_att, d_in)` matrix, so `X W^T` yields
/// all heads side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadAttention {
    pub heads: usize,
    pub w_query: Array2<f64>,
    pub w_key: Array2<f64>,
    pub w_value: Array2<f64>,
}

pub struct AttentionCache {
    x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Row-softmax attention weights per head, each `L x L`.
    pub weights: Vec<Array2<f64>>,
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

impl MultiHeadAttention {
    pub fn init(rng: &mut ChaCha8Rng, cfg: &AttentionConfig) -> Self {
        MultiHeadAttention {
            heads: cfg.heads,
            w_query: glorot(rng, cfg.d_att, cfg.d_att),
            w_key: glorot(rng, cfg.d_att, cfg.d_att),
            w_value: glorot(rng, cfg.d_att, cfg.d_att),
        }
    }

    pub fn d_k(&self) -> usize {
        self.w_query.nrows() / self.heads
    }

    /// Self-attention with `Q = K = V = X`; returns one `L x d_k` output
    /// per head: `softmax((X Wq_j^T)(X Wk_j^T)^T / sqrt(d_k)) (X Wv_j^T)`.
    pub fn forward(&self, x: &Array2<f64>) -> Result<(Vec<Array2<f64>>, AttentionCache)> {
        if x.ncols() != self.w_query.ncols() {
            return Err(Error::shape(format!(
                "attention expects width {}, got {}",
                self.w_query.ncols(),
                x.ncols()
            )));
        }
        let q = x.dot(&self.w_query.t());
        let k = x.dot(&self.w_key.t());
        let v = x.dot(&self.w_value.t());
        let dk = self.d_k();
        let scale = 1.0 / (dk as f64).sqrt();
        let mut outputs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for j in 0..self.heads {
            let cols = s![.., j * dk..(j + 1) * dk];
            let logits = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            if !logits.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("attention logits in head {j}")));
            }
            let a = softmax_rows(&logits);
            outputs.push(a.dot(&v.slice(cols)));
            weights.push(a);
        }
        Ok((
            outputs,
            AttentionCache {
                x: x.clone(),
                q,
                k,
                v,
                weights,
            },
        ))
    }

    /// Backward from per-head output gradients; returns `dL/dX`.
    pub fn backward(
        &self,
        cache: &AttentionCache,
        d_heads: &[Array2<f64>],
        grad: &mut MultiHeadAttention,
    ) -> Array2<f64> {
        let dk = self.d_k();
        let scale = 1.0 / (dk as f64).sqrt();
        let mut dq = Array2::zeros(cache.q.raw_dim());
        let mut dkey = Array2::zeros(cache.k.raw_dim());
        let mut dv = Array2::zeros(cache.v.raw_dim());
        for (j, (a, dout)) in cache.weights.iter().zip(d_heads).enumerate() {
            let cols = s![.., j * dk..(j + 1) * dk];
            let v_j = cache.v.slice(cols);
            dv.slice_mut(cols).assign(&a.t().dot(dout));
            let da = dout.dot(&v_j.t());
            // softmax backward per row: a * (da - <da, a>)
            let mut dlogits = &da * a;
            let inner = dlogits.sum_axis(Axis(1));
            for (mut row, (&c, a_row)) in dlogits
                .axis_iter_mut(Axis(0))
                .zip(inner.iter().zip(a.axis_iter(Axis(0))))
            {
                row.zip_mut_with(&a_row, |d, &ai| *d -= ai * c);
            }
            dlogits *= scale;
            dq.slice_mut(cols).assign(&dlogits.dot(&cache.k.slice(cols)));
            dkey.slice_mut(cols).assign(&dlogits.t().dot(&cache.q.slice(cols)));
        }
        grad.w_query += &dq.t().dot(&cache.x);
        grad.w_key += &dkey.t().dot(&cache.x);
        grad.w_value += &dv.t().dot(&cache.x);
        dq.dot(&self.w_query) + dkey.dot(&self.w_key) + dv.dot(&self.w_value)
    }
}

impl Parameters for MultiHeadAttention {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        visit2(prefix, "w_query", &self.w_query, f);
        visit2(prefix, "w_key", &self.w_key, f);
        visit2(prefix, "w_value", &self.w_value, f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        visit2_mut(prefix, "w_query", &mut self.w_query, f);
        visit2_mut(prefix, "w_key", &mut self.w_key, f);
        visit2_mut(prefix, "w_value", &mut self.w_value, f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn config_validation() {
        assert!(AttentionConfig::new(32, 5, 3).is_err());
        assert_eq!(AttentionConfig::new(32, 4, 3).unwrap().d_k(), 8);
        assert_eq!(AttentionConfig::FULL.d_k(), 128);
    }

    #[test]
    fn zero_query_key_gives_uniform_attention() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = AttentionConfig::new(8, 2, 1).unwrap();
        let mut mha = MultiHeadAttention::init(&mut rng, &cfg);
        mha.w_query.fill(0.0);
        mha.w_key.fill(0.0);
        let x = crate::nn::init::uniform(&mut rng, 3, 8, 1.0);
        let (heads, _) = mha.forward(&x).unwrap();
        let v = x.dot(&mha.w_value.t());
        for (j, h) in heads.iter().enumerate() {
            let mean = v.slice(s![.., j * 4..(j + 1) * 4]).mean_axis(Axis(0)).unwrap();
            for row in h.axis_iter(Axis(0)) {
                for (a, b) in row.iter().zip(mean.iter()) {
                    assert!((a - b).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn single_token_is_value_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = AttentionConfig::new(8, 4, 1).unwrap();
        let mha = MultiHeadAttention::init(&mut rng, &cfg);
        let x = crate::nn::init::uniform(&mut rng, 1, 8, 1.0);
        let (heads, cache) = mha.forward(&x).unwrap();
        let v = x.dot(&mha.w_value.t());
        for (j, h) in heads.iter().enumerate() {
            assert_eq!(cache.weights[j][[0, 0]], 1.0);
            assert_eq!(h.row(0), v.slice(s![0, j * 2..(j + 1) * 2]));
        }
    }

    #[test]
    fn non_finite_logits_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = AttentionConfig::new(4, 1, 1).unwrap();
        let mha = MultiHeadAttention::init(&mut rng, &cfg);
        let mut x = Array2::zeros((2, 4));
        x[[0, 0]] = f64::NAN;
        assert!(matches!(mha.forward(&x), Err(Error::NonFinite(_))));
    }
}
