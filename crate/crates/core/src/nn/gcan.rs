use ndarray::{concatenate, Array2, Axis};
use rand_chacha::ChaCha8Rng;

use super::attention::{AttentionCache, AttentionConfig, MultiHeadAttention};
use super::layer_norm::{LayerNorm, LayerNormCache};
use super::linear::Linear;
use super::params::{join, Parameters};
use crate::error::{Error, Result};

/// One graph convolutional attention layer.
///
/// Head outputs are left-multiplied by the document adjacency, then either
/// concatenated (inner layers) or averaged (last layer) and projected back
/// to `d_att`. The projection sits in a residual branch followed by layer
/// normalization: `LN(X + FC(fuse(A alpha_1 .. A alpha_h)))`. Without an
/// adjacency the layer is a plain transformer attention block.
#[derive(Debug, Clone, PartialEq)]
pub struct GcanLayer {
    pub attention: MultiHeadAttention,
    pub projection: Linear,
    pub norm: LayerNorm,
    pub is_last: bool,
}

pub struct GcanLayerCache {
    attention: AttentionCache,
    fused: Array2<f64>,
    norm: LayerNormCache,
    /// Head outputs before adjacency weighting.
    pub heads: Vec<Array2<f64>>,
}

impl GcanLayer {
    pub fn init(rng: &mut ChaCha8Rng, cfg: &AttentionConfig, is_last: bool) -> Self {
        let fused_width = if is_last { cfg.d_k() } else { cfg.d_att };
        GcanLayer {
            attention: MultiHeadAttention::init(rng, cfg),
            projection: Linear::init(rng, fused_width, cfg.d_att),
            norm: LayerNorm::new(cfg.d_att),
            is_last,
        }
    }

    fn weight(adjacency: Option<&Array2<f64>>, heads: &[Array2<f64>]) -> Vec<Array2<f64>> {
        match adjacency {
            Some(a) => heads.iter().map(|h| a.dot(h)).collect(),
            None => heads.to_vec(),
        }
    }

    fn fuse(&self, weighted: &[Array2<f64>]) -> Array2<f64> {
        if self.is_last {
            let mut sum = weighted[0].clone();
            for w in &weighted[1..] {
                sum += w;
            }
            sum / weighted.len() as f64
        } else {
            let views: Vec<_> = weighted.iter().map(|w| w.view()).collect();
            concatenate(Axis(1), &views).expect("heads share their row count")
        }
    }

    pub fn forward(
        &self,
        x: &Array2<f64>,
        adjacency: Option<&Array2<f64>>,
    ) -> Result<(Array2<f64>, GcanLayerCache)> {
        if let Some(a) = adjacency {
            if a.nrows() != x.nrows() || a.ncols() != x.nrows() {
                return Err(Error::shape(format!(
                    "adjacency is {}x{} but the sequence has {} rows",
                    a.nrows(),
                    a.ncols(),
                    x.nrows()
                )));
            }
        }
        let (heads, attention) = self.attention.forward(x)?;
        let weighted = Self::weight(adjacency, &heads);
        let fused = self.fuse(&weighted);
        let projected = self.projection.forward(&fused)?;
        let (y, norm) = self.norm.forward(&(x + &projected));
        Ok((
            y,
            GcanLayerCache {
                attention,
                fused,
                norm,
                heads,
            },
        ))
    }

    pub fn backward(
        &self,
        cache: &GcanLayerCache,
        adjacency: Option<&Array2<f64>>,
        dy: &Array2<f64>,
        grad: &mut GcanLayer,
    ) -> Array2<f64> {
        let dz = self.norm.backward(&cache.norm, dy, &mut grad.norm);
        let dfused = self
            .projection
            .backward(&cache.fused, &dz, &mut grad.projection);
        let h = self.attention.heads;
        let dk = self.attention.d_k();
        let dweighted: Vec<Array2<f64>> = if self.is_last {
            let share = dfused / h as f64;
            vec![share; h]
        } else {
            (0..h)
                .map(|j| {
                    dfused
                        .slice(ndarray::s![.., j * dk..(j + 1) * dk])
                        .to_owned()
                })
                .collect()
        };
        let dheads: Vec<Array2<f64>> = match adjacency {
            Some(a) => dweighted.iter().map(|d| a.t().dot(d)).collect(),
            None => dweighted,
        };
        let dx_attention = self
            .attention
            .backward(&cache.attention, &dheads, &mut grad.attention);
        dz + dx_attention
    }
}

impl Parameters for GcanLayer {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.attention.visit(&join(prefix, "attention"), f);
        self.projection.visit(&join(prefix, "projection"), f);
        self.norm.visit(&join(prefix, "norm"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.attention.visit_mut(&join(prefix, "attention"), f);
        self.projection.visit_mut(&join(prefix, "projection"), f);
        self.norm.visit_mut(&join(prefix, "norm"), f);
    }
}

/// `layers` GCAN layers where only the last one averages its heads.
#[derive(Debug, Clone, PartialEq)]
pub struct GcanStack {
    pub layers: Vec<GcanLayer>,
}

pub struct GcanStackCache {
    inputs: Vec<Array2<f64>>,
    layers: Vec<GcanLayerCache>,
}

impl GcanStack {
    pub fn init(rng: &mut ChaCha8Rng, cfg: &AttentionConfig) -> Self {
        let layers = (0..cfg.layers)
            .map(|i| GcanLayer::init(rng, cfg, i + 1 == cfg.layers))
            .collect();
        GcanStack { layers }
    }

    pub fn forward(
        &self,
        x: &Array2<f64>,
        adjacency: Option<&Array2<f64>>,
    ) -> Result<(Array2<f64>, GcanStackCache)> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let (next, cache) = layer.forward(&h, adjacency)?;
            inputs.push(h);
            caches.push(cache);
            h = next;
        }
        Ok((
            h,
            GcanStackCache {
                inputs,
                layers: caches,
            },
        ))
    }

    pub fn backward(
        &self,
        cache: &GcanStackCache,
        adjacency: Option<&Array2<f64>>,
        dy: &Array2<f64>,
        grad: &mut GcanStack,
    ) -> Array2<f64> {
        debug_assert_eq!(cache.inputs.len(), self.layers.len());
        let mut d = dy.clone();
        for ((layer, lc), g) in self
            .layers
            .iter()
            .zip(&cache.layers)
            .zip(grad.layers.iter_mut())
            .rev()
        {
            d = layer.backward(lc, adjacency, &d, g);
        }
        d
    }
}

impl Parameters for GcanStack {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        for (i, l) in self.layers.iter().enumerate() {
            l.visit(&join(prefix, &i.to_string()), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.visit_mut(&join(prefix, &i.to_string()), f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn setup(is_last: bool) -> (GcanLayer, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = AttentionConfig::new(8, 2, 1).unwrap();
        let layer = GcanLayer::init(&mut rng, &cfg, is_last);
        let x = crate::nn::init::uniform(&mut rng, 4, 8, 1.0);
        (layer, x)
    }

    #[test]
    fn identity_adjacency_matches_plain_attention() {
        for last in [false, true] {
            let (layer, x) = setup(last);
            let (with_eye, _) = layer.forward(&x, Some(&Array2::eye(4))).unwrap();
            let (plain, _) = layer.forward(&x, None).unwrap();
            assert_eq!(with_eye, plain);
        }
    }

    #[test]
    fn padding_rows_pass_weighting_unchanged() {
        let (layer, x) = setup(false);
        let mut a = Array2::zeros((4, 4));
        a[[2, 2]] = 1.0;
        a[[3, 3]] = 1.0;
        let (_, cache) = layer.forward(&x, Some(&a)).unwrap();
        let weighted = GcanLayer::weight(Some(&a), &cache.heads);
        for (w, h) in weighted.iter().zip(&cache.heads) {
            assert_eq!(w.row(2), h.row(2));
            assert_eq!(w.row(3), h.row(3));
            assert!(w.row(0).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn output_width_is_d_att_for_both_fusions() {
        for last in [false, true] {
            let (layer, x) = setup(last);
            let (y, _) = layer.forward(&x, None).unwrap();
            assert_eq!(y.dim(), (4, 8));
        }
    }

    #[test]
    fn wrong_adjacency_size() {
        let (layer, x) = setup(false);
        assert!(layer.forward(&x, Some(&Array2::eye(3))).is_err());
    }
}
