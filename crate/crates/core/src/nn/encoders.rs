use ndarray::{s, Array1, Array2, Axis};
use rand_chacha::ChaCha8Rng;

use super::attention::AttentionConfig;
use super::classifier::{ClassifierHead, HeadCache};
use super::gcan::{GcanStack, GcanStackCache};
use super::init::{uniform, uniform1};
use super::linear::Linear;
use super::params::{join, visit1, visit1_mut, visit2, visit2_mut, Parameters};
use crate::error::{Error, Result};
use crate::graph::DocAdjacency;
use crate::preprocess::{ImageTensor, TokenIdSequence};

/// The two outputs of every model: class probabilities and the
/// classification feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    pub p: Array1<f64>,
    pub f: Array1<f64>,
}

/// Fixed sinusoidal position encodings, `(len, dim)`.
pub fn sinusoidal_positions(len: usize, dim: usize) -> Array2<f64> {
    Array2::from_shape_fn((len, dim), |(pos, i)| {
        let angle = pos as f64 / 10000f64.powf((2 * (i / 2)) as f64 / dim as f64);
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

/// How the final hidden states become the feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    /// Row 0, the `[cls]` position.
    Cls,
    /// Sum over all rows.
    Sum,
}

fn pool(hidden: &Array2<f64>, pooling: Pooling) -> Array1<f64> {
    match pooling {
        Pooling::Cls => hidden.row(0).to_owned(),
        Pooling::Sum => hidden.sum_axis(Axis(0)),
    }
}

fn unpool(df: &Array1<f64>, rows: usize, pooling: Pooling) -> Array2<f64> {
    let mut d = Array2::zeros((rows, df.len()));
    match pooling {
        Pooling::Cls => d.row_mut(0).assign(df),
        Pooling::Sum => d.axis_iter_mut(Axis(0)).for_each(|mut r| r.assign(df)),
    }
    d
}

/// Which text model an encoder implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextModel {
    /// Transformer encoder; the feature is the `[cls]` row.
    Bertc,
    /// Adjacency-weighted encoder; the feature is the sum of all rows.
    Gcan,
}

/// Token embedding, sinusoidal positions, a GCAN stack and a classifier.
///
/// The BERTC variant runs the stack without an adjacency, which makes
/// every layer a standard attention block.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoder {
    pub model: TextModel,
    pub embedding: Array2<f64>,
    pub stack: GcanStack,
    pub head: ClassifierHead,
}

pub struct TextCache {
    ids: Vec<u32>,
    adjacency: Option<Array2<f64>>,
    stack: GcanStackCache,
    hidden_rows: usize,
    pooling: Pooling,
    head: HeadCache,
}

impl TextEncoder {
    pub fn init(
        rng: &mut ChaCha8Rng,
        model: TextModel,
        vocab_size: usize,
        cfg: &AttentionConfig,
        classes: usize,
        dropout: f64,
    ) -> Self {
        TextEncoder {
            model,
            embedding: uniform(rng, vocab_size, cfg.d_att, 3f64.sqrt()),
            stack: GcanStack::init(rng, cfg),
            head: ClassifierHead::init(rng, cfg.d_att, classes, dropout),
        }
    }

    pub fn d_att(&self) -> usize {
        self.embedding.ncols()
    }

    pub fn pooling(&self) -> Pooling {
        match self.model {
            TextModel::Bertc => Pooling::Cls,
            TextModel::Gcan => Pooling::Sum,
        }
    }

    fn embed(&self, seq: &TokenIdSequence) -> Result<Array2<f64>> {
        let d = self.d_att();
        let mut x = sinusoidal_positions(seq.len(), d);
        for (mut row, &id) in x.axis_iter_mut(Axis(0)).zip(&seq.ids) {
            let id = id as usize;
            if id >= self.embedding.nrows() {
                return Err(Error::invalid(format!(
                    "token id {id} outside the embedding table ({})",
                    self.embedding.nrows()
                )));
            }
            row += &self.embedding.row(id);
        }
        Ok(x)
    }

    /// Final hidden states of the stack.
    pub fn hidden(&self, seq: &TokenIdSequence, adjacency: Option<&Array2<f64>>) -> Result<Array2<f64>> {
        let x = self.embed(seq)?;
        Ok(self.stack.forward(&x, adjacency)?.0)
    }

    /// Forward with an explicit adjacency and pooling, shared by both text
    /// models.
    pub fn forward_with(
        &self,
        seq: &TokenIdSequence,
        adjacency: Option<&Array2<f64>>,
        pooling: Pooling,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(ModelOutput, TextCache)> {
        let x = self.embed(seq)?;
        let (hidden, stack) = self.stack.forward(&x, adjacency)?;
        let f = pool(&hidden, pooling);
        let (p, head) = self.head.forward(&f, dropout_rng)?;
        Ok((
            ModelOutput { p, f },
            TextCache {
                ids: seq.ids.clone(),
                adjacency: adjacency.cloned(),
                stack,
                hidden_rows: hidden.nrows(),
                pooling,
                head,
            },
        ))
    }

    /// BERTC runs without adjacency; GCAN requires the document adjacency.
    pub fn forward(
        &self,
        seq: &TokenIdSequence,
        adjacency: Option<&DocAdjacency>,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(ModelOutput, TextCache)> {
        let adjacency = match self.model {
            TextModel::Bertc => None,
            TextModel::Gcan => {
                let a = adjacency
                    .ok_or_else(|| Error::shape("GCAN encoder needs a document adjacency"))?;
                Some(&a.matrix)
            }
        };
        self.forward_with(seq, adjacency, self.pooling(), dropout_rng)
    }

    /// Accumulates gradients from `dL/dp` and optionally `dL/df`.
    pub fn backward(
        &self,
        cache: &TextCache,
        dp: &Array1<f64>,
        df: Option<&Array1<f64>>,
        grad: &mut TextEncoder,
    ) {
        let mut dfeat = self.head.backward(&cache.head, dp, &mut grad.head);
        if let Some(extra) = df {
            dfeat += extra;
        }
        let dhidden = unpool(&dfeat, cache.hidden_rows, cache.pooling);
        let dx = self.stack.backward(
            &cache.stack,
            cache.adjacency.as_ref(),
            &dhidden,
            &mut grad.stack,
        );
        for (row, &id) in dx.axis_iter(Axis(0)).zip(&cache.ids) {
            let mut g = grad.embedding.row_mut(id as usize);
            g += &row;
        }
    }
}

impl Parameters for TextEncoder {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        visit2(prefix, "embedding", &self.embedding, f);
        self.stack.visit(&join(prefix, "stack"), f);
        self.head.visit(&join(prefix, "head"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        visit2_mut(prefix, "embedding", &mut self.embedding, f);
        self.stack.visit_mut(&join(prefix, "stack"), f);
        self.head.visit_mut(&join(prefix, "head"), f);
    }
}

/// Patch-embedding image encoder: flattened `P x P` patches are projected
/// to `d_att`, a learned `[cls]` row is prepended, positions are added,
/// and the `[cls]` row of the final hidden states is the feature.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEncoder {
    pub patch: usize,
    pub projection: Linear,
    pub cls: Array1<f64>,
    pub stack: GcanStack,
    pub head: ClassifierHead,
}

pub struct ImageCache {
    patches: Array2<f64>,
    stack: GcanStackCache,
    hidden_rows: usize,
    head: HeadCache,
}

/// Splits a `3 x C x C` tensor into non-overlapping `P x P` patches, one
/// row per patch in raster order, each flattened channel-major.
pub fn patchify(img: &ImageTensor, patch: usize) -> Result<Array2<f64>> {
    if patch == 0 || img.side % patch != 0 {
        return Err(Error::invalid(format!(
            "patch size {patch} does not divide image side {}",
            img.side
        )));
    }
    let per_side = img.side / patch;
    let width = 3 * patch * patch;
    let mut out = Array2::zeros((per_side * per_side, width));
    for py in 0..per_side {
        for px in 0..per_side {
            let mut row = out.row_mut(py * per_side + px);
            let mut k = 0;
            for c in 0..3 {
                for y in 0..patch {
                    for x in 0..patch {
                        row[k] = img.at(c, py * patch + y, px * patch + x);
                        k += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

impl ImageEncoder {
    pub fn init(
        rng: &mut ChaCha8Rng,
        patch: usize,
        cfg: &AttentionConfig,
        classes: usize,
        dropout: f64,
    ) -> Self {
        ImageEncoder {
            patch,
            projection: Linear::init(rng, 3 * patch * patch, cfg.d_att),
            cls: uniform1(rng, cfg.d_att, 0.5),
            stack: GcanStack::init(rng, cfg),
            head: ClassifierHead::init(rng, cfg.d_att, classes, dropout),
        }
    }

    /// Sequence length for a `side x side` image: patches plus `[cls]`.
    pub fn sequence_len(&self, side: usize) -> usize {
        (side / self.patch).pow(2) + 1
    }

    fn embed(&self, patches: &Array2<f64>) -> Result<Array2<f64>> {
        let tokens = self.projection.forward(patches)?;
        let n = tokens.nrows() + 1;
        let mut x = sinusoidal_positions(n, self.cls.len());
        {
            let mut first = x.row_mut(0);
            first += &self.cls;
        }
        let mut rest = x.slice_mut(s![1.., ..]);
        rest += &tokens;
        Ok(x)
    }

    pub fn hidden(&self, img: &ImageTensor) -> Result<Array2<f64>> {
        let x = self.embed(&patchify(img, self.patch)?)?;
        Ok(self.stack.forward(&x, None)?.0)
    }

    pub fn forward(
        &self,
        img: &ImageTensor,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(ModelOutput, ImageCache)> {
        let patches = patchify(img, self.patch)?;
        let x = self.embed(&patches)?;
        let (hidden, stack) = self.stack.forward(&x, None)?;
        let f = pool(&hidden, Pooling::Cls);
        let (p, head) = self.head.forward(&f, dropout_rng)?;
        Ok((
            ModelOutput { p, f },
            ImageCache {
                patches,
                stack,
                hidden_rows: hidden.nrows(),
                head,
            },
        ))
    }

    pub fn backward(
        &self,
        cache: &ImageCache,
        dp: &Array1<f64>,
        df: Option<&Array1<f64>>,
        grad: &mut ImageEncoder,
    ) {
        let mut dfeat = self.head.backward(&cache.head, dp, &mut grad.head);
        if let Some(extra) = df {
            dfeat += extra;
        }
        let dhidden = unpool(&dfeat, cache.hidden_rows, Pooling::Cls);
        let dx = self
            .stack
            .backward(&cache.stack, None, &dhidden, &mut grad.stack);
        grad.cls += &dx.row(0);
        let dtokens = dx.slice(s![1.., ..]).to_owned();
        self.projection
            .backward(&cache.patches, &dtokens, &mut grad.projection);
    }
}

impl Parameters for ImageEncoder {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.projection.visit(&join(prefix, "projection"), f);
        visit1(prefix, "cls", &self.cls, f);
        self.stack.visit(&join(prefix, "stack"), f);
        self.head.visit(&join(prefix, "head"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.projection.visit_mut(&join(prefix, "projection"), f);
        visit1_mut(prefix, "cls", &mut self.cls, f);
        self.stack.visit_mut(&join(prefix, "stack"), f);
        self.head.visit_mut(&join(prefix, "head"), f);
    }
}
