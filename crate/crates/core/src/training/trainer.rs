use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adamw::AdamW;
use super::early_stop::{EarlyStopping, EpochRecord};
use super::loss::{LossWeights, Objective, Setup};
use super::schedule::LrSchedule;
use crate::ensemble::{binary_f1_scores, f1_scores, threshold};
use crate::error::{Error, Result};
use crate::fusion::{FusionCache, FusionInput, FusionModel};
use crate::graph::DocAdjacency;
use crate::nn::{
    Checkpoint, ClassifierHead, HeadCache, ImageCache, ImageEncoder, ModelOutput, Parameters,
    ParametersExt, TextCache, TextEncoder,
};
use crate::preprocess::{ImageTensor, LabelVector, TokenIdSequence};

/// A model the training loop can drive: forward to probabilities and
/// features, backward from `dL/dp` into a gradient container of the same
/// shape.
pub trait Trainable: Parameters + Clone + Send + Sync {
    type Input: Sync;
    type Cache;

    fn forward(
        &self,
        input: &Self::Input,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(ModelOutput, Self::Cache)>;

    fn backward(&self, cache: &Self::Cache, dp: &Array1<f64>, grad: &mut Self);
}

/// Encoded text with its document adjacency (GCAN only).
#[derive(Debug, Clone, PartialEq)]
pub struct TextInput {
    pub seq: TokenIdSequence,
    pub adjacency: Option<DocAdjacency>,
}

impl Trainable for TextEncoder {
    type Input = TextInput;
    type Cache = TextCache;

    fn forward(&self, x: &TextInput, rng: Option<&mut ChaCha8Rng>) -> Result<(ModelOutput, TextCache)> {
        TextEncoder::forward(self, &x.seq, x.adjacency.as_ref(), rng)
    }

    fn backward(&self, cache: &TextCache, dp: &Array1<f64>, grad: &mut Self) {
        TextEncoder::backward(self, cache, dp, None, grad)
    }
}

impl Trainable for ImageEncoder {
    type Input = ImageTensor;
    type Cache = ImageCache;

    fn forward(&self, x: &ImageTensor, rng: Option<&mut ChaCha8Rng>) -> Result<(ModelOutput, ImageCache)> {
        ImageEncoder::forward(self, x, rng)
    }

    fn backward(&self, cache: &ImageCache, dp: &Array1<f64>, grad: &mut Self) {
        ImageEncoder::backward(self, cache, dp, None, grad)
    }
}

impl Trainable for FusionModel {
    type Input = FusionInput;
    type Cache = FusionCache;

    fn forward(&self, x: &FusionInput, rng: Option<&mut ChaCha8Rng>) -> Result<(ModelOutput, FusionCache)> {
        FusionModel::forward(self, x, rng)
    }

    fn backward(&self, cache: &FusionCache, dp: &Array1<f64>, grad: &mut Self) {
        FusionModel::backward(self, cache, dp, grad)
    }
}

impl Trainable for ClassifierHead {
    type Input = Array1<f64>;
    type Cache = HeadCache;

    fn forward(&self, x: &Array1<f64>, rng: Option<&mut ChaCha8Rng>) -> Result<(ModelOutput, HeadCache)> {
        let (p, cache) = ClassifierHead::forward(self, x, rng)?;
        Ok((ModelOutput { p, f: x.clone() }, cache))
    }

    fn backward(&self, cache: &HeadCache, dp: &Array1<f64>, grad: &mut Self) {
        ClassifierHead::backward(self, cache, dp, grad);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub setup: Setup,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub warmup_epochs: usize,
    pub dropout: f64,
    pub patience: usize,
    pub mix: (f64, f64),
    pub weight_decay: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn unimodal(setup: Setup) -> Self {
        TrainConfig {
            setup,
            epochs: 50,
            batch_size: 16,
            lr: 2e-5,
            warmup_epochs: 4,
            dropout: 0.5,
            patience: 4,
            mix: (0.7, 0.3),
            weight_decay: 0.01,
            seed: 0,
        }
    }

    pub fn fusion(setup: Setup) -> Self {
        TrainConfig {
            batch_size: 32,
            lr: 5e-6,
            ..TrainConfig::unimodal(setup)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.epochs > 0
            && self.batch_size > 0
            && self.lr > 0.0
            && self.patience > 0
            && self.mix.0 >= 0.0
            && self.mix.1 >= 0.0
            && self.weight_decay >= 0.0;
        if !positive {
            return Err(Error::invalid(format!("training configuration out of range: {self:?}")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} must lie in [0, 1)", self.dropout)));
        }
        if self.warmup_epochs >= self.epochs {
            return Err(Error::invalid("warm-up must be shorter than training"));
        }
        Ok(())
    }
}

/// Inputs and labels of one fold: the training part and the inner
/// validation part used for early stopping.
pub struct FoldData<'a, I> {
    pub fold: usize,
    pub train: Vec<(&'a I, LabelVector)>,
    pub val: Vec<(&'a I, LabelVector)>,
}

/// Everything one fold produces.
#[derive(Debug, Clone)]
pub struct FoldOutcome<M> {
    pub fold: usize,
    /// Model loaded with the averaged checkpoint.
    pub model: M,
    pub checkpoint: Checkpoint,
    pub records: Vec<EpochRecord>,
    pub best_f1: f64,
}

/// Validation F1 for the setup: two-class macro F1 on the binary label
/// for A, support-weighted F1 over the four sub-labels for B.
pub fn validation_f1(setup: Setup, probs: &[Array1<f64>], labels: &[LabelVector]) -> Result<f64> {
    match setup {
        Setup::A => {
            let p: Vec<f64> = probs.iter().map(|r| r[0]).collect();
            let truth: Vec<bool> = labels.iter().map(|l| l.mis).collect();
            Ok(binary_f1_scores(&threshold(&p), &truth)?.macro_f1)
        }
        Setup::B => {
            let pred: Vec<Vec<bool>> = probs
                .iter()
                .map(|r| threshold(r.as_slice().expect("contiguous probabilities")))
                .collect();
            let truth: Vec<Vec<bool>> = labels.iter().map(|l| l.sub_labels().to_vec()).collect();
            Ok(f1_scores(&pred, &truth)?.weighted_f1)
        }
    }
}

/// Evaluation-mode outputs for every input, computed in parallel.
pub fn predict<M: Trainable>(model: &M, inputs: &[&M::Input]) -> Result<Vec<ModelOutput>> {
    inputs
        .par_iter()
        .map(|x| model.forward(x, None).map(|(o, _)| o))
        .collect()
}

/// Trains one fold with seeded shuffling and dropout, early stopping on
/// validation F1 and top-2 checkpoint averaging.
pub fn train_fold<M: Trainable>(
    mut model: M,
    data: &FoldData<'_, M::Input>,
    cfg: &TrainConfig,
) -> Result<FoldOutcome<M>> {
    cfg.validate()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::Empty("fold has no training or validation samples"));
    }
    let weights = match cfg.setup {
        Setup::A => LossWeights::UNIFORM,
        Setup::B => {
            let labels: Vec<LabelVector> = data.train.iter().map(|(_, l)| *l).collect();
            LossWeights::from_labels(&labels)?
        }
    };
    let objective = Objective {
        setup: cfg.setup,
        weights,
        mix: cfg.mix,
    };
    let steps_per_epoch = data.train.len().div_ceil(cfg.batch_size);
    let schedule = LrSchedule::new(cfg.lr, cfg.warmup_epochs, cfg.epochs, steps_per_epoch)?;
    let mut optimizer = AdamW::new(model.num_params(), cfg.weight_decay);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_d80f);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut records = Vec::new();
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let val_inputs: Vec<&M::Input> = data.val.iter().map(|(x, _)| *x).collect();
    let val_labels: Vec<LabelVector> = data.val.iter().map(|(_, l)| *l).collect();
    let mut step = 0usize;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut lr = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut outputs = Vec::with_capacity(batch.len());
            let mut caches = Vec::with_capacity(batch.len());
            let mut labels = Vec::with_capacity(batch.len());
            for &i in batch {
                let (x, label) = &data.train[i];
                let (out, cache) = model.forward(x, Some(&mut dropout_rng))?;
                outputs.push(out.p);
                caches.push(cache);
                labels.push(*label);
            }
            let (loss, dps) = objective.evaluate(&outputs, &labels);
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss in fold {} epoch {epoch}",
                    data.fold
                )));
            }
            loss_sum += loss * batch.len() as f64;
            let mut grad = model.zeros_like();
            for (cache, dp) in caches.iter().zip(&dps) {
                model.backward(cache, dp, &mut grad);
            }
            step += 1;
            lr = schedule.lr_at(step);
            let mut flat = model.to_flat();
            optimizer.step(&mut flat, &grad.to_flat(), lr)?;
            model.set_flat(&flat);
        }
        let val_probs: Vec<Array1<f64>> = predict(&model, &val_inputs)?
            .into_iter()
            .map(|o| o.p)
            .collect();
        let val_f1 = validation_f1(cfg.setup, &val_probs, &val_labels)?;
        records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / data.train.len() as f64,
            val_f1,
            lr,
        });
        if stopper.observe(epoch, val_f1, Checkpoint::from_params(&model)) {
            break;
        }
    }

    let checkpoint = stopper.final_checkpoint()?;
    checkpoint.load_into(&mut model)?;
    Ok(FoldOutcome {
        fold: data.fold,
        model,
        checkpoint,
        records,
        best_f1: stopper.best_f1().unwrap_or(0.0),
    })
}

/// Header of the per-epoch training log.
pub const LOG_HEADER: &str = "fold\tepoch\ttrain_loss\tval_f1\tlr";

/// Tab-separated log lines of one fold, without the header.
pub fn format_log(fold: usize, records: &[EpochRecord]) -> String {
    records
        .iter()
        .map(|r| {
            format!(
                "{fold}\t{}\t{:.6}\t{:.6}\t{:.6e}\n",
                r.epoch, r.train_loss, r.val_f1, r.lr
            )
        })
        .collect()
}
