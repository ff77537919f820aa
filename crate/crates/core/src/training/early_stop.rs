use crate::error::{Error, Result};
use crate::nn::{average_checkpoints, Checkpoint};

/// Validation result of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch index.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f1: f64,
    pub lr: f64,
}

/// Patience counter plus the two best checkpoints seen so far.
///
/// An epoch counts as an improvement only if its F1 is strictly greater
/// than the best so far. Among equal F1 values the earlier epoch ranks
/// higher.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    stale: usize,
    top: Vec<(f64, usize, Checkpoint)>,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            stale: 0,
            top: Vec::with_capacity(3),
        }
    }

    pub fn best_f1(&self) -> Option<f64> {
        self.best
    }

    /// Registers an epoch; returns `true` when training should stop.
    pub fn observe(&mut self, epoch: usize, f1: f64, checkpoint: Checkpoint) -> bool {
        match self.best {
            Some(b) if f1 <= b => self.stale += 1,
            _ => {
                self.best = Some(f1);
                self.stale = 0;
            }
        }
        let pos = self
            .top
            .iter()
            .position(|(f, e, _)| f1 > *f || (f1 == *f && epoch < *e))
            .unwrap_or(self.top.len());
        self.top.insert(pos, (f1, epoch, checkpoint));
        self.top.truncate(2);
        self.stale >= self.patience
    }

    /// Epochs of the retained checkpoints, best first.
    pub fn top_epochs(&self) -> Vec<usize> {
        self.top.iter().map(|(_, e, _)| *e).collect()
    }

    /// Mean of the two best checkpoints, or the single one if only one
    /// epoch ran.
    pub fn final_checkpoint(&self) -> Result<Checkpoint> {
        match self.top.as_slice() {
            [] => Err(Error::Empty("no epoch was recorded")),
            [(_, _, only)] => Ok(only.clone()),
            [(_, _, a), (_, _, b), ..] => average_checkpoints(a, b),
        }
    }
}
