use crate::error::{Error, Result};

/// Linear warm-up from 0 to `base_lr`, then linear decay back to 0 at the
/// last optimizer step. Steps are optimizer updates, not epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl LrSchedule {
    pub fn new(base_lr: f64, warmup_epochs: usize, epochs: usize, steps_per_epoch: usize) -> Result<Self> {
        if warmup_epochs >= epochs || steps_per_epoch == 0 {
            return Err(Error::invalid(format!(
                "warm-up ({warmup_epochs} epochs) must be shorter than training ({epochs} epochs)"
            )));
        }
        Ok(LrSchedule {
            base_lr,
            warmup_steps: warmup_epochs * steps_per_epoch,
            total_steps: epochs * steps_per_epoch,
        })
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        if step <= self.warmup_steps {
            if self.warmup_steps == 0 {
                return self.base_lr;
            }
            self.base_lr * step as f64 / self.warmup_steps as f64
        } else if step >= self.total_steps {
            0.0
        } else {
            self.base_lr * (self.total_steps - step) as f64
                / (self.total_steps - self.warmup_steps) as f64
        }
    }
}
