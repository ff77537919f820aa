//! Losses, the optimizer and its schedule, early stopping and the
//! per-fold training loop.

mod adamw;
mod early_stop;
mod loss;
mod schedule;
mod trainer;

pub use adamw::AdamW;
pub use early_stop::{EarlyStopping, EpochRecord};
pub use loss::{
    bce, class_weights, combined_loss, pseudo_mis, teacher_forcing_loss, weighted_bce,
    LossWeights, Objective, Setup, SUB_CLASSES,
};
pub use schedule::LrSchedule;
pub use trainer::{
    format_log, predict, train_fold, validation_f1, FoldData, FoldOutcome, TextInput, TrainConfig,
    Trainable, LOG_HEADER,
};
