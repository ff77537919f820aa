//! Metrics, fold splitting, soft and hard voting, and the rank test used
//! to compare models.

mod metrics;
mod significance;
mod split;
mod voting;

pub use metrics::{binary_f1_scores, f1_binary, f1_scores, threshold, F1Scores};
pub use significance::{
    mann_whitney_exact, mann_whitney_normal, mann_whitney_u, stars, MannWhitney, UMethod,
    EXACT_LIMIT,
};
pub use split::kfold_split;
pub use voting::{
    derive_task_a_label, derive_task_a_prob, fold_weights, hard_vote, soft_vote,
    EnsemblePrediction, FoldRun,
};
