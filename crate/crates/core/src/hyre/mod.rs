//! Test-time hypothesis reweighting: belief state, per-point losses, the
//! generalized Bayesian update, and weighted prediction.

mod belief;
mod loss;
mod predict;

pub use belief::{generalized_update, softmax, BeliefState};
pub use loss::{
    cumulative_head_losses, per_point_losses, point_loss, Outcome, PointLoss, Prediction, TiePolicy,
};
pub use predict::{
    argmin_first, best_head, best_head_from_outputs, weighted_combine, weighted_predict, Combine,
};
