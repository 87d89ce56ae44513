//! Query criteria and the budgeted adaptation loop.

mod adapt;
mod criteria;

pub use adapt::{
    adapt_on_outputs, run_adaptation, select_from_outputs, select_query, Adaptation, Pool,
    QueryCriterion, QueryLog, QueryRecord,
};
pub use criteria::{
    bald_scores, binary_entropy, entropy_scores, score_bald, score_entropy, score_variance,
    variance_scores,
};
pub(crate) use criteria::probabilities;
