//! Data sources: GP regression, synthetic classification tasks, tabular ingestion and
//! the OOD split.

mod dataset;
mod gp;
mod split;
mod synthetic;
mod table;

pub use dataset::{Dataset, Normalization, TaskKind, Targets};
pub use gp::{gp_posterior, sample_gp_dataset, sample_gp_posterior, sample_gp_prior, GpSample, GpSpec, MAX_JITTER};
pub use split::{fit_normalization, normalize, ood_split, OodSplit, SplitSpec, MIN_SPLIT_ROWS};
pub use synthetic::{
    bt_preference_prob, gen_conflicting_preferences, gen_hypercube_task, gen_hypercube_task_sized,
    uniform_box, ConflictingTask, HypercubeTask, LabelerBoundary, HYPERCUBE_DIM,
};
pub use table::{load_table, parse_table, ColumnRef, TableSchema};
