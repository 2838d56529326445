//! The search loop, binarisation, retraining, overlap statistics and
//! metrics reporting.

mod config;
mod overlap;
mod report;
mod retrain;
mod search;

pub use config::SearchConfig;
pub use overlap::{lowest_scored, overlap, random_removal, removal_count};
pub use report::{to_json, write_json, EpochRecord, MetricsReport};
pub use retrain::{
    accuracy, arch_params, binarize_weights, layer_dims, retrain_and_eval, retrain_seeds, train_once, RetrainMetrics,
    RunMetrics,
};
pub use search::{run_search, search_only, SearchOutcome, SearchResult, SearchState};

pub use crate::sparsifier::binarize_structure;
