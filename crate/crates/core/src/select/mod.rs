//! Model-selection metrics and the hyperparameter sweep.
//!
//! A model is scored by three numbers: how well it reconstructs held-out
//! data (flattened Pearson correlation), how much its rate dimensions
//! overlap in the features they correlate with (intra-model similarity,
//! lower is better), and how reproducible those feature sets are across
//! training seeds (inter-model similarity, higher is better).

mod candidates;
mod grid;
mod similarity;

pub use candidates::{select_candidates, Candidates};
pub use grid::{
    config_hash, enumerate_configs, Architecture, load_ledger, run_grid, write_summary, GridOptions, GridResult,
    GridStatus, SearchSpace,
};
pub use similarity::{
    binarize, feature_rate_correlations, inter_model_similarity, inter_model_similarity_of,
    intra_model_similarity, pairwise_dim_similarity, per_feature_reconstruction,
    reconstruction_correlation, BinaryMatrix, CorrelationMatrix, PairScore, SimilarityReport,
};

/// Threshold used when characterizing dimensions.
pub const DEFAULT_DELTA: f64 = 0.35;
