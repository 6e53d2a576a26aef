//! Downstream analyses of inferred aging rates: clustering, fast/slow ager
//! groups, outcome associations and cost comparisons.

mod associate;
mod costs;
mod groups;
mod kmeans;
mod ranktests;
mod regression;

pub use associate::{associate_outcome, dimension_ols, AssociationResult, Covariates, DimensionOls, Exposure, OutcomeEvent};
pub use costs::{cost_compare, cumulative_costs, CostMode, CostRecord, CostReport, GroupSummary, TestRow, ALPHA};
pub use groups::{ager_groups, jaccard, AgerGroups};
pub use kmeans::{choose_k, elbow_by_curvature, hartigan, kmeans_fit, lloyd, silhouette, ClusterModel, KDiagnostic, DEFAULT_RESTARTS};
pub use ranktests::{
    conover_posthoc, holm, kruskal_wallis, mann_whitney, mann_whitney_with, Alternative, ConoverPair, MwMethod,
    MwOptions, TestKind, TestResult, EXACT_MAX_TOTAL, EXACT_MIN_CUTOVER,
};
pub use regression::{logistic_fit, ols_fit, Design, LogisticFit, OlsFit, GRADIENT_TOL, SEPARATION_LIMIT};

/// Default cluster count.
pub const DEFAULT_K: usize = 4;
