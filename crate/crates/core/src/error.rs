use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("unknown component `{0}`")]
    UnknownComponent(String),

    #[error("cohort is empty: {0}")]
    EmptyCohort(String),

    #[error("zero variance in component(s): {}", .0.join(", "))]
    ZeroVariance(Vec<String>),

    #[error("constant input: {0}")]
    ConstantInput(String),

    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite loss at batch {batch}")]
    NonFiniteLoss { batch: usize },

    #[error("training diverged at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("need at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("design matrix is rank deficient; dependent columns: {0:?}")]
    RankDeficient(Vec<usize>),

    #[error("perfect separation detected on column {column} (|coefficient| = {magnitude:.2})")]
    PerfectSeparation { column: String, magnitude: f64 },

    #[error("statistic undefined: {0}")]
    Undefined(String),

    #[error("group `{group}` is empty after exclusions ({excluded} excluded)")]
    EmptyGroup { group: String, excluded: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Validation failures are the caller's fault; everything else is a
    /// runtime failure. The CLI maps these onto distinct exit codes.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NonFiniteLoss { .. } | Error::Diverged { .. } | Error::Io(_)
        )
    }
}
