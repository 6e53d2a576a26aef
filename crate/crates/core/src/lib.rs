//! Inference of multidimensional aging rates from cross-sectional
//! laboratory panels.
//!
//! * [`ingest`]: outlier fences, filtering, monthly aggregation and
//!   complete-case cross-sections.
//! * [`synth`]: synthetic cohorts with planted rates, outcomes and costs.
//! * [`vae`]: the aging-rate variational autoencoder, its gradients and
//!   training loop.
//! * [`select`]: reconstruction, intra-model and inter-model similarity
//!   metrics, the hyperparameter grid and candidate filtering.
//! * [`cohort`]: clustering, fast/slow ager groups, regression models and
//!   rank tests for downstream characterization.

pub mod cohort;
pub mod error;
pub mod ingest;
pub mod io;
pub mod matrix;
pub mod month;
pub mod numeric;
pub mod rng;
pub mod select;
pub mod synth;
pub mod vae;

pub use error::{Error, Result};
pub use ingest::{ComponentSpec, CrossSection, LabObservation, OutlierBounds, Scaler};
pub use matrix::Matrix;
pub use month::Month;
pub use synth::{SynthCohort, SynthConfig};
pub use vae::{AgingModel, ModelConfig, RateMatrix};

/// Chronological age in years mapped onto the model's time axis.
#[inline]
pub fn t_scaled(age_years: f64) -> f64 {
    age_years / 100.0
}
