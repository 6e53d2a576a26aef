//! Variational autoencoder for latent aging rates.
//!
//! Each person's features `x` at scaled age `t` are modelled as
//! `x = f(r * t) + noise`, with `r = exp(sigma_r * z)` and `z ~ N(0, I)`.
//! The encoder maps `(x, t)` to a Gaussian posterior over `z`. The decoder
//! has two paths: features that trend with age go through a constrained
//! signed-power basis with nonnegative coefficients (monotone in `t` for
//! any fixed `r`); the rest go through a small ReLU network.

mod adam;
mod infer;
mod model;
mod monotone;
mod objective;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Scaler;
use crate::matrix::Matrix;

pub use adam::Adam;
pub use infer::{infer_rates, reconstruct, sample_rates, RateMatrix};
pub use model::{softplus, Dense, LossBreakdown, ModelParams, Prepared, Workspace};
pub use monotone::{select_monotone, select_top_monotone, MonotoneSelection};
pub use objective::{gradients, loss, Batch};
pub use train::{init_model, train, EpochRecord, TrainFailure, Trained, TrainingLog};

/// Format tag written into serialized models.
pub const MODEL_FORMAT: &str = "agingrates-model";
pub const MODEL_VERSION: u32 = 1;

pub fn default_poly_degrees() -> Vec<f64> {
    vec![
        1.0 / 5.0,
        1.0 / 4.0,
        1.0 / 3.0,
        1.0 / 2.0,
        1.0,
        2.0,
        3.0,
        4.0,
        5.0,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Size of the rate vector.
    pub n_dims: usize,
    /// Prior standard deviation of `log r`.
    pub sigma_r: f64,
    /// Number of features routed through the monotone decoder path, picked
    /// by descending |Spearman correlation with age|.
    pub monotone_count: usize,
    pub poly_degrees: Vec<f64>,
    pub encoder_widths: Vec<usize>,
    pub decoder_widths: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop when validation loss has not improved for this many epochs.
    #[serde(default)]
    pub patience: Option<usize>,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_dims: 4,
            sigma_r: 0.1,
            monotone_count: 34,
            poly_degrees: default_poly_degrees(),
            encoder_widths: vec![64, 16],
            decoder_widths: vec![16, 64],
            learning_rate: 1e-4,
            batch_size: 4096,
            max_epochs: 300,
            patience: None,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(format!("model config: {m}")));
        if self.n_dims == 0 {
            return bad("n_dims must be >= 1".into());
        }
        if !(self.sigma_r > 0.0) {
            return bad("sigma_r must be positive".into());
        }
        if self.monotone_count > n_features {
            return bad(format!(
                "monotone_count {} exceeds {n_features} features",
                self.monotone_count
            ));
        }
        if self.poly_degrees.is_empty() || self.poly_degrees.iter().any(|s| !(*s > 0.0)) {
            return bad("polynomial degrees must be positive".into());
        }
        if self.encoder_widths.iter().chain(&self.decoder_widths).any(|w| *w == 0) {
            return bad("layer widths must be positive".into());
        }
        if !(self.learning_rate >= 0.0) || self.batch_size == 0 {
            return bad("learning rate must be >= 0 and batch size positive".into());
        }
        Ok(())
    }

    /// Same configuration with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        ModelConfig {
            seed,
            ..self.clone()
        }
    }
}

/// Which features take which decoder path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub component_ids: Vec<String>,
    /// Feature indices on the monotone path, in path order.
    pub monotone: Vec<usize>,
    /// +1 for features increasing with age, -1 for decreasing.
    pub signs: Vec<f64>,
    /// Feature indices on the network path.
    pub network: Vec<usize>,
}

impl FeatureLayout {
    pub fn n_features(&self) -> usize {
        self.component_ids.len()
    }
}

/// Affine standardization of scaled age used for network inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeNormalizer {
    pub center: f64,
    pub spread: f64,
}

impl AgeNormalizer {
    pub fn fit(t: &[f64]) -> Self {
        let center = crate::numeric::mean(t);
        let spread = crate::numeric::population_std(t);
        AgeNormalizer {
            center,
            spread: if spread > 0.0 { spread } else { 1.0 },
        }
    }

    #[inline]
    pub fn apply(&self, t: f64) -> f64 {
        (t - self.center) / self.spread
    }
}

/// A trained (or freshly initialized) aging model with everything needed
/// to score new raw cross-sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgingModel {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub layout: FeatureLayout,
    pub age_norm: AgeNormalizer,
    pub params: ModelParams,
    pub scaler: Scaler,
}

impl AgingModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: AgingModel = serde_json::from_str(text)?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model document {} v{}",
                model.format, model.version
            )));
        }
        model.params.check_shapes(&model.config, &model.layout)?;
        Ok(model)
    }

    /// Scales a raw cross-section with the stored training statistics.
    pub fn scale(&self, cs: &crate::ingest::CrossSection) -> Result<Matrix> {
        Ok(self.scaler.transform(cs)?.values)
    }
}
