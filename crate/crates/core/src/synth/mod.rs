//! Synthetic cohorts with planted aging rates.
//!
//! Each person gets an age `t` (uniform over the configured range), a sex
//! bit and a log-normal rate vector `r` with median 1. Biological ages are
//! `a_k = r_k * t / 100`. Monotone features are signed power mixtures of
//! `a`; the remaining features are bounded smooth functions of `a` with no
//! net age trend (a zero-sum `tanh` contrast plus a centred quadratic).

mod events;
mod raw;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CrossSection, MIN_COHORT_AGE};
use crate::matrix::Matrix;
use crate::month::Month;
use crate::rng::{seeded, streams};

pub use events::{synth_events, SynthEvents, NULL_COST, NULL_OUTCOME, PLANTED_COST, PLANTED_OUTCOME};
pub use raw::{raw_labs, RawConfig, RawLabs};

const PERSON_BLOCK: usize = 4096;
const MONOTONE_POWERS: [f64; 4] = [0.5, 1.0, 1.5, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_persons: usize,
    /// True latent dimensionality.
    pub n_dims: usize,
    pub n_features: usize,
    /// Fraction of features generated as monotone functions of age.
    pub frac_monotone: f64,
    pub age_range: (f64, f64),
    pub noise_std: f64,
    /// Standard deviation of `log r`.
    pub rate_log_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_persons: 50_000,
            n_dims: 2,
            n_features: 12,
            frac_monotone: 0.5,
            age_range: (40.0, 90.0),
            noise_std: 0.1,
            rate_log_std: 0.1,
            seed: 20_160_101,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("synth config: {m}")));
        if self.n_persons == 0 || self.n_dims == 0 || self.n_features == 0 {
            return bad("counts must be positive");
        }
        if self.n_dims > self.n_features {
            return bad("n_dims must not exceed n_features");
        }
        if !(0.0..=1.0).contains(&self.frac_monotone) {
            return bad("frac_monotone must lie in [0, 1]");
        }
        let (lo, hi) = self.age_range;
        if !(lo >= MIN_COHORT_AGE && hi >= lo && hi.is_finite()) {
            return bad("age range must satisfy 40 <= low <= high");
        }
        if !(self.noise_std >= 0.0) || !(self.rate_log_std > 0.0) {
            return bad("noise_std must be >= 0 and rate_log_std > 0");
        }
        Ok(())
    }

    pub fn n_monotone(&self) -> usize {
        (self.frac_monotone * self.n_features as f64).round() as usize
    }
}

/// How one feature is computed from the biological ages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureGenerator {
    /// `offset + sign * sum_k weights[k] * a_k^power` with `weights >= 0`.
    Monotone {
        sign: f64,
        weights: Vec<f64>,
        power: f64,
        offset: f64,
    },
    /// `offset + amp * tanh(sum_k contrast[k] * u_k) + curvature * (sum_k mix[k] * u_k)^2`
    /// where `u_k = (a_k - center) / spread`.
    Smooth {
        contrast: Vec<f64>,
        mix: Vec<f64>,
        amp: f64,
        curvature: f64,
        center: f64,
        spread: f64,
        offset: f64,
    },
}

impl FeatureGenerator {
    pub fn is_monotone(&self) -> bool {
        matches!(self, FeatureGenerator::Monotone { .. })
    }

    pub fn eval(&self, bio_age: &[f64]) -> f64 {
        match self {
            FeatureGenerator::Monotone {
                sign,
                weights,
                power,
                offset,
            } => {
                offset
                    + sign
                        * weights
                            .iter()
                            .zip(bio_age)
                            .map(|(w, a)| w * a.signum() * a.abs().powf(*power))
                            .sum::<f64>()
            }
            FeatureGenerator::Smooth {
                contrast,
                mix,
                amp,
                curvature,
                center,
                spread,
                offset,
            } => {
                let u = bio_age.iter().map(|a| (a - center) / spread);
                let (c, q) = u
                    .zip(contrast.iter().zip(mix))
                    .fold((0.0, 0.0), |(c, q), (u, (ck, mk))| (c + ck * u, q + mk * u));
                offset + amp * c.tanh() + curvature * q * q
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub features: Vec<FeatureGenerator>,
}

impl GeneratorParams {
    /// Samples feature generators: the first `n_monotone` features are
    /// monotone, each loading mainly on dimension `j mod n_dims`.
    pub fn sample(cfg: &SynthConfig) -> Self {
        let mut rng = seeded(cfg.seed, streams::SYNTH_GENERATOR);
        let d = cfg.n_dims;
        let n_mono = cfg.n_monotone();
        let (lo, hi) = cfg.age_range;
        let center = (lo + hi) / 200.0;
        let spread = ((hi - lo) / 100.0 / 12f64.sqrt()).max(1e-3);
        let mut features = Vec::with_capacity(cfg.n_features);
        for j in 0..cfg.n_features {
            if j < n_mono {
                let primary = j % d;
                let weights = (0..d)
                    .map(|k| {
                        if k == primary {
                            rng.random_range(4.0..8.0)
                        } else {
                            rng.random_range(0.0..0.4)
                        }
                    })
                    .collect();
                features.push(FeatureGenerator::Monotone {
                    sign: if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                    weights,
                    power: MONOTONE_POWERS[rng.random_range(0..MONOTONE_POWERS.len())],
                    offset: rng.random_range(0.0..5.0),
                });
            } else {
                let mut contrast: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let m = contrast.iter().sum::<f64>() / d as f64;
                contrast.iter_mut().for_each(|c| *c -= m);
                let mix = (0..d)
                    .map(|_| rng.sample::<f64, _>(StandardNormal) / (d as f64).sqrt())
                    .collect();
                features.push(FeatureGenerator::Smooth {
                    contrast,
                    mix,
                    amp: rng.random_range(1.0..3.0),
                    curvature: rng.random_range(0.5..1.5),
                    center,
                    spread,
                    offset: rng.random_range(0.0..5.0),
                });
            }
        }
        GeneratorParams { features }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCohort {
    pub cross_section: CrossSection,
    /// `n_persons x n_dims`, strictly positive.
    pub true_rates: Matrix,
    pub generator: GeneratorParams,
    pub config: SynthConfig,
}

impl SynthCohort {
    /// Indices of the features generated as monotone.
    pub fn monotone_features(&self) -> Vec<usize> {
        self.generator
            .features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_monotone())
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCohort> {
    cfg.validate()?;
    generate_with(cfg, GeneratorParams::sample(cfg))
}

struct PersonDraw {
    age: f64,
    sex: u8,
    window: Month,
    rates: Vec<f64>,
    features: Vec<f64>,
}

/// Simulates persons under explicitly given feature generators.
pub fn generate_with(cfg: &SynthConfig, generator: GeneratorParams) -> Result<SynthCohort> {
    cfg.validate()?;
    if generator.features.len() != cfg.n_features {
        return Err(Error::ShapeMismatch {
            what: "feature generators",
            expected: cfg.n_features,
            found: generator.features.len(),
        });
    }
    let n_blocks = cfg.n_persons.div_ceil(PERSON_BLOCK);
    let first_month = Month::new(2016, 1).expect("valid month");
    let blocks: Vec<Vec<PersonDraw>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = seeded(cfg.seed, (streams::SYNTH_PERSONS << 32) | b as u64);
            let start = b * PERSON_BLOCK;
            let end = (start + PERSON_BLOCK).min(cfg.n_persons);
            (start..end)
                .map(|_| {
                    let (lo, hi) = cfg.age_range;
                    let age = if hi > lo { rng.random_range(lo..hi) } else { lo };
                    let sex = u8::from(rng.random_bool(0.5));
                    let window = first_month.offset(rng.random_range(0..48));
                    let rates: Vec<f64> = (0..cfg.n_dims)
                        .map(|_| (cfg.rate_log_std * rng.sample::<f64, _>(StandardNormal)).exp())
                        .collect();
                    let t = crate::t_scaled(age);
                    let bio: Vec<f64> = rates.iter().map(|r| r * t).collect();
                    let features = generator
                        .features
                        .iter()
                        .map(|f| {
                            let noise: f64 = StandardNormal.sample(&mut rng);
                            f.eval(&bio) + cfg.noise_std * noise
                        })
                        .collect();
                    PersonDraw {
                        age,
                        sex,
                        window,
                        rates,
                        features,
                    }
                })
                .collect()
        })
        .collect();

    let width = cfg.n_persons.to_string().len().max(6);
    let mut person_ids = Vec::with_capacity(cfg.n_persons);
    let mut values = Vec::with_capacity(cfg.n_persons * cfg.n_features);
    let mut rates = Vec::with_capacity(cfg.n_persons * cfg.n_dims);
    let (mut age, mut sex, mut window) = (Vec::new(), Vec::new(), Vec::new());
    for (i, p) in blocks.into_iter().flatten().enumerate() {
        person_ids.push(format!("P{i:0width$}"));
        values.extend(p.features);
        rates.extend(p.rates);
        age.push(p.age);
        sex.push(p.sex);
        window.push(p.window);
    }
    let component_ids = (0..cfg.n_features).map(|j| format!("f{:02}", j + 1)).collect();
    let cross_section = CrossSection::new(
        person_ids,
        component_ids,
        Matrix::from_vec(cfg.n_persons, cfg.n_features, values)?,
        age,
        sex,
        window,
    )?;
    Ok(SynthCohort {
        cross_section,
        true_rates: Matrix::from_vec(cfg.n_persons, cfg.n_dims, rates)?,
        generator,
        config: cfg.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    /// Dimension whose standardized true rate drives outcome and cost.
    pub effect_dim: usize,
    /// Log-odds change per standard deviation of the effect dimension.
    pub strength: f64,
    pub base_rate: f64,
    pub cost_location: f64,
    pub cost_scale: f64,
    pub cost_noise_std: f64,
    pub seed: u64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            effect_dim: 0,
            strength: 1.0,
            base_rate: 0.2,
            cost_location: 8.0,
            cost_scale: 0.5,
            cost_noise_std: 1.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedOutcomes {
    pub outcome: Vec<bool>,
    pub cost: Vec<f64>,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Binary outcomes with `P(y=1) = logistic(logit(base_rate) + strength * z)`
/// and log-normal costs `exp(location + scale * z + noise)`, where `z` is
/// the standardized true rate on `effect_dim`.
pub fn plant_outcomes(true_rates: &Matrix, cfg: &PlantConfig) -> Result<PlantedOutcomes> {
    if cfg.effect_dim >= true_rates.cols() {
        return Err(Error::InvalidInput(format!(
            "effect dimension {} out of range for {} dimensions",
            cfg.effect_dim,
            true_rates.cols()
        )));
    }
    if !(cfg.base_rate > 0.0 && cfg.base_rate < 1.0) {
        return Err(Error::InvalidInput("base_rate must lie in (0, 1)".into()));
    }
    if !(cfg.cost_noise_std >= 0.0) {
        return Err(Error::InvalidInput("cost noise must be nonnegative".into()));
    }
    let col = true_rates.column(cfg.effect_dim);
    let mean = crate::numeric::mean(&col);
    let sd = crate::numeric::population_std(&col);
    let mut rng = seeded(cfg.seed, streams::OUTCOMES);
    let mut outcome = Vec::with_capacity(col.len());
    let mut cost = Vec::with_capacity(col.len());
    for r in col {
        let z = if sd > 0.0 { (r - mean) / sd } else { 0.0 };
        let p = logistic(logit(cfg.base_rate) + cfg.strength * z);
        let u: f64 = rng.random();
        let noise: f64 = rng.sample(StandardNormal);
        outcome.push(u < p);
        cost.push((cfg.cost_location + cfg.cost_scale * z + cfg.cost_noise_std * noise).exp());
    }
    Ok(PlantedOutcomes { outcome, cost })
}
