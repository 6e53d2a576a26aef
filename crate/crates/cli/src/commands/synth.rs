use std::collections::HashMap;

use agingrates_core::ingest::io::{write_demographics, write_observations, write_specs};
use agingrates_core::io::{write_costs, write_cross_section, write_outcomes, write_person_outcomes, write_true_rates};
use agingrates_core::synth::{generate, raw_labs, synth_events, PlantConfig, RawConfig};
use agingrates_core::SynthConfig;
use serde::{Deserialize, Serialize};

use super::{to_bytes, Ctx};
use crate::error::{invalid, CliResult};
use crate::manifest::Outputs;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    #[arg(long)]
    pub n_persons: Option<usize>,
    #[arg(long)]
    pub n_dims: Option<usize>,
    #[arg(long)]
    pub n_features: Option<usize>,
    #[arg(long)]
    pub frac_monotone: Option<f64>,
    #[arg(long)]
    pub age_min: Option<f64>,
    #[arg(long)]
    pub age_max: Option<f64>,
    #[arg(long)]
    pub noise_std: Option<f64>,
    #[arg(long)]
    pub rate_log_std: Option<f64>,
    /// Dimension (1-based) carrying the planted outcome and cost effect.
    #[arg(long)]
    pub effect_dim: Option<usize>,
    /// Log-odds per SD of the effect dimension.
    #[arg(long)]
    pub strength: Option<f64>,
    #[arg(long)]
    pub base_rate: Option<f64>,
    #[arg(long)]
    pub cost_scale: Option<f64>,
    /// Also write a raw lab feed (observations, specs, demographics).
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub raw: bool,
    #[arg(long)]
    pub outlier_rate: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub n_persons: usize,
    pub n_dims: usize,
    pub n_features: usize,
    pub frac_monotone: f64,
    pub age_min: f64,
    pub age_max: f64,
    pub noise_std: f64,
    pub rate_log_std: f64,
    pub effect_dim: usize,
    pub strength: f64,
    pub base_rate: f64,
    pub cost_scale: f64,
    pub raw: bool,
    pub outlier_rate: f64,
}

impl Default for Settings {
    fn default() -> Self {
        let c = SynthConfig::default();
        let p = PlantConfig::default();
        Settings {
            n_persons: c.n_persons,
            n_dims: c.n_dims,
            n_features: c.n_features,
            frac_monotone: c.frac_monotone,
            age_min: c.age_range.0,
            age_max: c.age_range.1,
            noise_std: c.noise_std,
            rate_log_std: c.rate_log_std,
            effect_dim: p.effect_dim + 1,
            strength: p.strength,
            base_rate: p.base_rate,
            cost_scale: p.cost_scale,
            raw: false,
            outlier_rate: RawConfig::default().outlier_rate,
        }
    }
}

pub fn run(ctx: &mut Ctx, args: &Args) -> CliResult<Outputs> {
    let s: Settings = ctx.settings(args)?;
    if s.effect_dim == 0 || s.effect_dim > s.n_dims {
        return Err(invalid(format!("effect_dim must lie in 1..={}", s.n_dims)));
    }
    if !(s.base_rate > 0.0 && s.base_rate < 1.0) {
        return Err(invalid("base_rate must lie in (0, 1)"));
    }
    let cfg = SynthConfig {
        n_persons: s.n_persons,
        n_dims: s.n_dims,
        n_features: s.n_features,
        frac_monotone: s.frac_monotone,
        age_range: (s.age_min, s.age_max),
        noise_std: s.noise_std,
        rate_log_std: s.rate_log_std,
        seed: ctx.seed,
    };
    let plant = PlantConfig {
        effect_dim: s.effect_dim - 1,
        strength: s.strength,
        base_rate: s.base_rate,
        cost_scale: s.cost_scale,
        seed: ctx.seed,
        ..PlantConfig::default()
    };
    let cohort = generate(&cfg)?;
    let events = synth_events(&cohort, &plant)?;
    let cs = &cohort.cross_section;

    let mut out = Outputs::default();
    out.add("cross_section.csv", to_bytes(|w| write_cross_section(w, cs))?);
    out.add("true_rates.csv", to_bytes(|w| write_true_rates(w, &cs.person_ids, &cohort.true_rates))?);
    out.add_json("generator.json", &cohort.generator)?;
    out.add(
        "outcomes.csv",
        to_bytes(|w| write_person_outcomes(w, &cs.person_ids, &events.planted.outcome, &events.planted.cost))?,
    );
    out.add("diagnoses.csv", to_bytes(|w| write_outcomes(w, &events.diagnoses))?);
    out.add("costs.csv", to_bytes(|w| write_costs(w, &events.costs))?);
    if s.raw {
        if !(0.0..=1.0).contains(&s.outlier_rate) {
            return Err(invalid("outlier_rate must lie in [0, 1]"));
        }
        let raw = raw_labs(
            &cohort,
            &RawConfig {
                outlier_rate: s.outlier_rate,
                seed: ctx.seed,
                ..RawConfig::default()
            },
        )?;
        let units: HashMap<String, String> =
            raw.specs.iter().map(|s| (s.component_id.clone(), s.unit.clone())).collect();
        out.add("observations.csv", to_bytes(|w| write_observations(w, &raw.observations, &units))?);
        out.add("specs.csv", to_bytes(|w| write_specs(w, &raw.specs))?);
        out.add("demographics.csv", to_bytes(|w| write_demographics(w, &raw.demographics))?);
    }
    Ok(out)
}
