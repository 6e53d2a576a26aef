use std::collections::HashMap;
use std::path::PathBuf;

use agingrates_core::ingest::io::{read_demographics, read_observations, read_specs};
use agingrates_core::ingest::{self, FenceConfig};
use agingrates_core::io::write_cross_section;
use serde::{Deserialize, Serialize};

use super::{required, to_bytes, Ctx};
use crate::error::{invalid, CliResult};
use crate::manifest::Outputs;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Lab observations CSV: person_id,component_id,value,unit,date.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Component specs CSV.
    #[arg(long)]
    pub specs: Option<PathBuf>,
    /// Demographics CSV: person_id,birth_date,sex.
    #[arg(long)]
    pub demographics: Option<PathBuf>,
    /// Components to keep, comma separated (default: every spec).
    #[arg(long, value_delimiter = ',')]
    pub components: Option<Vec<String>>,
    #[arg(long)]
    pub k_global: Option<f64>,
    #[arg(long)]
    pub k_range: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub input: Option<PathBuf>,
    pub specs: Option<PathBuf>,
    pub demographics: Option<PathBuf>,
    pub components: Option<Vec<String>>,
    pub k_global: f64,
    pub k_range: f64,
}

impl Default for Settings {
    fn default() -> Self {
        let fence = FenceConfig::default();
        Settings {
            input: None,
            specs: None,
            demographics: None,
            components: None,
            k_global: fence.k_global,
            k_range: fence.k_range,
        }
    }
}

pub fn run(ctx: &mut Ctx, args: &Args) -> CliResult<Outputs> {
    let s: Settings = ctx.settings(args)?;
    if !(s.k_global > 0.0 && s.k_range > 0.0) {
        return Err(invalid("fence multipliers must be positive"));
    }
    let specs = read_specs(ctx.read(required(&s.specs, "specs")?)?.as_slice())?;
    let spec_map: HashMap<_, _> = specs.iter().map(|s| (s.component_id.clone(), s.clone())).collect();
    let obs = read_observations(ctx.read(required(&s.input, "input")?)?.as_slice(), &spec_map)?;
    let demo = read_demographics(ctx.read(required(&s.demographics, "demographics")?)?.as_slice())?;
    let components = s
        .components
        .clone()
        .unwrap_or_else(|| specs.iter().map(|s| s.component_id.clone()).collect());
    let fence = FenceConfig {
        k_global: s.k_global,
        k_range: s.k_range,
    };
    let cleaned = ingest::clean(&obs, &specs, &components, &demo, fence)?;

    let mut out = Outputs::default();
    out.add("cross_section.csv", to_bytes(|w| write_cross_section(w, &cleaned.cross_section))?);
    out.add_json("scaler.json", &cleaned.scaler)?;
    out.add_json("bounds.json", &cleaned.report)?;
    Ok(out)
}
