use std::path::{Path, PathBuf};

use agingrates_core::select::{
    run_grid, select_candidates, write_summary, Candidates, GridOptions, GridResult, SearchSpace, DEFAULT_DELTA,
};
use serde::{Deserialize, Serialize};

use super::train::split;
use super::{required, to_bytes, Ctx};
use crate::error::{invalid, CliResult};
use crate::manifest::Outputs;

pub const LEDGER_DIR: &str = "ledger";

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Cross-section CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub val_frac: Option<f64>,
    /// Search space as TOML or JSON.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Built-in search space: set_one or set_two.
    #[arg(long)]
    pub preset: Option<String>,
    /// Training seeds per configuration, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub recon_min: Option<f64>,
    #[arg(long)]
    pub per_dim: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub data: Option<PathBuf>,
    pub val_frac: f64,
    pub grid: Option<PathBuf>,
    pub preset: Option<String>,
    pub seeds: Vec<u64>,
    pub delta: f64,
    pub workers: usize,
    pub recon_min: f64,
    pub per_dim: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            data: None,
            val_frac: 0.2,
            grid: None,
            preset: None,
            seeds: vec![1, 2, 3],
            delta: DEFAULT_DELTA,
            workers: 1,
            recon_min: 0.85,
            per_dim: 3,
        }
    }
}

/// Candidate list as written to `candidates.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct CandidateDoc {
    pub recon_min: f64,
    pub per_dim: usize,
    pub selected: Vec<GridResult>,
    pub warnings: Vec<String>,
}

pub fn candidate_outputs(results: &[GridResult], recon_min: f64, per_dim: usize, out: &mut Outputs) -> CliResult<()> {
    let Candidates { selected, warnings } = select_candidates(results, recon_min, per_dim)?;
    for w in &warnings {
        out.warn(w.clone());
    }
    out.add("summary.csv", to_bytes(|w| write_summary(w, results))?);
    out.add_json(
        "candidates.json",
        &CandidateDoc {
            recon_min,
            per_dim,
            selected,
            warnings,
        },
    )
}

fn parse_space(path: &Path, bytes: &[u8]) -> CliResult<SearchSpace> {
    let text = std::str::from_utf8(bytes).map_err(|_| invalid(format!("{} is not UTF-8", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(text).map_err(|e| e.to_string())
    } else {
        toml::from_str(text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| invalid(format!("grid {}: {e}", path.display())))
}

pub fn run(ctx: &mut Ctx, args: &Args) -> CliResult<Outputs> {
    let s: Settings = ctx.settings(args)?;
    let space = match (&s.grid, s.preset.as_deref()) {
        (Some(_), Some(_)) => return Err(invalid("give either --grid or --preset, not both")),
        (Some(path), None) => {
            let bytes = ctx.read(path)?;
            parse_space(path, &bytes)?
        }
        (None, Some("set_one")) => SearchSpace::set_one(),
        (None, Some("set_two")) => SearchSpace::set_two(),
        (None, Some(other)) => return Err(invalid(format!("unknown preset `{other}`"))),
        (None, None) => return Err(invalid("missing required --grid or --preset")),
    };
    if !(s.delta > 0.0 && s.delta <= 1.0) {
        return Err(invalid("delta must lie in (0, 1]"));
    }
    let cs = ctx.read_cross_section(required(&s.data, "data")?)?;
    let (train_cs, val_cs) = split(&cs, s.val_frac, ctx.seed)?;
    let ledger = ctx.out.join(LEDGER_DIR);
    let results = run_grid(
        &space,
        &train_cs,
        &val_cs,
        &GridOptions {
            seeds: s.seeds.clone(),
            delta: s.delta,
            workers: s.workers,
            ledger: Some(ledger),
        },
    )?;

    let mut out = Outputs::default();
    for r in &results {
        if let Some(e) = &r.error {
            out.warn(format!("configuration {} failed: {e}", r.hash));
        }
        out.external.push(format!("{LEDGER_DIR}/{}.json", r.hash));
    }
    out.external.sort();
    out.external.dedup();
    candidate_outputs(&results, s.recon_min, s.per_dim, &mut out)?;
    Ok(out)
}
