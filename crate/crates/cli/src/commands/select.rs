use std::path::PathBuf;

use agingrates_core::select::GridResult;
use serde::{Deserialize, Serialize};

use super::tune::candidate_outputs;
use super::{required, Ctx};
use crate::error::{invalid, CliResult};
use crate::manifest::Outputs;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Ledger directory written by `tune`.
    #[arg(long)]
    pub ledger: Option<PathBuf>,
    #[arg(long)]
    pub recon_min: Option<f64>,
    #[arg(long)]
    pub per_dim: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub ledger: Option<PathBuf>,
    pub recon_min: f64,
    pub per_dim: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            ledger: None,
            recon_min: 0.85,
            per_dim: 3,
        }
    }
}

pub fn run(ctx: &mut Ctx, args: &Args) -> CliResult<Outputs> {
    let s: Settings = ctx.settings(args)?;
    let dir = required(&s.ledger, "ledger")?;
    let entries = std::fs::read_dir(dir).map_err(|e| invalid(format!("ledger {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut results = Vec::new();
    for p in &paths {
        let bytes = ctx.read(p)?;
        let r: GridResult =
            serde_json::from_slice(&bytes).map_err(|e| invalid(format!("ledger entry {}: {e}", p.display())))?;
        results.push(r);
    }
    if results.is_empty() {
        return Err(invalid(format!("ledger {} has no results", dir.display())));
    }
    let mut out = Outputs::default();
    candidate_outputs(&results, s.recon_min, s.per_dim, &mut out)?;
    Ok(out)
}
