pub mod associate;
pub mod clean;
pub mod cluster;
pub mod costs;
pub mod rates;
pub mod report;
pub mod select;
pub mod synth;
pub mod train;
pub mod tune;

use std::path::{Path, PathBuf};
use std::time::Instant;

use agingrates_core::io::{read_cross_section, read_rates};
use agingrates_core::rng::{seeded, shuffle, streams};
use agingrates_core::{CrossSection, RateMatrix};
use clap::Subcommand;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{canonical_hash, ConfigFile, DEFAULT_SEED};
use crate::error::{invalid, CliResult};
use crate::manifest::{digest_inputs, read_input, Outputs, RunManifest};

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean raw lab observations into a complete-case cross-section.
    Clean(clean::Args),
    /// Generate a synthetic cohort with planted rates, outcomes and costs.
    Synth(synth::Args),
    /// Train an aging model on a cross-section.
    Train(train::Args),
    /// Grid search over model hyperparameters with a resumable ledger.
    Tune(tune::Args),
    /// Pick candidate models from a tuning ledger.
    Select(select::Args),
    /// Infer aging rates with a trained model.
    Rates(rates::Args),
    /// K-means clustering of aging rates.
    Cluster(cluster::Args),
    /// Outcome associations per dimension and per cluster.
    Associate(associate::Args),
    /// Cost comparisons between fast and slow agers.
    Costs(costs::Args),
    /// Render SVG figures from analysis tables.
    Report(report::Args),
}

pub const COMMANDS: [&str; 10] = [
    "clean", "synth", "train", "tune", "select", "rates", "cluster", "associate", "costs", "report",
];

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Clean(_) => "clean",
            Command::Synth(_) => "synth",
            Command::Train(_) => "train",
            Command::Tune(_) => "tune",
            Command::Select(_) => "select",
            Command::Rates(_) => "rates",
            Command::Cluster(_) => "cluster",
            Command::Associate(_) => "associate",
            Command::Costs(_) => "costs",
            Command::Report(_) => "report",
        }
    }

    pub fn run(&self, ctx: &mut Ctx) -> CliResult<Outputs> {
        match self {
            Command::Clean(a) => clean::run(ctx, a),
            Command::Synth(a) => synth::run(ctx, a),
            Command::Train(a) => train::run(ctx, a),
            Command::Tune(a) => tune::run(ctx, a),
            Command::Select(a) => select::run(ctx, a),
            Command::Rates(a) => rates::run(ctx, a),
            Command::Cluster(a) => cluster::run(ctx, a),
            Command::Associate(a) => associate::run(ctx, a),
            Command::Costs(a) => costs::run(ctx, a),
            Command::Report(a) => report::run(ctx, a),
        }
    }
}

/// Per-run state shared by the subcommands.
pub struct Ctx {
    pub command: &'static str,
    pub seed: u64,
    pub out: PathBuf,
    config: ConfigFile,
    inputs: Vec<(PathBuf, Vec<u8>)>,
    settings: serde_json::Value,
    started: Instant,
}

impl Ctx {
    pub fn new(command: &'static str, seed_flag: Option<u64>, config: ConfigFile, out: PathBuf) -> Self {
        let seed = seed_flag.or(config.seed).unwrap_or(DEFAULT_SEED);
        Ctx {
            command,
            seed,
            out,
            config,
            inputs: Vec::new(),
            settings: serde_json::Value::Null,
            started: Instant::now(),
        }
    }

    /// Resolves and records the command's settings.
    pub fn settings<S, O>(&mut self, overrides: &O) -> CliResult<S>
    where
        S: Serialize + DeserializeOwned + Default,
        O: Serialize,
    {
        let s: S = self.config.resolve(self.command, overrides)?;
        self.settings = serde_json::to_value(&s)?;
        Ok(s)
    }

    /// Reads and records an input file.
    pub fn read(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = read_input(path)?;
        self.inputs.push((path.to_path_buf(), bytes.clone()));
        Ok(bytes)
    }

    pub fn read_cross_section(&mut self, path: &Path) -> CliResult<CrossSection> {
        let bytes = self.read(path)?;
        Ok(read_cross_section(bytes.as_slice())?)
    }

    pub fn read_rates(&mut self, path: &Path) -> CliResult<RateMatrix> {
        let bytes = self.read(path)?;
        Ok(read_rates(bytes.as_slice())?)
    }

    pub fn manifest(&self) -> CliResult<RunManifest> {
        #[derive(Serialize)]
        struct Key<'a> {
            command: &'a str,
            seed: u64,
            settings: &'a serde_json::Value,
        }
        Ok(RunManifest {
            command: self.command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            config_hash: canonical_hash(&Key {
                command: self.command,
                seed: self.seed,
                settings: &self.settings,
            })?,
            config: self.settings.clone(),
            inputs: digest_inputs(&self.inputs),
            outputs: Vec::new(),
            warnings: Vec::new(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        })
    }
}

/// A required path setting that may come from a flag or the config file.
pub fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| invalid(format!("missing required --{flag}")))
}

/// Serializes into an in-memory buffer with one of the core CSV writers.
pub fn to_bytes<F>(write: F) -> CliResult<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> agingrates_core::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

/// Aligns per-person cross-section covariates to the rows of `rates`.
pub fn align_to_rates(rates: &RateMatrix, cs: &CrossSection) -> CliResult<CrossSection> {
    let index: std::collections::HashMap<&str, usize> = cs
        .person_ids
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i))
        .collect();
    let rows = rates
        .person_ids
        .iter()
        .map(|p| {
            index
                .get(p.as_str())
                .copied()
                .ok_or_else(|| invalid(format!("person `{p}` has rates but no cross-section row")))
        })
        .collect::<CliResult<Vec<usize>>>()?;
    Ok(cs.select_rows(&rows))
}

/// Seeded train/validation split; returns (train rows, validation rows),
/// each in ascending order.
pub fn split_rows(n: usize, val_frac: f64, seed: u64) -> CliResult<(Vec<usize>, Vec<usize>)> {
    if !(val_frac > 0.0 && val_frac < 1.0) {
        return Err(invalid("val_frac must lie in (0, 1)"));
    }
    let n_val = ((n as f64) * val_frac).round() as usize;
    if n_val == 0 || n_val == n {
        return Err(invalid(format!("cannot split {n} persons with val_frac {val_frac}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut order, &mut seeded(seed, streams::SPLIT));
    let mut val = order[..n_val].to_vec();
    let mut train = order[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}
