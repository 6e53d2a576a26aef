use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::similarity::{
    binarize, feature_rate_correlations, inter_model_similarity, intra_model_similarity,
    reconstruction_correlation, BinaryMatrix,
};
use crate::error::{Error, Result};
use crate::ingest::CrossSection;
use crate::vae::{infer_rates, train, AgingModel, ModelConfig};

/// Encoder and decoder hidden widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub encoder_widths: Vec<usize>,
    pub decoder_widths: Vec<usize>,
}

impl Architecture {
    /// `{outer} - {inner}`: encoder `[outer, inner]`, decoder `[inner, outer]`.
    pub fn mirrored(outer: usize, inner: usize) -> Self {
        Architecture {
            encoder_widths: vec![outer, inner],
            decoder_widths: vec![inner, outer],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub n_dims: Vec<usize>,
    pub monotone_counts: Vec<usize>,
    pub architectures: Vec<Architecture>,
    pub learning_rates: Vec<f64>,
    /// Supplies every field not varied by the grid.
    #[serde(default)]
    pub base: ModelConfig,
}

impl SearchSpace {
    /// First search set: 2 x 5 x 25 x 3 configurations.
    pub fn set_one() -> Self {
        let mut architectures = Vec::new();
        for outer in [36, 34, 32, 30, 28] {
            for inner in [24, 22, 20, 18, 16] {
                architectures.push(Architecture::mirrored(outer, inner));
            }
        }
        SearchSpace {
            n_dims: vec![3, 4],
            monotone_counts: vec![34, 28, 18, 9, 3],
            architectures,
            learning_rates: vec![5e-4, 6e-4, 7e-4],
            base: ModelConfig::default(),
        }
    }

    /// Second search set: 4 x 5 x 4 x 5 configurations.
    pub fn set_two() -> Self {
        SearchSpace {
            n_dims: vec![3, 4, 5, 6],
            monotone_counts: vec![34, 28, 18, 9, 3],
            architectures: vec![
                Architecture::mirrored(64, 32),
                Architecture::mirrored(64, 16),
                Architecture::mirrored(128, 32),
                Architecture::mirrored(32, 16),
            ],
            learning_rates: vec![1e-4, 3e-4, 5e-4, 7e-4, 1e-3],
            base: ModelConfig::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.n_dims.len() * self.monotone_counts.len() * self.architectures.len() * self.learning_rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Cartesian product in a fixed order (dims, monotone, architecture, lr).
pub fn enumerate_configs(space: &SearchSpace) -> Vec<ModelConfig> {
    let mut out = Vec::with_capacity(space.len());
    for &n_dims in &space.n_dims {
        for &monotone_count in &space.monotone_counts {
            for arch in &space.architectures {
                for &learning_rate in &space.learning_rates {
                    out.push(ModelConfig {
                        n_dims,
                        monotone_count,
                        encoder_widths: arch.encoder_widths.clone(),
                        decoder_widths: arch.decoder_widths.clone(),
                        learning_rate,
                        ..space.base.clone()
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridStatus {
    Ok,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub hash: String,
    pub config: ModelConfig,
    pub seed_set: Vec<u64>,
    pub delta: f64,
    pub status: GridStatus,
    /// Mean over seeds of the held-out reconstruction correlation.
    pub reconstruction: Option<f64>,
    /// Mean over seeds of the intra-model similarity.
    pub intra: Option<f64>,
    /// Absent when fewer than two seeds were trained.
    pub inter: Option<f64>,
    pub error: Option<String>,
}

/// Hex sha256 of the canonical JSON of the configuration (seed field
/// zeroed), the seed list and the threshold.
pub fn config_hash(cfg: &ModelConfig, seeds: &[u64], delta: f64) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        config: &'a ModelConfig,
        seeds: &'a [u64],
        delta: f64,
    }
    let normalized = cfg.with_seed(0);
    // serde_json::Value keeps object keys sorted, which makes the text canonical.
    let value = serde_json::to_value(Key {
        config: &normalized,
        seeds,
        delta,
    })
    .expect("config serializes");
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct GridOptions {
    pub seeds: Vec<u64>,
    pub delta: f64,
    pub workers: usize,
    /// Results directory; `None` keeps everything in memory.
    pub ledger: Option<PathBuf>,
}

fn ledger_path(dir: &Path, hash: &str) -> PathBuf {
    dir.join(format!("{hash}.json"))
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Every parseable result document in `dir`, keyed by hash.
pub fn load_ledger(dir: &Path) -> Result<BTreeMap<String, GridResult>> {
    let mut out = BTreeMap::new();
    if !dir.exists() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let text = fs::read_to_string(&path)?;
        if let Ok(r) = serde_json::from_str::<GridResult>(&text) {
            out.insert(r.hash.clone(), r);
        }
    }
    Ok(out)
}

fn evaluate(cfg: &ModelConfig, hash: String, train_cs: &CrossSection, val_cs: &CrossSection, opts: &GridOptions) -> GridResult {
    let mut result = GridResult {
        hash,
        config: cfg.with_seed(0),
        seed_set: opts.seeds.clone(),
        delta: opts.delta,
        status: GridStatus::Ok,
        reconstruction: None,
        intra: None,
        inter: None,
        error: None,
    };
    let run = || -> std::result::Result<(f64, f64, Option<f64>), (GridStatus, String)> {
        let mut recon = Vec::new();
        let mut intra = Vec::new();
        let mut binaries: Vec<BinaryMatrix> = Vec::new();
        for &seed in &opts.seeds {
            let trained = train(&cfg.with_seed(seed), train_cs, val_cs)
                .map_err(|f| (GridStatus::Diverged, f.error.to_string()))?;
            let metrics = seed_metrics(&trained.model, val_cs, opts.delta)
                .map_err(|e| (GridStatus::Diverged, e.to_string()))?;
            recon.push(metrics.0);
            intra.push(metrics.1);
            binaries.push(metrics.2);
        }
        let inter = if binaries.len() >= 2 {
            Some(inter_model_similarity(&binaries).map_err(|e| (GridStatus::Diverged, e.to_string()))?)
        } else {
            None
        };
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        Ok((mean(&recon), mean(&intra), inter))
    };
    match run() {
        Ok((r, i, x)) => {
            result.reconstruction = Some(r);
            result.intra = Some(i);
            result.inter = x;
        }
        Err((status, msg)) => {
            result.status = status;
            result.error = Some(msg);
        }
    }
    result
}

fn seed_metrics(model: &AgingModel, val_cs: &CrossSection, delta: f64) -> Result<(f64, f64, BinaryMatrix)> {
    let recon = reconstruction_correlation(model, val_cs)?;
    let rates = infer_rates(model, val_cs)?;
    let binary = binarize(&feature_rate_correlations(&rates, val_cs)?, delta)?;
    let intra = intra_model_similarity(&binary)?.intra_model;
    Ok((recon, intra, binary))
}

/// Trains and scores every configuration not already in the ledger.
/// Results come back in enumeration order regardless of scheduling.
pub fn run_grid(
    space: &SearchSpace,
    train_cs: &CrossSection,
    val_cs: &CrossSection,
    opts: &GridOptions,
) -> Result<Vec<GridResult>> {
    if space.is_empty() {
        return Err(Error::InvalidInput("search space is empty".into()));
    }
    if opts.seeds.is_empty() {
        return Err(Error::InvalidInput("seed list is empty".into()));
    }
    if space.n_dims.iter().any(|n| *n < 2) {
        return Err(Error::InvalidInput(
            "grid n_dims must be >= 2 for intra-model similarity".into(),
        ));
    }
    let configs = enumerate_configs(space);
    for cfg in &configs {
        cfg.validate(train_cs.n_components())?;
    }
    let hashes: Vec<String> = configs
        .iter()
        .map(|c| config_hash(c, &opts.seeds, opts.delta))
        .collect();
    let mut done = match &opts.ledger {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            load_ledger(dir)?
        }
        None => BTreeMap::new(),
    };
    let pending: Vec<usize> = (0..configs.len())
        .filter(|i| !done.contains_key(&hashes[*i]))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?;
    let fresh: Vec<Result<GridResult>> = pool.install(|| {
        pending
            .par_iter()
            .map(|&i| {
                let r = evaluate(&configs[i], hashes[i].clone(), train_cs, val_cs, opts);
                if let Some(dir) = &opts.ledger {
                    write_atomic(&ledger_path(dir, &r.hash), &serde_json::to_string_pretty(&r)?)?;
                }
                Ok(r)
            })
            .collect()
    });
    for r in fresh {
        let r = r?;
        done.insert(r.hash.clone(), r);
    }
    Ok(hashes
        .iter()
        .map(|h| done.get(h).cloned().expect("every config evaluated"))
        .collect())
}

fn widths(w: &[usize]) -> String {
    w.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
}

/// One row per result, sorted by (n_dims, intra ascending); configurations
/// without an intra score go last within their group.
pub fn write_summary<W: std::io::Write>(writer: W, results: &[GridResult]) -> Result<()> {
    let mut sorted: Vec<&GridResult> = results.iter().collect();
    sorted.sort_by(|a, b| {
        a.config.n_dims.cmp(&b.config.n_dims).then_with(|| match (a.intra, b.intra) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        })
    });
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "hash",
        "n_dims",
        "monotone_count",
        "encoder_widths",
        "decoder_widths",
        "learning_rate",
        "batch_size",
        "max_epochs",
        "sigma_r",
        "seeds",
        "reconstruction",
        "intra",
        "inter",
        "status",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in sorted {
        let c = &r.config;
        w.write_record([
            r.hash.clone(),
            c.n_dims.to_string(),
            c.monotone_count.to_string(),
            widths(&c.encoder_widths),
            widths(&c.decoder_widths),
            c.learning_rate.to_string(),
            c.batch_size.to_string(),
            c.max_epochs.to_string(),
            c.sigma_r.to_string(),
            r.seed_set.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
            opt(r.reconstruction),
            opt(r.intra),
            opt(r.inter),
            match r.status {
                GridStatus::Ok => "ok".into(),
                GridStatus::Diverged => "diverged".into(),
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}
