use std::path::PathBuf;

use agingrates_core::cohort::{choose_k, elbow_by_curvature, kmeans_fit, KDiagnostic, DEFAULT_K, DEFAULT_RESTARTS};
use agingrates_core::io::write_clusters;
use agingrates_core::Matrix;
use serde::{Deserialize, Serialize};

use super::{required, to_bytes, Ctx};
use crate::error::{invalid, CliResult};
use crate::manifest::Outputs;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Rates CSV from `rates`.
    #[arg(long)]
    pub rates: Option<PathBuf>,
    /// Number of clusters to fit.
    #[arg(long)]
    pub k: Option<usize>,
    /// Smallest k in the diagnostics sweep.
    #[arg(long)]
    pub k_min: Option<usize>,
    /// Largest k in the diagnostics sweep.
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub rates: Option<PathBuf>,
    pub k: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            rates: None,
            k: DEFAULT_K,
            k_min: 2,
            k_max: 8,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

#[derive(Serialize)]
struct Centroids {
    k: usize,
    centroids: Matrix,
    sizes: Vec<usize>,
    inertia: f64,
    silhouette: Option<f64>,
    iterations: usize,
}

#[derive(Serialize)]
struct Diagnostics {
    diagnostics: Vec<KDiagnostic>,
    /// Maximum-curvature elbow of the inertia curve. Advisory only: the
    /// fitted k is whatever was requested.
    advisory_elbow: Option<usize>,
}

pub fn run(ctx: &mut Ctx, args: &Args) -> CliResult<Outputs> {
    let s: Settings = ctx.settings(args)?;
    let rates = ctx.read_rates(required(&s.rates, "rates")?)?;
    let n = rates.n_persons();
    if s.k < 1 || s.k > n {
        return Err(invalid(format!("k must lie in 1..={n}")));
    }
    let model = kmeans_fit(&rates.rates, s.k, ctx.seed, s.restarts)?;
    let k_max = s.k_max.min(n.saturating_sub(1));
    let diagnostics = if s.k_min >= 2 && s.k_min <= k_max {
        choose_k(&rates.rates, s.k_min..=k_max, ctx.seed, s.restarts)?
    } else {
        Vec::new()
    };
    let advisory_elbow = elbow_by_curvature(&diagnostics);

    let mut out = Outputs::default();
    if diagnostics.is_empty() {
        out.warn(format!("k range {}..={} is empty for {n} persons; no diagnostics", s.k_min, s.k_max));
    }
    let mut sizes = vec![0; model.k];
    for a in &model.assignments {
        sizes[*a] += 1;
    }
    out.add("clusters.csv", to_bytes(|w| write_clusters(w, &rates.person_ids, &model))?);
    out.add_json(
        "centroids.json",
        &Centroids {
            k: model.k,
            centroids: model.centroids.clone(),
            sizes,
            inertia: model.inertia,
            silhouette: model.silhouette,
            iterations: model.iterations,
        },
    )?;
    out.add_json(
        "k_diagnostics.json",
        &Diagnostics {
            diagnostics,
            advisory_elbow,
        },
    )?;
    Ok(out)
}
