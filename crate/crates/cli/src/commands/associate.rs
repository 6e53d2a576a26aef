use std::collections::BTreeSet;
use std::path::PathBuf;

use agingrates_core::cohort::{
    ager_groups, associate_outcome, dimension_ols, jaccard, AssociationResult, ClusterModel, Covariates,
    DimensionOls, Exposure, OutcomeEvent,
};
use agingrates_core::io::{read_clusters, read_outcomes, write_association_table};
use agingrates_core::{Matrix, RateMatrix};
use serde::{Deserialize, Serialize};

use super::{align_to_rates, required, to_bytes, Ctx};
use crate::error::{invalid, CliResult};
use crate::manifest::Outputs;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Rates CSV from `rates`.
    #[arg(long)]
    pub rates: Option<PathBuf>,
    /// Cross-section CSV supplying sex and lab window.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Diagnosis events CSV: person_id,outcome_id,first_diagnosis_month.
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
    /// Cluster labels from `cluster`.
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    /// Percentile at or above which a person is a fast ager.
    #[arg(long)]
    pub hi_pct: Option<f64>,
    /// Percentile at or below which a person is a slow ager.
    #[arg(long)]
    pub lo_pct: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub rates: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub outcomes: Option<PathBuf>,
    pub clusters: Option<PathBuf>,
    pub hi_pct: f64,
    pub lo_pct: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            rates: None,
            data: None,
            outcomes: None,
            clusters: None,
            hi_pct: 90.0,
            lo_pct: 10.0,
        }
    }
}

#[derive(Serialize)]
struct OutcomeSummary {
    outcome_id: String,
    exposure: &'static str,
    n: usize,
    cases: usize,
    excluded_prior: usize,
    sex_dropped: bool,
    converged: bool,
}

#[derive(Serialize)]
struct Overlap {
    a: usize,
    b: usize,
    jaccard: f64,
}

#[derive(Serialize)]
struct Analysis {
    outcomes: Vec<OutcomeSummary>,
    /// Jaccard overlap of the fast-ager groups of each pair of dimensions.
    fast_overlap: Vec<Overlap>,
    fast_cuts: Vec<f64>,
    slow_cuts: Vec<f64>,
}

fn summary(r: &AssociationResult, exposure: &'static str) -> OutcomeSummary {
    OutcomeSummary {
        outcome_id: r.outcome_id.clone(),
        exposure,
        n: r.n,
        cases: r.cases,
        excluded_prior: r.excluded_prior,
        sex_dropped: r.sex_dropped,
        converged: r.fit.converged,
    }
}

fn cluster_model(rates: &RateMatrix, labels: Vec<(String, usize)>) -> CliResult<ClusterModel> {
    let index: std::collections::HashMap<String, usize> = labels.into_iter().collect();
    let assignments = rates
        .person_ids
        .iter()
        .map(|p| {
            index
                .get(p)
                .copied()
                .ok_or_else(|| invalid(format!("person `{p}` has rates but no cluster label")))
        })
        .collect::<CliResult<Vec<usize>>>()?;
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    Ok(ClusterModel {
        k,
        centroids: Matrix::zeros(k, rates.n_dims()),
        assignments,
        inertia: f64::NAN,
        silhouette: None,
        iterations: 0,
        trace: Vec::new(),
    })
}

fn ols_table(fits: &[DimensionOls]) -> Vec<u8> {
    let mut text = String::from("dim,covariate,coefficient,std_error,p_value\n");
    for d in fits {
        for j in 0..d.fit.names.len() {
            text.push_str(&format!(
                "r{},{},{},{},{}\n",
                d.dim + 1,
                d.fit.names[j],
                d.fit.coefficients[j],
                d.fit.std_errors[j],
                d.fit.p_values[j]
            ));
        }
    }
    text.into_bytes()
}

pub fn run(ctx: &mut Ctx, args: &Args) -> CliResult<Outputs> {
    let s: Settings = ctx.settings(args)?;
    let rates = ctx.read_rates(required(&s.rates, "rates")?)?;
    let cs = ctx.read_cross_section(required(&s.data, "data")?)?;
    let cs = align_to_rates(&rates, &cs)?;
    let events: Vec<OutcomeEvent> = read_outcomes(ctx.read(required(&s.outcomes, "outcomes")?)?.as_slice())?;
    let clusters = match &s.clusters {
        Some(p) => {
            let labels = read_clusters(ctx.read(p)?.as_slice())?;
            Some(cluster_model(&rates, labels)?)
        }
        None => None,
    };
    let cov = Covariates {
        sex: &cs.sex,
        window: &cs.window,
    };
    let outcome_ids: Vec<String> = events
        .iter()
        .map(|e| e.outcome_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if outcome_ids.is_empty() {
        return Err(invalid("outcomes file has no events"));
    }

    let mut out = Outputs::default();
    let mut summaries = Vec::new();
    let mut by_dim = Vec::new();
    let mut by_cluster = Vec::new();
    for id in &outcome_ids {
        match associate_outcome(&rates, &cov, &events, id, Exposure::Dimensions) {
            Ok(r) => {
                summaries.push(summary(&r, "dimensions"));
                by_dim.push(r);
            }
            Err(e) => out.warn(format!("outcome {id} on dimensions: {e}")),
        }
        if let Some(model) = &clusters {
            match associate_outcome(&rates, &cov, &events, id, Exposure::Clusters(model)) {
                Ok(r) => {
                    summaries.push(summary(&r, "clusters"));
                    by_cluster.push(r);
                }
                Err(e) => out.warn(format!("outcome {id} on clusters: {e}")),
            }
        }
    }
    for s in summaries.iter().filter(|s| !s.converged) {
        out.warn(format!("logistic fit for {} on {} did not converge", s.outcome_id, s.exposure));
    }
    let ols = match dimension_ols(&rates, &cov, &events, &outcome_ids) {
        Ok(fits) => fits,
        Err(e) => {
            out.warn(format!("rate regressions: {e}"));
            Vec::new()
        }
    };

    let groups = (0..rates.n_dims())
        .map(|k| ager_groups(&rates, k, s.hi_pct, s.lo_pct))
        .collect::<agingrates_core::Result<Vec<_>>>()?;
    let fast: Vec<_> = groups.iter().map(|g| g.fast_ids(&rates)).collect();
    let mut fast_overlap = Vec::new();
    for a in 0..fast.len() {
        for b in a + 1..fast.len() {
            fast_overlap.push(Overlap {
                a: a + 1,
                b: b + 1,
                jaccard: jaccard(&fast[a], &fast[b]),
            });
        }
    }

    out.add("associations.csv", to_bytes(|w| write_association_table(w, &by_dim))?);
    if clusters.is_some() {
        out.add("cluster_associations.csv", to_bytes(|w| write_association_table(w, &by_cluster))?);
    }
    out.add("ols.csv", ols_table(&ols));
    out.add_json(
        "analysis.json",
        &Analysis {
            outcomes: summaries,
            fast_overlap,
            fast_cuts: groups.iter().map(|g| g.fast_cut).collect(),
            slow_cuts: groups.iter().map(|g| g.slow_cut).collect(),
        },
    )?;
    Ok(out)
}
