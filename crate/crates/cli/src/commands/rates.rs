use std::path::PathBuf;

use agingrates_core::io::{write_correlations, write_rates};
use agingrates_core::select::{binarize, feature_rate_correlations, intra_model_similarity, DEFAULT_DELTA};
use agingrates_core::vae::infer_rates;
use agingrates_core::AgingModel;
use serde::{Deserialize, Serialize};

use super::{required, to_bytes, Ctx};
use crate::error::{invalid, CliResult};
use crate::manifest::Outputs;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Trained model JSON.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Cross-section CSV to score.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Correlation threshold for feature-dimension membership.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub delta: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            model: None,
            data: None,
            delta: DEFAULT_DELTA,
        }
    }
}

#[derive(Serialize)]
struct Similarity {
    delta: f64,
    n_persons: usize,
    n_dims: usize,
    /// Features at or above the threshold, per dimension.
    members: Vec<Vec<String>>,
    pairwise: Vec<agingrates_core::select::PairScore>,
    per_dim: Vec<f64>,
    intra_model: Option<f64>,
    flagged: Vec<(String, usize)>,
}

pub fn run(ctx: &mut Ctx, args: &Args) -> CliResult<Outputs> {
    let s: Settings = ctx.settings(args)?;
    let model_path = required(&s.model, "model")?;
    let text = String::from_utf8(ctx.read(model_path)?)
        .map_err(|_| invalid(format!("{} is not UTF-8", model_path.display())))?;
    let model = AgingModel::from_json(&text)?;
    let cs = ctx.read_cross_section(required(&s.data, "data")?)?;
    if cs.component_ids != model.layout.component_ids {
        return Err(invalid("data components differ from the model's training components"));
    }
    let rates = infer_rates(&model, &cs)?;
    let corr = feature_rate_correlations(&rates, &cs)?;
    let binary = binarize(&corr, s.delta)?;
    let members = (0..binary.cols)
        .map(|k| {
            binary
                .column(k)
                .iter()
                .zip(&cs.component_ids)
                .filter(|(b, _)| **b)
                .map(|(_, c)| c.clone())
                .collect()
        })
        .collect();
    let (pairwise, per_dim, intra) = if binary.cols >= 2 {
        let r = intra_model_similarity(&binary)?;
        (r.pairwise, r.per_dim, Some(r.intra_model))
    } else {
        (Vec::new(), Vec::new(), None)
    };
    let similarity = Similarity {
        delta: s.delta,
        n_persons: rates.n_persons(),
        n_dims: rates.n_dims(),
        members,
        pairwise,
        per_dim,
        intra_model: intra,
        flagged: corr
            .flagged
            .iter()
            .map(|(j, k)| (cs.component_ids[*j].clone(), k + 1))
            .collect(),
    };

    let mut out = Outputs::default();
    for (c, k) in &similarity.flagged {
        out.warn(format!("correlation of {c} with r{k} undefined (constant input), set to 0"));
    }
    out.add("rates.csv", to_bytes(|w| write_rates(w, &rates))?);
    out.add("correlations.csv", to_bytes(|w| write_correlations(w, &corr))?);
    out.add_json("similarity.json", &similarity)?;
    Ok(out)
}
