use std::path::PathBuf;

use agingrates_core::select::{per_feature_reconstruction, reconstruction_correlation};
use agingrates_core::vae::{default_poly_degrees, train};
use agingrates_core::{CrossSection, ModelConfig};
use serde::{Deserialize, Serialize};

use super::{required, split_rows, Ctx};
use crate::error::{CliError, CliResult};
use crate::manifest::Outputs;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Cross-section CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub val_frac: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
}

/// Model hyperparameters shared by `train` and `tune`.
#[derive(Debug, clap::Args, Serialize)]
pub struct ModelArgs {
    #[arg(long)]
    pub n_dims: Option<usize>,
    #[arg(long)]
    pub sigma_r: Option<f64>,
    /// Features on the monotone path (default: half of them).
    #[arg(long)]
    pub monotone_count: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub poly_degrees: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub encoder_widths: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub decoder_widths: Option<Vec<usize>>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub data: Option<PathBuf>,
    pub val_frac: f64,
    pub n_dims: usize,
    pub sigma_r: f64,
    pub monotone_count: Option<usize>,
    pub poly_degrees: Vec<f64>,
    pub encoder_widths: Vec<usize>,
    pub decoder_widths: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: Option<usize>,
}

impl Default for Settings {
    fn default() -> Self {
        let m = ModelConfig::default();
        Settings {
            data: None,
            val_frac: 0.2,
            n_dims: m.n_dims,
            sigma_r: m.sigma_r,
            monotone_count: None,
            poly_degrees: default_poly_degrees(),
            encoder_widths: m.encoder_widths,
            decoder_widths: m.decoder_widths,
            learning_rate: m.learning_rate,
            batch_size: m.batch_size,
            max_epochs: m.max_epochs,
            patience: m.patience,
        }
    }
}

impl Settings {
    pub fn model_config(&self, n_features: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            n_dims: self.n_dims,
            sigma_r: self.sigma_r,
            monotone_count: self
                .monotone_count
                .unwrap_or((n_features as f64 / 2.0).round() as usize),
            poly_degrees: self.poly_degrees.clone(),
            encoder_widths: self.encoder_widths.clone(),
            decoder_widths: self.decoder_widths.clone(),
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed,
        }
    }
}

#[derive(Serialize)]
struct Metrics {
    n_train: usize,
    n_val: usize,
    reconstruction: f64,
    per_feature: Vec<(String, Option<f64>)>,
    best_epoch: Option<usize>,
    best_val_loss: f64,
}

/// Splits `cs` into training and validation sets.
pub fn split(cs: &CrossSection, val_frac: f64, seed: u64) -> CliResult<(CrossSection, CrossSection)> {
    let (tr, va) = split_rows(cs.n_persons(), val_frac, seed)?;
    Ok((cs.select_rows(&tr), cs.select_rows(&va)))
}

fn split_table(train_cs: &CrossSection, val_cs: &CrossSection) -> Vec<u8> {
    let mut rows: Vec<(&str, &str)> = train_cs
        .person_ids
        .iter()
        .map(|p| (p.as_str(), "train"))
        .chain(val_cs.person_ids.iter().map(|p| (p.as_str(), "val")))
        .collect();
    rows.sort();
    let mut text = String::from("person_id,set\n");
    for (p, set) in rows {
        text.push_str(p);
        text.push(',');
        text.push_str(set);
        text.push('\n');
    }
    text.into_bytes()
}

pub fn run(ctx: &mut Ctx, args: &Args) -> CliResult<Outputs> {
    #[derive(Serialize)]
    struct Flat<'a> {
        data: &'a Option<PathBuf>,
        val_frac: Option<f64>,
        #[serde(flatten)]
        model: &'a ModelArgs,
    }
    let s: Settings = ctx.settings(&Flat {
        data: &args.data,
        val_frac: args.val_frac,
        model: &args.model,
    })?;
    let cs = ctx.read_cross_section(required(&s.data, "data")?)?;
    let cfg = s.model_config(cs.n_components(), ctx.seed);
    cfg.validate(cs.n_components())?;
    let (train_cs, val_cs) = split(&cs, s.val_frac, ctx.seed)?;

    let mut out = Outputs::default();
    out.add("split.csv", split_table(&train_cs, &val_cs));
    match train(&cfg, &train_cs, &val_cs) {
        Ok(trained) => {
            let metrics = Metrics {
                n_train: train_cs.n_persons(),
                n_val: val_cs.n_persons(),
                reconstruction: reconstruction_correlation(&trained.model, &val_cs)?,
                per_feature: val_cs
                    .component_ids
                    .iter()
                    .cloned()
                    .zip(per_feature_reconstruction(&trained.model, &val_cs)?)
                    .collect(),
                best_epoch: trained.log.best_epoch,
                best_val_loss: trained.log.best_val_loss,
            };
            out.add("model.json", json_bytes(&trained.model.to_json()?));
            out.add_json("training_log.json", &trained.log)?;
            out.add_json("metrics.json", &metrics)?;
        }
        Err(failure) => {
            if let Some(model) = &failure.last_finite {
                out.add("model.partial.json", json_bytes(&model.to_json()?));
            }
            out.add_json("training_log.json", &failure.log)?;
            out.warn(failure.to_string());
            out.failure = Some(CliError::Runtime(failure.to_string()));
        }
    }
    Ok(out)
}

fn json_bytes(text: &str) -> Vec<u8> {
    let mut b = text.as_bytes().to_vec();
    b.push(b'\n');
    b
}
