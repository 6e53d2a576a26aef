use std::fmt;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::model::{LossBreakdown, ModelParams};
use super::monotone::{select_top_monotone, MonotoneSelection};
use super::objective::{gradients, loss, Batch};
use super::{AgeNormalizer, AgingModel, FeatureLayout, ModelConfig, MODEL_FORMAT, MODEL_VERSION};
use crate::error::{Error, Result};
use crate::ingest::{CrossSection, Scaler};
use crate::matrix::Matrix;
use crate::rng::{seeded, shuffle, streams, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: LossBreakdown,
    pub val: LossBreakdown,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (`None`: initial parameters).
    pub best_epoch: Option<usize>,
    pub best_val_loss: f64,
    pub initial_val_loss: f64,
    pub steps: u64,
    pub n_train: usize,
    pub n_val: usize,
    pub threads: usize,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: AgingModel,
    pub log: TrainingLog,
    pub selection: MonotoneSelection,
}

/// Training stopped on a non-finite loss; carries the last finite state.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: Error,
    pub last_finite: Option<Box<AgingModel>>,
    pub log: TrainingLog,
}

impl fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "training failed: {}", self.error)
    }
}

impl std::error::Error for TrainFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<TrainFailure> for Error {
    fn from(f: TrainFailure) -> Self {
        f.error
    }
}

impl From<Error> for TrainFailure {
    fn from(error: Error) -> Self {
        TrainFailure {
            error,
            last_finite: None,
            log: TrainingLog::default(),
        }
    }
}

/// Builds an untrained model: monotone features chosen on `train_cs`,
/// scaler fitted on `train_cs`, parameters initialized from `cfg.seed`.
pub fn init_model(cfg: &ModelConfig, train_cs: &CrossSection) -> Result<(AgingModel, MonotoneSelection)> {
    cfg.validate(train_cs.n_components())?;
    let selection = select_top_monotone(train_cs, cfg.monotone_count)?;
    let scaler = Scaler::fit(train_cs)?;
    let layout = FeatureLayout {
        component_ids: train_cs.component_ids.clone(),
        monotone: selection.features.clone(),
        signs: selection.signs.clone(),
        network: selection.remainder(),
    };
    let t = train_cs.t_scaled();
    let mut rng = seeded(cfg.seed, streams::INIT);
    let params = ModelParams::init(cfg, &layout, &t, &mut rng);
    Ok((
        AgingModel {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            config: cfg.clone(),
            layout,
            age_norm: AgeNormalizer::fit(&t),
            params,
            scaler,
        },
        selection,
    ))
}

fn normal_draws(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Mini-batch Adam on the negative ELBO. Parameters from the epoch with
/// the lowest validation loss are returned.
pub fn train(cfg: &ModelConfig, train_cs: &CrossSection, val_cs: &CrossSection) -> std::result::Result<Trained, TrainFailure> {
    if train_cs.component_ids != val_cs.component_ids {
        return Err(Error::InvalidInput("training and validation features differ".into()).into());
    }
    if val_cs.n_persons() == 0 || train_cs.n_persons() == 0 {
        return Err(Error::EmptyCohort("training and validation sets must be nonempty".into()).into());
    }
    let (mut model, selection) = init_model(cfg, train_cs)?;
    let x_train: Matrix = model.scale(train_cs)?;
    let x_val: Matrix = model.scale(val_cs)?;
    let t_train = train_cs.t_scaled();
    let t_val = val_cs.t_scaled();
    let d = cfg.n_dims;

    let mut shuffle_rng = seeded(cfg.seed, streams::SHUFFLE);
    let mut noise_rng = seeded(cfg.seed, streams::REPARAM);
    let val_rows: Vec<usize> = (0..val_cs.n_persons()).collect();
    let val_eps = normal_draws(val_rows.len() * d, &mut seeded(cfg.seed, streams::REPARAM << 32));
    let val_batch = Batch {
        x: &x_val,
        t: &t_val,
        rows: &val_rows,
        eps: Some(&val_eps),
    };

    let mut log = TrainingLog {
        n_train: train_cs.n_persons(),
        n_val: val_cs.n_persons(),
        threads: rayon::current_num_threads(),
        ..TrainingLog::default()
    };
    let initial = match loss(&model, &val_batch, 0) {
        Ok(l) => l,
        Err(error) => return Err(TrainFailure { error, last_finite: None, log }),
    };
    log.initial_val_loss = initial.total;
    log.best_val_loss = initial.total;
    let mut best = model.params.clone();
    let mut since_best = 0;

    let mut adam = Adam::new(model.params.n_params(), cfg.learning_rate);
    let mut flat = model.params.flatten();
    let mut order: Vec<usize> = (0..train_cs.n_persons()).collect();
    let mut batch_index = 0;

    for epoch in 0..cfg.max_epochs {
        shuffle(&mut order, &mut shuffle_rng);
        let mut sums = LossBreakdown::default();
        let mut n_seen = 0usize;
        for rows in order.chunks(cfg.batch_size) {
            let eps = normal_draws(rows.len() * d, &mut noise_rng);
            let batch = Batch {
                x: &x_train,
                t: &t_train,
                rows,
                eps: Some(&eps),
            };
            let (l, grad) = match gradients(&model, &batch, batch_index) {
                Ok(v) => v,
                Err(_) => {
                    return Err(TrainFailure {
                        error: Error::Diverged { epoch, batch: batch_index },
                        last_finite: Some(Box::new(model)),
                        log,
                    })
                }
            };
            let w = rows.len() as f64;
            sums.total += l.total * w;
            sums.recon += l.recon * w;
            sums.kl += l.kl * w;
            n_seen += rows.len();

            let previous = flat.clone();
            adam.update(&mut flat, &grad.flatten());
            if flat.iter().any(|v| !v.is_finite()) {
                model.params.assign(&previous);
                return Err(TrainFailure {
                    error: Error::Diverged { epoch, batch: batch_index },
                    last_finite: Some(Box::new(model)),
                    log,
                });
            }
            model.params.assign(&flat);
            batch_index += 1;
        }
        let val = match loss(&model, &val_batch, batch_index) {
            Ok(v) => v,
            Err(_) => {
                return Err(TrainFailure {
                    error: Error::Diverged { epoch, batch: batch_index },
                    last_finite: Some(Box::new(model)),
                    log,
                })
            }
        };
        let n = n_seen as f64;
        log.epochs.push(EpochRecord {
            epoch,
            train: LossBreakdown {
                total: sums.total / n,
                recon: sums.recon / n,
                kl: sums.kl / n,
            },
            val,
        });
        if val.total < log.best_val_loss {
            log.best_val_loss = val.total;
            log.best_epoch = Some(epoch);
            best = model.params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
    }
    log.steps = adam.steps();
    model.params = best;
    Ok(Trained {
        model,
        log,
        selection,
    })
}
