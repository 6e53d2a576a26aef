//! Batch loss and gradients (negative ELBO averaged over rows).
//!
//! Rows are processed in fixed-size chunks and chunk results are reduced
//! in chunk order, so the result is bitwise identical for any thread count.

use rayon::prelude::*;

use super::model::{LossBreakdown, ModelParams, Net, Prepared};
use super::AgingModel;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const CHUNK: usize = 256;

/// A mini-batch: rows of a scaled feature matrix with their scaled ages and
/// optional standard-normal draws (`rows.len() x n_dims`, row-major).
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub x: &'a Matrix,
    pub t: &'a [f64],
    pub rows: &'a [usize],
    pub eps: Option<&'a [f64]>,
}

impl<'a> Batch<'a> {
    fn check(&self, model: &AgingModel) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        if self.x.cols() != model.layout.n_features() {
            return Err(Error::ShapeMismatch {
                what: "batch features",
                expected: model.layout.n_features(),
                found: self.x.cols(),
            });
        }
        if let Some(eps) = self.eps {
            let want = self.rows.len() * model.config.n_dims;
            if eps.len() != want {
                return Err(Error::ShapeMismatch {
                    what: "noise draws",
                    expected: want,
                    found: eps.len(),
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn net(model: &AgingModel) -> Net<'_> {
    Net {
        cfg: &model.config,
        layout: &model.layout,
        age_norm: model.age_norm,
        params: &model.params,
    }
}

fn eval(model: &AgingModel, batch: &Batch<'_>, want_grad: bool) -> (f64, f64, Option<ModelParams>) {
    let net = net(model);
    let prep = Prepared::new(&model.params);
    let d = model.config.n_dims;
    let partials: Vec<(f64, f64, Option<ModelParams>)> = batch
        .rows
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, rows)| {
            let mut ws = net.workspace();
            let mut grad = want_grad.then(|| {
                let mut g = model.params.clone();
                g.fill(0.0);
                g
            });
            let (mut recon, mut kl) = (0.0, 0.0);
            for (i, &row) in rows.iter().enumerate() {
                let pos = c * CHUNK + i;
                let eps = batch.eps.map(|e| &e[pos * d..(pos + 1) * d]);
                let x = batch.x.row(row);
                let t = batch.t[row];
                let (r, k) = net.forward(x, t, eps, &prep, &mut ws);
                recon += r;
                kl += k;
                if let Some(g) = grad.as_mut() {
                    net.backward(x, t, eps, &prep, &mut ws, g);
                }
            }
            (recon, kl, grad)
        })
        .collect();

    let mut recon = 0.0;
    let mut kl = 0.0;
    let mut total_grad: Option<ModelParams> = None;
    for (r, k, g) in partials {
        recon += r;
        kl += k;
        if let Some(g) = g {
            match total_grad.as_mut() {
                Some(acc) => acc.add_scaled(&g, 1.0),
                None => total_grad = Some(g),
            }
        }
    }
    let n = batch.rows.len() as f64;
    if let Some(g) = total_grad.as_mut() {
        g.scale(1.0 / n);
    }
    (recon / n, kl / n, total_grad)
}

fn breakdown(recon: f64, kl: f64) -> LossBreakdown {
    LossBreakdown {
        total: recon + kl,
        recon,
        kl,
    }
}

/// Mean negative ELBO over the batch: Gaussian reconstruction NLL with
/// learned per-feature variance plus closed-form KL to `N(0, I)`.
pub fn loss(model: &AgingModel, batch: &Batch<'_>, batch_index: usize) -> Result<LossBreakdown> {
    batch.check(model)?;
    let (recon, kl, _) = eval(model, batch, false);
    let out = breakdown(recon, kl);
    if !out.total.is_finite() {
        return Err(Error::NonFiniteLoss { batch: batch_index });
    }
    Ok(out)
}

/// Loss and its gradient with respect to every parameter.
pub fn gradients(model: &AgingModel, batch: &Batch<'_>, batch_index: usize) -> Result<(LossBreakdown, ModelParams)> {
    batch.check(model)?;
    let (recon, kl, grad) = eval(model, batch, true);
    let out = breakdown(recon, kl);
    if !out.total.is_finite() {
        return Err(Error::NonFiniteLoss { batch: batch_index });
    }
    Ok((out, grad.expect("gradient requested")))
}
