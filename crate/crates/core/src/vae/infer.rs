use serde::{Deserialize, Serialize};

use super::model::{Prepared, Workspace};
use super::objective::net;
use super::AgingModel;
use crate::error::{Error, Result};
use crate::ingest::CrossSection;
use crate::matrix::Matrix;

/// Per-person aging rates and the implied biological ages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix {
    pub person_ids: Vec<String>,
    /// `n_persons x n_dims`, strictly positive.
    pub rates: Matrix,
    /// `rates[i, k] * t_scaled[i]`.
    pub biological_age: Matrix,
    /// Chronological age in years.
    pub age: Vec<f64>,
}

impl RateMatrix {
    pub fn new(person_ids: Vec<String>, rates: Matrix, age: Vec<f64>) -> Result<Self> {
        if rates.rows() != person_ids.len() || age.len() != person_ids.len() {
            return Err(Error::ShapeMismatch {
                what: "rate matrix rows",
                expected: person_ids.len(),
                found: rates.rows(),
            });
        }
        if rates.as_slice().iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidInput("rates must be positive and finite".into()));
        }
        let mut biological_age = rates.clone();
        for (i, a) in age.iter().enumerate() {
            let t = crate::t_scaled(*a);
            biological_age.row_mut(i).iter_mut().for_each(|v| *v *= t);
        }
        Ok(RateMatrix {
            person_ids,
            rates,
            biological_age,
            age,
        })
    }

    pub fn n_dims(&self) -> usize {
        self.rates.cols()
    }

    pub fn n_persons(&self) -> usize {
        self.rates.rows()
    }
}

fn check_features(model: &AgingModel, n: usize) -> Result<()> {
    if n != model.layout.n_features() {
        return Err(Error::ShapeMismatch {
            what: "feature row",
            expected: model.layout.n_features(),
            found: n,
        });
    }
    Ok(())
}

impl AgingModel {
    pub(crate) fn workspace(&self) -> Workspace {
        net(self).workspace()
    }

    /// Posterior mean and log-variance of `z` for one scaled feature row.
    pub fn encode(&self, x_scaled: &[f64], t_scaled: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        check_features(self, x_scaled.len())?;
        let mut ws = self.workspace();
        net(self).encode(x_scaled, t_scaled, &mut ws);
        Ok((ws.mu.clone(), ws.log_var.clone()))
    }

    /// Reconstructed scaled feature row for rates `r` at scaled age `t`.
    pub fn decode(&self, r: &[f64], t_scaled: f64) -> Result<Vec<f64>> {
        if r.len() != self.config.n_dims {
            return Err(Error::ShapeMismatch {
                what: "rate vector",
                expected: self.config.n_dims,
                found: r.len(),
            });
        }
        if r.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidInput("rates must be positive".into()));
        }
        let mut ws = self.workspace();
        ws.r.copy_from_slice(r);
        net(self).decode(t_scaled, &Prepared::new(&self.params), &mut ws);
        Ok(ws.xhat.clone())
    }
}

/// `r = exp(sigma_r * (mu + exp(log_var / 2) * noise))`.
pub fn sample_rates(mu: &[f64], log_var: &[f64], sigma_r: f64, noise: &[f64]) -> Result<Vec<f64>> {
    if mu.len() != log_var.len() || mu.len() != noise.len() {
        return Err(Error::ShapeMismatch {
            what: "posterior parameters",
            expected: mu.len(),
            found: log_var.len().min(noise.len()),
        });
    }
    Ok(mu
        .iter()
        .zip(log_var)
        .zip(noise)
        .map(|((m, lv), e)| {
            let sd = (0.5 * lv).exp();
            let z = if e.abs() > 0.0 { m + sd * e } else { *m };
            (sigma_r * z).exp()
        })
        .collect())
}

/// Rates from the posterior mean: `r = exp(sigma_r * mu)`.
pub fn infer_rates(model: &AgingModel, cs: &CrossSection) -> Result<RateMatrix> {
    let x = model.scale(cs)?;
    let t = cs.t_scaled();
    let n = cs.n_persons();
    let d = model.config.n_dims;
    let mut rates = Matrix::zeros(n, d);
    let net = net(model);
    let mut ws = net.workspace();
    for i in 0..n {
        net.encode(x.row(i), t[i], &mut ws);
        for (out, mu) in rates.row_mut(i).iter_mut().zip(&ws.mu) {
            *out = (model.config.sigma_r * mu).exp();
        }
    }
    RateMatrix::new(cs.person_ids.clone(), rates, cs.age.clone())
}

/// Scaled inputs and their posterior-mean reconstructions.
pub fn reconstruct(model: &AgingModel, cs: &CrossSection) -> Result<(Matrix, Matrix)> {
    let x = model.scale(cs)?;
    let t = cs.t_scaled();
    let net = net(model);
    let prep = Prepared::new(&model.params);
    let mut ws = net.workspace();
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        net.forward(x.row(i), t[i], None, &prep, &mut ws);
        out.row_mut(i).copy_from_slice(&ws.xhat);
    }
    Ok((x, out))
}
