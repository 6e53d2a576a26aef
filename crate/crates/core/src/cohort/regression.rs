use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Coefficients with `|beta| > SEPARATION_LIMIT` are treated as diverging.
pub const SEPARATION_LIMIT: f64 = 30.0;
pub const GRADIENT_TOL: f64 = 1e-8;
pub const MAX_IRLS_ITERATIONS: usize = 100;
const RANK_TOL: f64 = 1e-10;

/// Named covariate columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub names: Vec<String>,
    pub x: Matrix,
}

impl Design {
    /// Intercept-only design for `n` rows.
    pub fn with_intercept(n: usize) -> Self {
        Design {
            names: vec!["intercept".into()],
            x: Matrix::from_vec(n, 1, vec![1.0; n]).expect("shape"),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, values: &[f64]) -> Result<()> {
        if values.len() != self.x.rows() {
            return Err(Error::ShapeMismatch {
                what: "covariate column",
                expected: self.x.rows(),
                found: values.len(),
            });
        }
        let (n, p) = (self.x.rows(), self.x.cols());
        let mut data = Vec::with_capacity(n * (p + 1));
        for (i, v) in values.iter().enumerate() {
            data.extend_from_slice(self.x.row(i));
            data.push(*v);
        }
        self.x = Matrix::from_vec(n, p + 1, data)?;
        self.names.push(name.into());
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    fn to_na(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.x.rows(), self.x.cols(), self.x.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub p_values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sigma2: f64,
    pub df: usize,
}

fn check_rank(r: &DMatrix<f64>) -> Result<()> {
    let diag: Vec<f64> = (0..r.ncols()).map(|i| r[(i, i)].abs()).collect();
    let scale = diag.iter().cloned().fold(0.0, f64::max);
    let dependent: Vec<usize> = diag
        .iter()
        .enumerate()
        .filter(|(_, d)| **d <= RANK_TOL * scale.max(1.0))
        .map(|(i, _)| i)
        .collect();
    if dependent.is_empty() {
        Ok(())
    } else {
        Err(Error::RankDeficient(dependent))
    }
}

/// `(R^T R)^-1` from the upper-triangular QR factor.
fn inverse_gram(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = r.ncols();
    let r_inv = r
        .clone()
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::RankDeficient((0..p).collect()))?;
    Ok(&r_inv * r_inv.transpose())
}

/// Least squares by QR; standard errors from the residual variance.
pub fn ols_fit(y: &[f64], design: &Design) -> Result<OlsFit> {
    let (n, p) = (design.n(), design.x.cols());
    if y.len() != n {
        return Err(Error::ShapeMismatch {
            what: "response",
            expected: n,
            found: y.len(),
        });
    }
    if n <= p {
        return Err(Error::TooFew {
            what: "observations for OLS",
            needed: p + 1,
            got: n,
        });
    }
    crate::numeric::check_finite(y, "OLS response")?;
    let x = design.to_na();
    let qr = x.clone().qr();
    let r = qr.r();
    check_rank(&r)?;
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient((0..p).collect()))?;
    let resid = &yv - &x * &beta;
    let df = n - p;
    let sigma2 = resid.norm_squared() / df as f64;
    let cov = inverse_gram(&r)? * sigma2;
    let std_errors: Vec<f64> = (0..p).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let t_dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let p_values = beta
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| {
            if *se > 0.0 {
                (2.0 * t_dist.sf((b / se).abs())).min(1.0)
            } else if *b == 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok(OlsFit {
        names: design.names.clone(),
        coefficients: beta.iter().copied().collect(),
        std_errors,
        p_values,
        residuals: resid.iter().copied().collect(),
        sigma2,
        df,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub p_values: Vec<f64>,
    pub odds_ratios: Vec<f64>,
    /// 95% Wald interval for each odds ratio.
    pub or_low: Vec<f64>,
    pub or_high: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Maximum-likelihood logistic regression by Newton-Raphson (IRLS).
pub fn logistic_fit(y: &[bool], design: &Design) -> Result<LogisticFit> {
    let (n, p) = (design.n(), design.x.cols());
    if y.len() != n {
        return Err(Error::ShapeMismatch {
            what: "response",
            expected: n,
            found: y.len(),
        });
    }
    let positives = y.iter().filter(|v| **v).count();
    if positives == 0 || positives == n {
        return Err(Error::InvalidInput(
            "logistic outcome needs both classes present".into(),
        ));
    }
    let x = design.to_na();
    check_rank(&x.clone().qr().r())?;
    let yv = DVector::from_iterator(n, y.iter().map(|v| f64::from(u8::from(*v))));
    let mut beta = DVector::zeros(p);
    let mut iterations = 0;
    let (gradient_norm, hessian) = loop {
        let eta = &x * &beta;
        let mu = eta.map(sigmoid);
        let grad = x.transpose() * (&yv - &mu);
        let gradient_norm = grad.norm();
        let w = mu.map(|m| m * (1.0 - m));
        let mut xw = x.clone();
        for (mut row, wi) in xw.row_iter_mut().zip(w.iter()) {
            row *= *wi;
        }
        let hessian: DMatrix<f64> = x.transpose() * xw;
        if gradient_norm <= GRADIENT_TOL || iterations >= MAX_IRLS_ITERATIONS {
            break (gradient_norm, hessian);
        }
        let step = hessian
            .clone()
            .cholesky()
            .map(|c| c.solve(&grad))
            .or_else(|| hessian.clone().lu().solve(&grad))
            .ok_or_else(|| Error::RankDeficient((0..p).collect()))?;
        beta += step;
        iterations += 1;
        if let Some((column, b)) = beta.iter().enumerate().find(|(_, b)| b.abs() > SEPARATION_LIMIT || !b.is_finite()) {
            return Err(Error::PerfectSeparation {
                column: design.names[column].clone(),
                magnitude: b.abs(),
            });
        }
    };
    let cov = hessian
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| hessian.try_inverse())
        .ok_or_else(|| Error::RankDeficient((0..p).collect()))?;
    let std_errors: Vec<f64> = (0..p).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let normal = Normal::standard();
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let p_values = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| if *se > 0.0 { (2.0 * normal.sf((b / se).abs())).min(1.0) } else { 1.0 })
        .collect();
    let z = normal.inverse_cdf(0.975);
    Ok(LogisticFit {
        names: design.names.clone(),
        odds_ratios: coefficients.iter().map(|b| b.exp()).collect(),
        or_low: coefficients.iter().zip(&std_errors).map(|(b, s)| (b - z * s).exp()).collect(),
        or_high: coefficients.iter().zip(&std_errors).map(|(b, s)| (b + z * s).exp()).collect(),
        coefficients,
        std_errors,
        p_values,
        iterations,
        gradient_norm,
        converged: gradient_norm <= GRADIENT_TOL,
    })
}
