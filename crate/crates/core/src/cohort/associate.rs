use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::kmeans::ClusterModel;
use super::regression::{logistic_fit, ols_fit, Design, LogisticFit, OlsFit};
use crate::error::{Error, Result};
use crate::month::Month;
use crate::numeric::{mean, population_std};
use crate::vae::RateMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeEvent {
    pub person_id: String,
    pub outcome_id: String,
    pub first_diagnosis_month: Month,
}

/// Per-person covariates aligned with the rate matrix rows.
#[derive(Debug, Clone, Copy)]
pub struct Covariates<'a> {
    pub sex: &'a [u8],
    /// Month of the lab window each person's rates were inferred from.
    pub window: &'a [Month],
}

#[derive(Debug, Clone, Copy)]
pub enum Exposure<'a> {
    /// One z-scored covariate per rate dimension (odds ratio per SD).
    Dimensions,
    /// Cluster indicators against cluster 0.
    Clusters(&'a ClusterModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    pub outcome_id: String,
    pub n: usize,
    pub cases: usize,
    /// Persons diagnosed on or before their lab window, removed before fitting.
    pub excluded_prior: usize,
    pub sex_dropped: bool,
    pub fit: LogisticFit,
}

fn first_diagnoses<'a>(events: &'a [OutcomeEvent], outcome_id: &str) -> HashMap<&'a str, Month> {
    let mut first: HashMap<&str, Month> = HashMap::new();
    for e in events.iter().filter(|e| e.outcome_id == outcome_id) {
        first
            .entry(e.person_id.as_str())
            .and_modify(|m| *m = (*m).min(e.first_diagnosis_month))
            .or_insert(e.first_diagnosis_month);
    }
    first
}

fn zscore(xs: &[f64]) -> Vec<f64> {
    let m = mean(xs);
    let s = population_std(xs);
    if s > 0.0 {
        xs.iter().map(|x| (x - m) / s).collect()
    } else {
        vec![0.0; xs.len()]
    }
}

fn check_alignment(rates: &RateMatrix, cov: &Covariates<'_>) -> Result<()> {
    let n = rates.n_persons();
    if cov.sex.len() != n || cov.window.len() != n {
        return Err(Error::ShapeMismatch {
            what: "covariate rows",
            expected: n,
            found: cov.sex.len().min(cov.window.len()),
        });
    }
    Ok(())
}

/// Logistic model of incident diagnosis on the exposure, age and sex.
/// Persons already diagnosed at their lab window are excluded first.
pub fn associate_outcome(
    rates: &RateMatrix,
    cov: &Covariates<'_>,
    events: &[OutcomeEvent],
    outcome_id: &str,
    exposure: Exposure<'_>,
) -> Result<AssociationResult> {
    check_alignment(rates, cov)?;
    let first = first_diagnoses(events, outcome_id);
    let mut keep = Vec::new();
    let mut y = Vec::new();
    let mut excluded_prior = 0;
    for i in 0..rates.n_persons() {
        match first.get(rates.person_ids[i].as_str()) {
            Some(m) if *m <= cov.window[i] => excluded_prior += 1,
            Some(_) => {
                keep.push(i);
                y.push(true);
            }
            None => {
                keep.push(i);
                y.push(false);
            }
        }
    }
    let n = keep.len();
    let mut design = Design::with_intercept(n);
    match exposure {
        Exposure::Dimensions => {
            for k in 0..rates.n_dims() {
                let col: Vec<f64> = keep.iter().map(|i| rates.rates.get(*i, k)).collect();
                design.push(format!("r{}", k + 1), &zscore(&col))?;
            }
        }
        Exposure::Clusters(model) => {
            if model.assignments.len() != rates.n_persons() {
                return Err(Error::ShapeMismatch {
                    what: "cluster assignments",
                    expected: rates.n_persons(),
                    found: model.assignments.len(),
                });
            }
            for c in 1..model.k {
                let col: Vec<f64> = keep
                    .iter()
                    .map(|i| f64::from(u8::from(model.assignments[*i] == c)))
                    .collect();
                design.push(format!("cluster{c}"), &col)?;
            }
        }
    }
    let age: Vec<f64> = keep.iter().map(|i| rates.age[*i]).collect();
    design.push("age", &age)?;
    let sex: Vec<f64> = keep.iter().map(|i| f64::from(cov.sex[*i])).collect();
    let sex_dropped = sex.iter().all(|s| *s == sex[0]);
    if !sex_dropped {
        design.push("sex", &sex)?;
    }
    let fit = logistic_fit(&y, &design)?;
    Ok(AssociationResult {
        outcome_id: outcome_id.to_string(),
        n,
        cases: y.iter().filter(|v| **v).count(),
        excluded_prior,
        sex_dropped,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionOls {
    pub dim: usize,
    pub fit: OlsFit,
}

/// For each dimension, OLS of the rate on indicators of diagnoses present
/// at the lab window, controlling for age and sex.
pub fn dimension_ols(
    rates: &RateMatrix,
    cov: &Covariates<'_>,
    events: &[OutcomeEvent],
    outcome_ids: &[String],
) -> Result<Vec<DimensionOls>> {
    check_alignment(rates, cov)?;
    let n = rates.n_persons();
    let mut design = Design::with_intercept(n);
    for id in outcome_ids {
        let first = first_diagnoses(events, id);
        let col: Vec<f64> = (0..n)
            .map(|i| {
                let prevalent = first
                    .get(rates.person_ids[i].as_str())
                    .is_some_and(|m| *m <= cov.window[i]);
                f64::from(u8::from(prevalent))
            })
            .collect();
        design.push(id.clone(), &col)?;
    }
    design.push("age", &rates.age)?;
    let sex: Vec<f64> = cov.sex.iter().map(|s| f64::from(*s)).collect();
    if sex.iter().any(|s| *s != sex[0]) {
        design.push("sex", &sex)?;
    }
    (0..rates.n_dims())
        .map(|k| {
            Ok(DimensionOls {
                dim: k,
                fit: ols_fit(&rates.rates.column(k), &design)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::rng::seeded;
    use crate::synth::logistic;
    use rand::Rng as _;
    use rand_distr::{Distribution, LogNormal};

    fn cohort(n: usize, seed: u64) -> (RateMatrix, Vec<u8>, Vec<Month>) {
        let mut rng = seeded(seed, 0);
        let ln = LogNormal::new(0.0, 0.1).unwrap();
        let data: Vec<f64> = (0..2 * n).map(|_| ln.sample(&mut rng)).collect();
        let age: Vec<f64> = (0..n).map(|_| rng.random_range(40.0..90.0)).collect();
        let sex: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let rates = RateMatrix::new((0..n).map(|i| format!("P{i}")).collect(), Matrix::from_vec(n, 2, data).unwrap(), age).unwrap();
        (rates, sex, vec![Month::new(2018, 1).unwrap(); n])
    }

    #[test]
    fn prior_diagnoses_are_excluded_and_effect_found() {
        let (rates, sex, window) = cohort(20_000, 1);
        let mut rng = seeded(2, 0);
        let z = zscore(&rates.rates.column(0));
        let mut events = Vec::new();
        for (i, zi) in z.iter().enumerate() {
            if rng.random::<f64>() < logistic(-1.5 + 0.8 * zi) {
                let month = if i % 50 == 0 { Month::new(2017, 6).unwrap() } else { Month::new(2019, 3).unwrap() };
                events.push(OutcomeEvent { person_id: rates.person_ids[i].clone(), outcome_id: "D1".into(), first_diagnosis_month: month });
            }
        }
        let cov = Covariates { sex: &sex, window: &window };
        let r = associate_outcome(&rates, &cov, &events, "D1", Exposure::Dimensions).unwrap();
        let expected_prior = events.iter().filter(|e| e.first_diagnosis_month <= window[0]).count();
        assert_eq!(r.excluded_prior, expected_prior);
        assert_eq!(r.n + r.excluded_prior, 20_000);
        assert_eq!(r.fit.names, vec!["intercept", "r1", "r2", "age", "sex"]);
        assert!(r.fit.odds_ratios[1] > 1.8 && r.fit.p_values[1] < 1e-10);
        assert!((r.fit.odds_ratios[2] - 1.0).abs() < 0.1);
    }

    #[test]
    fn cluster_exposure_and_ols() {
        let (rates, sex, window) = cohort(2_000, 3);
        let model = crate::cohort::kmeans_fit(&rates.rates, 3, 0, 3).unwrap();
        let events: Vec<OutcomeEvent> = (0..2_000)
            .filter(|i| i % 3 == 0)
            .map(|i| OutcomeEvent {
                person_id: format!("P{i}"),
                outcome_id: "D2".into(),
                first_diagnosis_month: Month::new(if i % 2 == 0 { 2016 } else { 2020 }, 1).unwrap(),
            })
            .collect();
        let cov = Covariates { sex: &sex, window: &window };
        let r = associate_outcome(&rates, &cov, &events, "D2", Exposure::Clusters(&model)).unwrap();
        assert_eq!(r.fit.names[1..3], ["cluster1".to_string(), "cluster2".to_string()]);
        let ols = dimension_ols(&rates, &cov, &events, &["D2".into()]).unwrap();
        assert_eq!(ols.len(), 2);
        assert_eq!(ols[0].fit.names, vec!["intercept", "D2", "age", "sex"]);
    }
}
