use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::aggregate::{MonthlyKey, MonthlyValues};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::month::Month;

/// Youngest age admitted to a cohort.
pub const MIN_COHORT_AGE: f64 = 40.0;

/// Scaling divides by the population (n) standard deviation.
pub const STD_CONVENTION: &str = "population";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub birth_date: NaiveDate,
    /// Binary sex covariate (0/1).
    pub sex: u8,
}

/// Person x component matrix of complete cases, with age (years) and sex
/// per row. Rows are ordered by person key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub person_ids: Vec<String>,
    pub component_ids: Vec<String>,
    pub values: Matrix,
    pub age: Vec<f64>,
    pub sex: Vec<u8>,
    /// Calendar month each row was taken from.
    pub window: Vec<Month>,
}

impl CrossSection {
    pub fn new(
        person_ids: Vec<String>,
        component_ids: Vec<String>,
        values: Matrix,
        age: Vec<f64>,
        sex: Vec<u8>,
        window: Vec<Month>,
    ) -> Result<Self> {
        let cs = CrossSection {
            person_ids,
            component_ids,
            values,
            age,
            sex,
            window,
        };
        cs.validate()?;
        Ok(cs)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.person_ids.len();
        for (what, len) in [
            ("values rows", self.values.rows()),
            ("age", self.age.len()),
            ("sex", self.sex.len()),
            ("window", self.window.len()),
        ] {
            if len != n {
                return Err(Error::ShapeMismatch {
                    what,
                    expected: n,
                    found: len,
                });
            }
        }
        if self.values.cols() != self.component_ids.len() {
            return Err(Error::ShapeMismatch {
                what: "values columns",
                expected: self.component_ids.len(),
                found: self.values.cols(),
            });
        }
        if self.values.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cross-section values".into()));
        }
        if self.age.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            return Err(Error::InvalidInput("ages must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn n_persons(&self) -> usize {
        self.person_ids.len()
    }

    pub fn n_components(&self) -> usize {
        self.component_ids.len()
    }

    /// Age rescaled to the model's time axis (years / 100).
    pub fn t_scaled(&self) -> Vec<f64> {
        self.age.iter().map(|a| crate::t_scaled(*a)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> CrossSection {
        CrossSection {
            person_ids: rows.iter().map(|&i| self.person_ids[i].clone()).collect(),
            component_ids: self.component_ids.clone(),
            values: self.values.select_rows(rows),
            age: rows.iter().map(|&i| self.age[i]).collect(),
            sex: rows.iter().map(|&i| self.sex[i]).collect(),
            window: rows.iter().map(|&i| self.window[i]).collect(),
        }
    }

    pub fn with_values(&self, values: Matrix) -> CrossSection {
        CrossSection {
            values,
            ..self.clone()
        }
    }
}

/// Outcome of assembling a cohort, with the counts of persons left out.
#[derive(Debug, Clone)]
pub struct CohortBuild {
    pub cross_section: CrossSection,
    pub incomplete: usize,
    pub under_age: usize,
    pub missing_demographics: usize,
}

fn age_at(birth: NaiveDate, month: Month) -> f64 {
    (month.first_day() - birth).num_days() as f64 / 365.25
}

/// Complete-case cross-section using each person's earliest month that has
/// every required component and in which the person is at least
/// [`MIN_COHORT_AGE`].
pub fn build_cross_section(
    agg: &MonthlyValues,
    required_components: &[String],
    demographics: &HashMap<String, Demographics>,
) -> Result<CohortBuild> {
    if required_components.is_empty() {
        return Err(Error::InvalidInput("no required components".into()));
    }
    let column: HashMap<&str, usize> = required_components
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    if column.len() != required_components.len() {
        return Err(Error::InvalidInput("duplicate required component".into()));
    }

    // person -> month -> row of optional values
    let mut months: BTreeMap<&str, BTreeMap<Month, Vec<Option<f64>>>> = BTreeMap::new();
    for (MonthlyKey { person_id, component_id, month }, &value) in agg {
        let Some(&col) = column.get(component_id.as_str()) else {
            continue;
        };
        months
            .entry(person_id.as_str())
            .or_default()
            .entry(*month)
            .or_insert_with(|| vec![None; required_components.len()])[col] = Some(value);
    }

    let mut person_ids = Vec::new();
    let mut rows = Vec::new();
    let mut ages = Vec::new();
    let mut sexes = Vec::new();
    let mut windows = Vec::new();
    let (mut incomplete, mut under_age, mut missing_demographics) = (0, 0, 0);

    let all_persons: BTreeSet<&str> = agg.keys().map(|k| k.person_id.as_str()).collect();
    for person in all_persons {
        let complete: Vec<(Month, Vec<f64>)> = months
            .get(person)
            .into_iter()
            .flatten()
            .filter_map(|(m, row)| {
                row.iter()
                    .copied()
                    .collect::<Option<Vec<f64>>>()
                    .map(|r| (*m, r))
            })
            .collect();
        if complete.is_empty() {
            incomplete += 1;
            continue;
        }
        let Some(demo) = demographics.get(person) else {
            missing_demographics += 1;
            continue;
        };
        let Some((month, row)) = complete
            .into_iter()
            .find(|(m, _)| age_at(demo.birth_date, *m) >= MIN_COHORT_AGE)
        else {
            under_age += 1;
            continue;
        };
        person_ids.push(person.to_string());
        ages.push(age_at(demo.birth_date, month));
        sexes.push(demo.sex);
        windows.push(month);
        rows.push(row);
    }

    if person_ids.is_empty() {
        return Err(Error::EmptyCohort(format!(
            "no person has all {} required components \
             ({incomplete} incomplete, {under_age} under age, {missing_demographics} without demographics)",
            required_components.len()
        )));
    }

    let values = Matrix::from_rows(&rows)?;
    let cross_section = CrossSection::new(
        person_ids,
        required_components.to_vec(),
        values,
        ages,
        sexes,
        windows,
    )?;
    Ok(CohortBuild {
        cross_section,
        incomplete,
        under_age,
        missing_demographics,
    })
}

/// Per-component standardization statistics fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub component_ids: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub std_convention: String,
}

impl Scaler {
    pub fn fit(cs: &CrossSection) -> Result<Self> {
        let m = cs.n_components();
        let n = cs.n_persons();
        if n == 0 {
            return Err(Error::EmptyCohort("cannot fit a scaler on zero rows".into()));
        }
        let mut mean = vec![0.0; m];
        for row in cs.values.iter_rows() {
            for (acc, v) in mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= n as f64);
        let mut var = vec![0.0; m];
        for row in cs.values.iter_rows() {
            for ((acc, v), mu) in var.iter_mut().zip(row).zip(&mean) {
                *acc += (v - mu) * (v - mu);
            }
        }
        let std: Vec<f64> = var.iter().map(|v| (v / n as f64).sqrt()).collect();
        let zero: Vec<String> = std
            .iter()
            .zip(&cs.component_ids)
            .filter(|(s, _)| !(**s > 0.0))
            .map(|(_, c)| c.clone())
            .collect();
        if !zero.is_empty() {
            return Err(Error::ZeroVariance(zero));
        }
        Ok(Scaler {
            component_ids: cs.component_ids.clone(),
            mean,
            std,
            std_convention: STD_CONVENTION.to_string(),
        })
    }

    fn check(&self, cs: &CrossSection) -> Result<()> {
        if cs.component_ids != self.component_ids {
            return Err(Error::InvalidInput(format!(
                "cross-section components {:?} do not match scaler components {:?}",
                cs.component_ids, self.component_ids
            )));
        }
        Ok(())
    }

    pub fn transform(&self, cs: &CrossSection) -> Result<CrossSection> {
        self.check(cs)?;
        let mut values = cs.values.clone();
        for r in 0..values.rows() {
            for ((v, mu), sd) in values.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - mu) / sd;
            }
        }
        Ok(cs.with_values(values))
    }

    pub fn inverse_transform(&self, cs: &CrossSection) -> Result<CrossSection> {
        self.check(cs)?;
        let mut values = cs.values.clone();
        for r in 0..values.rows() {
            for ((v, mu), sd) in values.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * sd + mu;
            }
        }
        Ok(cs.with_values(values))
    }
}

/// Standardizes every column to mean 0 and population std 1, returning the
/// fitted scaler so held-out data can reuse the training statistics.
pub fn standard_scale(cs: &CrossSection) -> Result<(CrossSection, Scaler)> {
    let scaler = Scaler::fit(cs)?;
    Ok((scaler.transform(cs)?, scaler))
}
