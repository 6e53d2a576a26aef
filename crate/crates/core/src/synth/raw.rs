//! Raw laboratory feeds behind a synthetic cross-section.
//!
//! Each person's window month carries the cross-section value of every
//! component on one day. Around it the feed adds the noise cleaning has to
//! undo: earlier same-month results that the latest one overrides, exact
//! duplicates, gross outliers on the window day, and an incomplete panel
//! in the month before the window.

use chrono::{Days, NaiveDate};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SynthCohort;
use crate::error::{Error, Result};
use crate::ingest::{ComponentSpec, Demographics, LabObservation};
use crate::numeric::{mean, population_std};
use crate::rng::{seeded, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawConfig {
    /// Chance of an extra earlier result in the window month.
    pub revisit_rate: f64,
    pub duplicate_rate: f64,
    /// Chance of a gross outlier reported alongside the real result.
    pub outlier_rate: f64,
    /// Chance of a partial panel in the month before the window.
    pub partial_month_rate: f64,
    pub seed: u64,
}

impl Default for RawConfig {
    fn default() -> Self {
        RawConfig {
            revisit_rate: 0.2,
            duplicate_rate: 0.02,
            outlier_rate: 0.002,
            partial_month_rate: 0.05,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawLabs {
    pub observations: Vec<LabObservation>,
    pub specs: Vec<ComponentSpec>,
    pub demographics: Vec<(String, Demographics)>,
    /// Number of outlier results injected.
    pub outliers: usize,
    pub duplicates: usize,
}

/// Birth date that puts the person at `age` years on the first day of the
/// window month (to the nearest day).
fn birth_date(window_start: NaiveDate, age: f64) -> Result<NaiveDate> {
    let days = (age * 365.25).round() as u64;
    window_start
        .checked_sub_days(Days::new(days))
        .ok_or_else(|| Error::InvalidInput(format!("age {age} out of calendar range")))
}

fn on_day(month_start: NaiveDate, day: u32) -> NaiveDate {
    month_start
        .checked_add_days(Days::new(u64::from(day - 1)))
        .expect("day within month")
}

pub fn raw_labs(cohort: &SynthCohort, cfg: &RawConfig) -> Result<RawLabs> {
    for (name, p) in [
        ("revisit_rate", cfg.revisit_rate),
        ("duplicate_rate", cfg.duplicate_rate),
        ("outlier_rate", cfg.outlier_rate),
        ("partial_month_rate", cfg.partial_month_rate),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("{name} must lie in [0, 1]")));
        }
    }
    let cs = &cohort.cross_section;
    let m = cs.n_components();
    let spread: Vec<f64> = (0..m)
        .map(|j| population_std(&cs.values.column(j)).max(1e-6))
        .collect();
    let centre: Vec<f64> = (0..m).map(|j| mean(&cs.values.column(j))).collect();

    let mut rng = seeded(cfg.seed, streams::RAW_LABS);
    let mut observations = Vec::with_capacity(cs.n_persons() * m * 5 / 4);
    let mut demographics = Vec::with_capacity(cs.n_persons());
    let (mut outliers, mut duplicates) = (0, 0);
    for i in 0..cs.n_persons() {
        let person = &cs.person_ids[i];
        let start = cs.window[i].first_day();
        demographics.push((
            person.clone(),
            Demographics {
                birth_date: birth_date(start, cs.age[i])?,
                sex: cs.sex[i],
            },
        ));
        let mut push = |c: usize, value: f64, date: NaiveDate| {
            observations.push(LabObservation {
                person_id: person.clone(),
                component_id: cs.component_ids[c].clone(),
                value,
                observed_at: date,
            })
        };

        if rng.random_bool(cfg.partial_month_rate) {
            let prev = cs.window[i].offset(-1).first_day();
            let skip = rng.random_range(0..m);
            for j in (0..m).filter(|j| *j != skip) {
                let z: f64 = rng.sample(StandardNormal);
                push(j, cs.values.get(i, j) + 0.5 * spread[j] * z, on_day(prev, 15));
            }
        }

        let day = rng.random_range(2..=28);
        for j in 0..m {
            let value = cs.values.get(i, j);
            if rng.random_bool(cfg.revisit_rate) {
                let z: f64 = rng.sample(StandardNormal);
                let earlier = rng.random_range(1..day);
                push(j, value + 0.5 * spread[j] * z, on_day(start, earlier));
            }
            push(j, value, on_day(start, day));
            if rng.random_bool(cfg.duplicate_rate) {
                push(j, value, on_day(start, day));
                duplicates += 1;
            }
            if rng.random_bool(cfg.outlier_rate) {
                let extreme = centre[j] + spread[j] * rng.random_range(100.0..1000.0);
                push(j, extreme, on_day(start, day));
                outliers += 1;
            }
        }
    }

    let specs = cs
        .component_ids
        .iter()
        .map(|c| {
            let mut spec = ComponentSpec::new(c.clone(), "u");
            spec.zero_allowed = true;
            spec
        })
        .collect();
    Ok(RawLabs {
        observations,
        specs,
        demographics,
        outliers,
        duplicates,
    })
}
