//! Diagnosis events and yearly cost records derived from planted outcomes.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{plant_outcomes, PlantConfig, PlantedOutcomes, SynthCohort};
use crate::cohort::{CostRecord, OutcomeEvent};
use crate::error::Result;
use crate::rng::{seeded, streams};

/// Outcome driven by the planted dimension.
pub const PLANTED_OUTCOME: &str = "planted";
/// Outcome independent of every rate.
pub const NULL_OUTCOME: &str = "null";
/// Cost type carrying the planted effect.
pub const PLANTED_COST: &str = "medical";
pub const NULL_COST: &str = "pharmacy";

/// Share of cases whose diagnosis precedes the lab window.
const PRIOR_FRACTION: f64 = 0.1;
const COST_YEARS: i32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthEvents {
    pub planted: PlantedOutcomes,
    pub null: PlantedOutcomes,
    pub diagnoses: Vec<OutcomeEvent>,
    pub costs: Vec<CostRecord>,
}

/// Planted and null outcomes for `cohort`, expressed as first-diagnosis
/// events around each person's lab window and costs split over years.
pub fn synth_events(cohort: &SynthCohort, plant: &PlantConfig) -> Result<SynthEvents> {
    let planted = plant_outcomes(&cohort.true_rates, plant)?;
    let null = plant_outcomes(
        &cohort.true_rates,
        &PlantConfig {
            strength: 0.0,
            cost_scale: 0.0,
            seed: plant.seed.wrapping_add(1),
            ..plant.clone()
        },
    )?;
    let cs = &cohort.cross_section;
    let mut rng = seeded(plant.seed, streams::EVENTS);
    let mut diagnoses = Vec::new();
    let mut costs = Vec::with_capacity(cs.n_persons() * 2 * COST_YEARS as usize);
    for i in 0..cs.n_persons() {
        for (outcome_id, draws) in [(PLANTED_OUTCOME, &planted), (NULL_OUTCOME, &null)] {
            if draws.outcome[i] {
                let offset = if rng.random_bool(PRIOR_FRACTION) {
                    -rng.random_range(0..24)
                } else {
                    rng.random_range(1..=36)
                };
                diagnoses.push(OutcomeEvent {
                    person_id: cs.person_ids[i].clone(),
                    outcome_id: outcome_id.to_string(),
                    first_diagnosis_month: cs.window[i].offset(offset),
                });
            }
        }
        for (cost_type, draws) in [(PLANTED_COST, &planted), (NULL_COST, &null)] {
            let weights: Vec<f64> = (0..COST_YEARS).map(|_| rng.random_range(0.5..1.5)).collect();
            let total: f64 = weights.iter().sum();
            for (year, w) in weights.iter().enumerate() {
                costs.push(CostRecord {
                    person_id: cs.person_ids[i].clone(),
                    cost_type: cost_type.to_string(),
                    year_offset: year as i32,
                    amount: draws.cost[i] * w / total,
                });
            }
        }
    }
    Ok(SynthEvents {
        planted,
        null,
        diagnoses,
        costs,
    })
}
