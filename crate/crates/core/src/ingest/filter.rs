use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{ComponentSpec, LabObservation, OutlierBounds};
use crate::error::{Error, Result};

/// Per-component counts of dropped observations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionCounts {
    pub duplicates: usize,
    pub zero_not_allowed: usize,
    pub below_lower: usize,
    pub above_upper: usize,
    pub kept: usize,
}

impl ExclusionCounts {
    pub fn outliers(&self) -> usize {
        self.below_lower + self.above_upper
    }
}

#[derive(Debug, Clone)]
pub struct Filtered {
    pub kept: Vec<LabObservation>,
    pub exclusions: BTreeMap<String, ExclusionCounts>,
}

/// Drops exact duplicates, impossible zeros and values outside the
/// component's bounds. Surviving observations keep their input order.
pub fn filter_observations(
    obs: &[LabObservation],
    specs: &HashMap<String, ComponentSpec>,
    bounds: &HashMap<String, OutlierBounds>,
) -> Result<Filtered> {
    for o in obs {
        if !specs.contains_key(&o.component_id) || !bounds.contains_key(&o.component_id) {
            return Err(Error::UnknownComponent(o.component_id.clone()));
        }
        if !o.value.is_finite() {
            return Err(Error::NonFinite(format!(
                "observation of `{}` for person `{}`",
                o.component_id, o.person_id
            )));
        }
    }

    let mut seen: HashSet<(&str, &str, u64, chrono::NaiveDate)> = HashSet::new();
    let mut exclusions: BTreeMap<String, ExclusionCounts> = BTreeMap::new();
    let mut kept = Vec::with_capacity(obs.len());

    for o in obs {
        let counts = exclusions.entry(o.component_id.clone()).or_default();
        let key = (
            o.person_id.as_str(),
            o.component_id.as_str(),
            o.value.to_bits(),
            o.observed_at,
        );
        if !seen.insert(key) {
            counts.duplicates += 1;
            continue;
        }
        if o.value == 0.0 && !specs[&o.component_id].zero_allowed {
            counts.zero_not_allowed += 1;
            continue;
        }
        let b = &bounds[&o.component_id];
        if o.value < b.lower {
            counts.below_lower += 1;
            continue;
        }
        if o.value > b.upper {
            counts.above_upper += 1;
            continue;
        }
        counts.kept += 1;
        kept.push(o.clone());
    }

    Ok(Filtered { kept, exclusions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::FenceRule;
    use chrono::NaiveDate;

    fn obs(person: &str, value: f64, day: u32) -> LabObservation {
        LabObservation {
            person_id: person.into(),
            component_id: "c".into(),
            value,
            observed_at: NaiveDate::from_ymd_opt(2017, 3, day).unwrap(),
        }
    }

    fn setup(zero_allowed: bool) -> (HashMap<String, ComponentSpec>, HashMap<String, OutlierBounds>) {
        let mut spec = ComponentSpec::new("c", "u");
        spec.zero_allowed = zero_allowed;
        let b = OutlierBounds {
            lower: -1.0,
            upper: 10.0,
            rule_used_low: FenceRule::GlobalIqr,
            rule_used_high: FenceRule::GlobalIqr,
            degenerate: false,
        };
        (
            HashMap::from([("c".to_string(), spec)]),
            HashMap::from([("c".to_string(), b)]),
        )
    }

    #[test]
    fn drops_out_of_bounds() {
        let (specs, bounds) = setup(false);
        let input = vec![obs("a", -2.0, 1), obs("a", 3.0, 2), obs("b", 11.0, 1)];
        let f = filter_observations(&input, &specs, &bounds).unwrap();
        assert_eq!(f.kept, vec![obs("a", 3.0, 2)]);
        assert_eq!(f.exclusions["c"].below_lower, 1);
        assert_eq!(f.exclusions["c"].above_upper, 1);
    }

    #[test]
    fn zero_handling_depends_on_spec() {
        let input = vec![obs("a", 0.0, 1)];
        let (specs, bounds) = setup(false);
        assert!(filter_observations(&input, &specs, &bounds).unwrap().kept.is_empty());
        let (specs, bounds) = setup(true);
        assert_eq!(filter_observations(&input, &specs, &bounds).unwrap().kept.len(), 1);
    }

    #[test]
    fn exact_duplicates_collapse_and_order_is_stable() {
        let (specs, bounds) = setup(false);
        let input = vec![obs("b", 2.0, 5), obs("a", 1.0, 1), obs("b", 2.0, 5), obs("a", 4.0, 1)];
        let f = filter_observations(&input, &specs, &bounds).unwrap();
        assert_eq!(f.kept, vec![obs("b", 2.0, 5), obs("a", 1.0, 1), obs("a", 4.0, 1)]);
        assert_eq!(f.exclusions["c"].duplicates, 1);
    }

    #[test]
    fn unknown_component_rejects_batch() {
        let (specs, bounds) = setup(false);
        let mut o = obs("a", 1.0, 1);
        o.component_id = "zz".into();
        assert!(matches!(
            filter_observations(&[o], &specs, &bounds),
            Err(Error::UnknownComponent(c)) if c == "zz"
        ));
    }
}
