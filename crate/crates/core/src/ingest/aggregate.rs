use std::collections::BTreeMap;

use chrono::NaiveDate;

use super::LabObservation;
use crate::month::Month;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthlyKey {
    pub person_id: String,
    pub component_id: String,
    pub month: Month,
}

pub type MonthlyValues = BTreeMap<MonthlyKey, f64>;

/// One representative value per (person, component, calendar month): the
/// highest value among the observations on the latest date of that month.
pub fn aggregate_monthly(obs: &[LabObservation]) -> MonthlyValues {
    let mut best: BTreeMap<MonthlyKey, (NaiveDate, f64)> = BTreeMap::new();
    for o in obs {
        let key = MonthlyKey {
            person_id: o.person_id.clone(),
            component_id: o.component_id.clone(),
            month: Month::of(o.observed_at),
        };
        best.entry(key)
            .and_modify(|(date, value)| {
                if o.observed_at > *date || (o.observed_at == *date && o.value > *value) {
                    *date = o.observed_at;
                    *value = o.value;
                }
            })
            .or_insert((o.observed_at, o.value));
    }
    best.into_iter().map(|(k, (_, v))| (k, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(day: u32, value: f64) -> LabObservation {
        LabObservation {
            person_id: "p".into(),
            component_id: "c".into(),
            value,
            observed_at: NaiveDate::from_ymd_opt(2018, 6, day).unwrap(),
        }
    }

    fn only_value(agg: &MonthlyValues) -> f64 {
        assert_eq!(agg.len(), 1);
        *agg.values().next().unwrap()
    }

    #[test]
    fn latest_date_wins() {
        assert_eq!(only_value(&aggregate_monthly(&[obs(3, 7.0), obs(20, 5.0)])), 5.0);
        assert_eq!(only_value(&aggregate_monthly(&[obs(20, 5.0), obs(3, 7.0)])), 5.0);
    }

    #[test]
    fn highest_breaks_same_day_ties() {
        assert_eq!(only_value(&aggregate_monthly(&[obs(20, 5.0), obs(20, 9.0)])), 9.0);
        assert_eq!(only_value(&aggregate_monthly(&[obs(20, 9.0), obs(20, 5.0)])), 9.0);
    }

    #[test]
    fn single_value_is_itself() {
        assert_eq!(only_value(&aggregate_monthly(&[obs(1, 3.25)])), 3.25);
    }

    #[test]
    fn months_are_separate_keys() {
        let mut later = obs(1, 1.0);
        later.observed_at = NaiveDate::from_ymd_opt(2018, 7, 1).unwrap();
        assert_eq!(aggregate_monthly(&[obs(1, 2.0), later]).len(), 2);
    }
}
