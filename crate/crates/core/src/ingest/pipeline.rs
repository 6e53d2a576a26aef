use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{
    aggregate_monthly, build_cross_section, compute_outlier_bounds, filter_observations, ComponentSpec,
    CrossSection, Demographics, ExclusionCounts, FenceConfig, LabObservation, OutlierBounds, Scaler,
    QUANTILE_METHOD,
};
use crate::error::{Error, Result};

/// What cleaning removed and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    pub quantile_method: String,
    pub fence: FenceConfig,
    pub n_observations: usize,
    pub bounds: BTreeMap<String, OutlierBounds>,
    pub exclusions: BTreeMap<String, ExclusionCounts>,
    pub persons_incomplete: usize,
    pub persons_under_age: usize,
    pub persons_missing_demographics: usize,
    pub persons_kept: usize,
}

#[derive(Debug, Clone)]
pub struct Cleaned {
    pub cross_section: CrossSection,
    pub scaler: Scaler,
    pub report: CleanReport,
}

/// Bounds, filtering, monthly aggregation and complete-case assembly over
/// `components` (in that column order). Bounds are fitted on every
/// observation of a component, duplicates included.
pub fn clean(
    obs: &[LabObservation],
    specs: &[ComponentSpec],
    components: &[String],
    demographics: &HashMap<String, Demographics>,
    fence: FenceConfig,
) -> Result<Cleaned> {
    let spec_map: HashMap<String, ComponentSpec> = specs
        .iter()
        .map(|s| s.validate().map(|_| (s.component_id.clone(), s.clone())))
        .collect::<Result<_>>()?;
    for c in components {
        if !spec_map.contains_key(c) {
            return Err(Error::UnknownComponent(c.clone()));
        }
    }

    let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for o in obs {
        values.entry(o.component_id.as_str()).or_default().push(o.value);
    }
    let mut bounds = HashMap::new();
    for (component, vals) in &values {
        let spec = spec_map
            .get(*component)
            .ok_or_else(|| Error::UnknownComponent(component.to_string()))?;
        bounds.insert(component.to_string(), compute_outlier_bounds(vals, spec, fence)?);
    }
    for c in components {
        if !bounds.contains_key(c) {
            return Err(Error::EmptyCohort(format!("no observations of required component `{c}`")));
        }
    }

    let filtered = filter_observations(obs, &spec_map, &bounds)?;
    let agg = aggregate_monthly(&filtered.kept);
    let build = build_cross_section(&agg, components, demographics)?;
    let scaler = Scaler::fit(&build.cross_section)?;
    let report = CleanReport {
        quantile_method: QUANTILE_METHOD.to_string(),
        fence,
        n_observations: obs.len(),
        bounds: bounds.into_iter().collect(),
        exclusions: filtered.exclusions,
        persons_incomplete: build.incomplete,
        persons_under_age: build.under_age,
        persons_missing_demographics: build.missing_demographics,
        persons_kept: build.cross_section.n_persons(),
    };
    Ok(Cleaned {
        cross_section: build.cross_section,
        scaler,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn obs(p: &str, c: &str, v: f64, day: u32) -> LabObservation {
        LabObservation {
            person_id: p.into(),
            component_id: c.into(),
            value: v,
            observed_at: NaiveDate::from_ymd_opt(2017, 3, day).unwrap(),
        }
    }

    fn demo() -> HashMap<String, Demographics> {
        (0..6)
            .map(|i| {
                (
                    format!("p{i}"),
                    Demographics {
                        birth_date: NaiveDate::from_ymd_opt(1950 + i, 1, 1).unwrap(),
                        sex: (i % 2) as u8,
                    },
                )
            })
            .collect()
    }

    #[test]
    fn end_to_end_on_a_tiny_cohort() {
        let mut o = Vec::new();
        for i in 0..6 {
            o.push(obs(&format!("p{i}"), "a", 10.0 + i as f64, 5));
            o.push(obs(&format!("p{i}"), "b", 1.0 + 0.1 * i as f64, 5));
        }
        o.push(o[0].clone());
        let specs = [ComponentSpec::new("a", "u"), ComponentSpec::new("b", "u")];
        let out = clean(&o, &specs, &["a".into(), "b".into()], &demo(), FenceConfig::default()).unwrap();
        assert_eq!(out.cross_section.n_persons(), 6);
        assert_eq!(out.report.exclusions["a"].duplicates, 1);
        assert_eq!(out.cross_section.values.row(2), &[12.0, 1.2]);
    }

    #[test]
    fn required_component_without_spec_is_rejected() {
        let o = vec![obs("p0", "a", 1.0, 1)];
        let specs = [ComponentSpec::new("a", "u")];
        let err = clean(&o, &specs, &["zz".into()], &demo(), FenceConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownComponent(c) if c == "zz"));
    }
}
