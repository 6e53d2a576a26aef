//! Cleaning raw laboratory observations into complete-case cross-sections.
//!
//! The pipeline is `compute_outlier_bounds` per component, then
//! `filter_observations`, `aggregate_monthly`, `build_cross_section` and
//! finally `standard_scale`.

mod aggregate;
mod bounds;
mod cross_section;
mod filter;
pub mod io;
mod pipeline;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use aggregate::{aggregate_monthly, MonthlyKey, MonthlyValues};
pub use bounds::{compute_outlier_bounds, FenceConfig, FenceRule, OutlierBounds, QUANTILE_METHOD};
pub use cross_section::{
    build_cross_section, standard_scale, CohortBuild, CrossSection, Demographics, Scaler,
    MIN_COHORT_AGE, STD_CONVENTION,
};
pub use filter::{filter_observations, ExclusionCounts, Filtered};
pub use pipeline::{clean, CleanReport, Cleaned};

/// Multiplicative conversion from a foreign unit into the component's
/// standard unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitConversion {
    pub from_unit: String,
    pub factor: f64,
}

/// Reference information for one laboratory component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub component_id: String,
    pub unit: String,
    pub critical_low: Option<f64>,
    pub critical_high: Option<f64>,
    pub normal_low: Option<f64>,
    pub normal_high: Option<f64>,
    /// Whether a result of exactly zero is physically possible.
    pub zero_allowed: bool,
    #[serde(default)]
    pub conversions: Vec<UnitConversion>,
}

impl ComponentSpec {
    pub fn new(component_id: impl Into<String>, unit: impl Into<String>) -> Self {
        ComponentSpec {
            component_id: component_id.into(),
            unit: unit.into(),
            critical_low: None,
            critical_high: None,
            normal_low: None,
            normal_high: None,
            zero_allowed: false,
            conversions: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let id = &self.component_id;
        if self.unit.trim().is_empty() {
            return Err(Error::InvalidInput(format!("component `{id}` has an empty unit")));
        }
        for (name, lo, hi) in [
            ("critical", self.critical_low, self.critical_high),
            ("normal", self.normal_low, self.normal_high),
        ] {
            if let (Some(lo), Some(hi)) = (lo, hi) {
                if !(lo < hi) {
                    return Err(Error::InvalidInput(format!(
                        "component `{id}`: {name} range [{lo}, {hi}] is not increasing"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Converts `value` reported in `unit` into the standard unit.
    pub fn to_standard_unit(&self, value: f64, unit: &str) -> Result<f64> {
        if unit == self.unit || unit.is_empty() {
            return Ok(value);
        }
        self.conversions
            .iter()
            .find(|c| c.from_unit == unit)
            .map(|c| value * c.factor)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "component `{}`: no conversion from unit `{unit}` to `{}`",
                    self.component_id, self.unit
                ))
            })
    }
}

/// One laboratory result, already expressed in the component's standard unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabObservation {
    pub person_id: String,
    pub component_id: String,
    pub value: f64,
    pub observed_at: NaiveDate,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        let mut spec = ComponentSpec::new("hgb", "g/dL");
        assert!(spec.validate().is_ok());
        spec.normal_low = Some(14.0);
        spec.normal_high = Some(12.0);
        assert!(spec.validate().is_err());
        let empty_unit = ComponentSpec::new("x", " ");
        assert!(empty_unit.validate().is_err());
    }

    #[test]
    fn unit_conversion_table() {
        let mut spec = ComponentSpec::new("glucose", "mg/dL");
        spec.conversions.push(UnitConversion {
            from_unit: "mmol/L".into(),
            factor: 18.0,
        });
        assert_eq!(spec.to_standard_unit(5.0, "mmol/L").unwrap(), 90.0);
        assert_eq!(spec.to_standard_unit(90.0, "mg/dL").unwrap(), 90.0);
        assert!(spec.to_standard_unit(1.0, "g/L").is_err());
    }
}
