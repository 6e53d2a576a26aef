use serde::{Deserialize, Serialize};

use super::ComponentSpec;
use crate::error::{Error, Result};
use crate::numeric::{check_finite, quantile_sorted};

/// Quantiles are computed by linear interpolation between closest ranks.
pub const QUANTILE_METHOD: &str = "linear";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FenceRule {
    CriticalIqr,
    NormalIqr,
    GlobalIqr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FenceConfig {
    /// IQR multiplier for the whole-distribution fence.
    pub k_global: f64,
    /// IQR multiplier for the fences built from values outside the
    /// critical and normal ranges.
    pub k_range: f64,
}

impl Default for FenceConfig {
    fn default() -> Self {
        FenceConfig {
            k_global: 3.0,
            k_range: 1.5,
        }
    }
}

/// Validity interval for one component. Values outside `[lower, upper]`
/// are outliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierBounds {
    pub lower: f64,
    pub upper: f64,
    pub rule_used_low: FenceRule,
    pub rule_used_high: FenceRule,
    /// Set when the distribution had zero spread (or fences crossed) and
    /// the bounds collapsed onto the quartiles.
    pub degenerate: bool,
}

impl OutlierBounds {
    pub fn contains(&self, value: f64) -> bool {
        value >= self.lower && value <= self.upper
    }
}

struct Quartiles {
    q1: f64,
    q3: f64,
}

impl Quartiles {
    fn of_sorted(sorted: &[f64]) -> Self {
        Quartiles {
            q1: quantile_sorted(sorted, 0.25),
            q3: quantile_sorted(sorted, 0.75),
        }
    }

    fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Lower fence from the values strictly below `cut` and upper fence from
/// the values strictly above `cut_high`; `None` for an empty region.
fn region_fences(
    sorted: &[f64],
    cut_low: Option<f64>,
    cut_high: Option<f64>,
    k: f64,
) -> (Option<f64>, Option<f64>) {
    let lower = cut_low.and_then(|cut| {
        let end = sorted.partition_point(|&v| v < cut);
        (end > 0).then(|| {
            let q = Quartiles::of_sorted(&sorted[..end]);
            q.q1 - k * q.iqr()
        })
    });
    let upper = cut_high.and_then(|cut| {
        let start = sorted.partition_point(|&v| v <= cut);
        (start < sorted.len()).then(|| {
            let q = Quartiles::of_sorted(&sorted[start..]);
            q.q3 + k * q.iqr()
        })
    });
    (lower, upper)
}

/// Tightest of the critical-range, normal-range and global IQR fences on
/// each side. Without reference ranges only the global fence applies.
pub fn compute_outlier_bounds(
    values: &[f64],
    spec: &ComponentSpec,
    cfg: FenceConfig,
) -> Result<OutlierBounds> {
    if values.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no values for component `{}`",
            spec.component_id
        )));
    }
    if !(cfg.k_global > 0.0) || !(cfg.k_range >= 0.0) {
        return Err(Error::InvalidInput("IQR factors must be positive".into()));
    }
    check_finite(values, &format!("values of component `{}`", spec.component_id))?;

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let global = Quartiles::of_sorted(&sorted);

    if global.iqr() <= 0.0 {
        return Ok(degenerate_bounds(&global));
    }

    let mut lower = (global.q1 - cfg.k_global * global.iqr(), FenceRule::GlobalIqr);
    let mut upper = (global.q3 + cfg.k_global * global.iqr(), FenceRule::GlobalIqr);

    let candidates = [
        (FenceRule::CriticalIqr, spec.critical_low, spec.critical_high),
        (FenceRule::NormalIqr, spec.normal_low, spec.normal_high),
    ];
    for (rule, lo_cut, hi_cut) in candidates {
        let (lo, hi) = region_fences(&sorted, lo_cut, hi_cut, cfg.k_range);
        if let Some(lo) = lo {
            if lo > lower.0 {
                lower = (lo, rule);
            }
        }
        if let Some(hi) = hi {
            if hi < upper.0 {
                upper = (hi, rule);
            }
        }
    }

    if !(lower.0 < upper.0) {
        // Range-based fences crossed; keep the global fence on both sides.
        return Ok(OutlierBounds {
            lower: global.q1 - cfg.k_global * global.iqr(),
            upper: global.q3 + cfg.k_global * global.iqr(),
            rule_used_low: FenceRule::GlobalIqr,
            rule_used_high: FenceRule::GlobalIqr,
            degenerate: true,
        });
    }

    Ok(OutlierBounds {
        lower: lower.0,
        upper: upper.0,
        rule_used_low: lower.1,
        rule_used_high: upper.1,
        degenerate: false,
    })
}

fn degenerate_bounds(q: &Quartiles) -> OutlierBounds {
    let guard = |x: f64| 4.0 * f64::EPSILON * x.abs().max(1.0);
    OutlierBounds {
        lower: q.q1 - guard(q.q1),
        upper: q.q3 + guard(q.q3),
        rule_used_low: FenceRule::GlobalIqr,
        rule_used_high: FenceRule::GlobalIqr,
        degenerate: true,
    }
}
