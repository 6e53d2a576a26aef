use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::nearest_rank_sorted;
use crate::vae::RateMatrix;

/// Fast and slow agers on one dimension, as row indices of the rate matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgerGroups {
    pub dim: usize,
    pub fast: Vec<usize>,
    pub slow: Vec<usize>,
    pub fast_cut: f64,
    pub slow_cut: f64,
    /// The two cuts coincide, so the groups overlap.
    pub degenerate: bool,
}

impl AgerGroups {
    pub fn fast_ids<'a>(&self, rates: &'a RateMatrix) -> BTreeSet<&'a str> {
        self.fast.iter().map(|i| rates.person_ids[*i].as_str()).collect()
    }

    pub fn slow_ids<'a>(&self, rates: &'a RateMatrix) -> BTreeSet<&'a str> {
        self.slow.iter().map(|i| rates.person_ids[*i].as_str()).collect()
    }
}

/// Nearest-rank percentile cuts: fast is `rate >= P_hi`, slow is `rate <= P_lo`.
pub fn ager_groups(rates: &RateMatrix, dim: usize, hi_pct: f64, lo_pct: f64) -> Result<AgerGroups> {
    if dim >= rates.n_dims() {
        return Err(Error::InvalidInput(format!(
            "dimension {dim} out of range for {} dimensions",
            rates.n_dims()
        )));
    }
    if !(0.0..=100.0).contains(&lo_pct) || !(0.0..=100.0).contains(&hi_pct) || lo_pct >= hi_pct {
        return Err(Error::InvalidInput(format!(
            "percentiles must satisfy 0 <= lo ({lo_pct}) < hi ({hi_pct}) <= 100"
        )));
    }
    if rates.n_persons() == 0 {
        return Err(Error::EmptyCohort("no persons in rate matrix".into()));
    }
    let col = rates.rates.column(dim);
    let mut sorted = col.clone();
    sorted.sort_by(f64::total_cmp);
    let fast_cut = nearest_rank_sorted(&sorted, hi_pct);
    let slow_cut = nearest_rank_sorted(&sorted, lo_pct);
    let fast = (0..col.len()).filter(|i| col[*i] >= fast_cut).collect();
    let slow = (0..col.len()).filter(|i| col[*i] <= slow_cut).collect();
    Ok(AgerGroups {
        dim,
        fast,
        slow,
        fast_cut,
        slow_cut,
        degenerate: fast_cut <= slow_cut,
    })
}

/// |a ∩ b| / |a ∪ b|; 0 when both are empty.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}
