use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::grid::{GridResult, GridStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Candidates {
    pub selected: Vec<GridResult>,
    /// One line per dimension count that had no admissible model.
    pub warnings: Vec<String>,
}

fn rank(a: &GridResult, b: &GridResult) -> Ordering {
    let intra = |r: &GridResult| r.intra.unwrap_or(f64::INFINITY);
    let inter = |r: &GridResult| r.inter.unwrap_or(f64::NEG_INFINITY);
    intra(a)
        .total_cmp(&intra(b))
        .then_with(|| inter(b).total_cmp(&inter(a)))
        .then_with(|| a.config.learning_rate.total_cmp(&b.config.learning_rate))
        .then_with(|| a.hash.cmp(&b.hash))
}

/// Keeps, per dimension count, the `per_dim_count` admissible models with
/// the lowest intra-model similarity (ties: higher inter, then lower
/// learning rate).
pub fn select_candidates(results: &[GridResult], recon_min: f64, per_dim_count: usize) -> Result<Candidates> {
    if results.is_empty() {
        return Err(Error::InvalidInput("no grid results to select from".into()));
    }
    let mut groups: BTreeMap<usize, Vec<&GridResult>> = BTreeMap::new();
    for r in results {
        groups.entry(r.config.n_dims).or_default();
    }
    for r in results {
        let admissible = r.status == GridStatus::Ok
            && r.intra.is_some()
            && r.reconstruction.is_some_and(|x| x >= recon_min);
        if admissible {
            groups.get_mut(&r.config.n_dims).expect("group").push(r);
        }
    }
    let mut selected = Vec::new();
    let mut warnings = Vec::new();
    for (n_dims, mut group) in groups {
        if group.is_empty() {
            warnings.push(format!(
                "no model with {n_dims} dimensions reached reconstruction {recon_min}"
            ));
            continue;
        }
        group.sort_by(|a, b| rank(a, b));
        selected.extend(group.into_iter().take(per_dim_count).cloned());
    }
    Ok(Candidates { selected, warnings })
}
