use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::CrossSection;
use crate::numeric::spearman;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSelection {
    /// Spearman correlation of every feature with age.
    pub spearman: Vec<f64>,
    /// Selected feature indices, ordered by feature index.
    pub features: Vec<usize>,
    pub signs: Vec<f64>,
}

impl MonotoneSelection {
    pub fn remainder(&self) -> Vec<usize> {
        (0..self.spearman.len())
            .filter(|j| !self.features.contains(j))
            .collect()
    }
}

fn correlations(cs: &CrossSection) -> Result<Vec<f64>> {
    (0..cs.n_components())
        .map(|j| match spearman(&cs.values.column(j), &cs.age) {
            Err(Error::ConstantInput(_)) => Ok(0.0),
            other => other,
        })
        .collect()
}

fn finish(spearman: Vec<f64>, mut features: Vec<usize>) -> MonotoneSelection {
    features.sort_unstable();
    let signs = features
        .iter()
        .map(|&j| if spearman[j] < 0.0 { -1.0 } else { 1.0 })
        .collect();
    MonotoneSelection {
        spearman,
        features,
        signs,
    }
}

/// Features whose |Spearman correlation with age| is at least `threshold`.
pub fn select_monotone(cs: &CrossSection, threshold: f64) -> Result<MonotoneSelection> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidInput(format!(
            "monotone threshold {threshold} outside [0, 1]"
        )));
    }
    let rho = correlations(cs)?;
    let chosen = (0..rho.len()).filter(|&j| rho[j].abs() >= threshold).collect();
    Ok(finish(rho, chosen))
}

/// The `count` features with the largest |Spearman correlation with age|
/// (ties broken by feature order).
pub fn select_top_monotone(cs: &CrossSection, count: usize) -> Result<MonotoneSelection> {
    let rho = correlations(cs)?;
    if count > rho.len() {
        return Err(Error::InvalidInput(format!(
            "cannot select {count} monotone features out of {}",
            rho.len()
        )));
    }
    let mut order: Vec<usize> = (0..rho.len()).collect();
    order.sort_by(|&a, &b| rho[b].abs().total_cmp(&rho[a].abs()).then(a.cmp(&b)));
    order.truncate(count);
    Ok(finish(rho, order))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    fn cohort() -> crate::synth::SynthCohort {
        generate(&SynthConfig {
            n_persons: 20_000,
            n_dims: 2,
            n_features: 10,
            frac_monotone: 0.5,
            noise_std: 0.05,
            seed: 11,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn threshold_boundaries() {
        let c = cohort();
        let all = select_monotone(&c.cross_section, 0.0).unwrap();
        assert_eq!(all.features, (0..10).collect::<Vec<_>>());
        let none = select_monotone(&c.cross_section, 1.0).unwrap();
        assert!(none.features.is_empty());
        assert!(select_monotone(&c.cross_section, 1.5).is_err());
    }

    #[test]
    fn planted_monotone_features_recovered() {
        let c = cohort();
        let sel = select_monotone(&c.cross_section, 0.25).unwrap();
        assert_eq!(sel.features, c.monotone_features());
        for (j, sign) in sel.features.iter().zip(&sel.signs) {
            let crate::synth::FeatureGenerator::Monotone { sign: want, .. } = c.generator.features[*j]
            else {
                unreachable!()
            };
            assert_eq!(*sign, want);
        }
        let top = select_top_monotone(&c.cross_section, 5).unwrap();
        assert_eq!(top.features, c.monotone_features());
        assert_eq!(top.remainder(), vec![5, 6, 7, 8, 9]);
    }
}
