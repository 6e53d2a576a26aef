use std::collections::HashMap;

use agingrates_core::cohort::{ager_groups, mann_whitney_with, Alternative, MwOptions};
use agingrates_core::ingest::{clean, FenceConfig};
use agingrates_core::io::write_cross_section;
use agingrates_core::synth::{
    generate, plant_outcomes, raw_labs, synth_events, PlantConfig, RawConfig, NULL_OUTCOME, PLANTED_OUTCOME,
};
use agingrates_core::{RateMatrix, SynthConfig};

fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn sample_median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn rate_sampler_matches_its_distribution_at_scale() {
    let cfg = SynthConfig {
        n_persons: 100_000,
        n_features: 4,
        rate_log_std: 0.1,
        ..SynthConfig::default()
    };
    let cohort = generate(&cfg).unwrap();
    for k in 0..cfg.n_dims {
        let rates = cohort.true_rates.column(k);
        assert!(rates.iter().all(|r| *r > 0.0));
        let logs: Vec<f64> = rates.iter().map(|r| r.ln()).collect();
        let sd = sample_std(&logs);
        assert!((sd / 0.1 - 1.0).abs() < 0.05, "dim {k}: log std {sd}");
        let med = sample_median(&rates);
        assert!((med - 1.0).abs() < 0.02, "dim {k}: median {med}");
    }
}

#[test]
fn same_seed_writes_identical_bytes() {
    let cfg = SynthConfig {
        n_persons: 3000,
        ..SynthConfig::default()
    };
    let bytes = |cfg: &SynthConfig| {
        let mut out = Vec::new();
        write_cross_section(&mut out, &generate(cfg).unwrap().cross_section).unwrap();
        out
    };
    assert_eq!(bytes(&cfg), bytes(&cfg));
    assert_ne!(bytes(&cfg), bytes(&SynthConfig { seed: 1, ..cfg.clone() }));
}

#[test]
fn planted_effect_separates_fast_and_slow_deciles() {
    let cfg = SynthConfig {
        n_persons: 10_000,
        n_features: 4,
        ..SynthConfig::default()
    };
    let cohort = generate(&cfg).unwrap();
    let plant = PlantConfig {
        strength: 1.0,
        ..PlantConfig::default()
    };
    let out = plant_outcomes(&cohort.true_rates, &plant).unwrap();
    let cs = &cohort.cross_section;
    let rates = RateMatrix::new(cs.person_ids.clone(), cohort.true_rates.clone(), cs.age.clone()).unwrap();
    let groups = ager_groups(&rates, 0, 90.0, 10.0).unwrap();
    let rate_of = |rows: &[usize]| rows.iter().filter(|&&i| out.outcome[i]).count() as f64 / rows.len() as f64;
    assert!(rate_of(&groups.fast) > rate_of(&groups.slow));
    let cost = |rows: &[usize]| rows.iter().map(|&i| out.cost[i]).collect::<Vec<_>>();
    let test = mann_whitney_with(
        &cost(&groups.fast),
        &cost(&groups.slow),
        &MwOptions {
            alternative: Alternative::TwoSided,
            ..MwOptions::default()
        },
    )
    .unwrap();
    assert!(test.p_value < 0.05, "p = {}", test.p_value);
}

#[test]
fn cleaning_the_raw_feed_recovers_the_cross_section() {
    let cohort = generate(&SynthConfig {
        n_persons: 4000,
        ..SynthConfig::default()
    })
    .unwrap();
    let raw = raw_labs(
        &cohort,
        &RawConfig {
            outlier_rate: 0.01,
            ..RawConfig::default()
        },
    )
    .unwrap();
    assert!(raw.outliers > 0 && raw.duplicates > 0);
    let demo: HashMap<_, _> = raw.demographics.iter().cloned().collect();
    let cs = &cohort.cross_section;
    let out = clean(&raw.observations, &raw.specs, &cs.component_ids, &demo, FenceConfig::default()).unwrap();

    let removed_outliers: usize = out.report.exclusions.values().map(|e| e.outliers()).sum();
    let removed_duplicates: usize = out.report.exclusions.values().map(|e| e.duplicates).sum();
    assert!(removed_outliers >= raw.outliers);
    assert_eq!(removed_duplicates, raw.duplicates);
    // the global fence also trims genuine tails of skewed features
    assert!(out.cross_section.n_persons() as f64 >= 0.95 * cs.n_persons() as f64);

    let index: HashMap<&str, usize> = cs.person_ids.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    for (r, person) in out.cross_section.person_ids.iter().enumerate() {
        let i = index[person.as_str()];
        for (j, c) in cs.component_ids.iter().enumerate() {
            let truth = cs.values.get(i, j);
            // a fenced-out value falls back to an earlier result of the month
            if out.report.bounds[c].contains(truth) {
                assert_eq!(out.cross_section.values.get(r, j), truth);
            }
        }
        assert_eq!(out.cross_section.window[r], cs.window[i]);
        assert_eq!(out.cross_section.sex[r], cs.sex[i]);
        assert!((out.cross_section.age[r] - cs.age[i]).abs() < 1.0 / 365.0);
    }
}

#[test]
fn events_follow_the_planted_draws() {
    let cohort = generate(&SynthConfig {
        n_persons: 5000,
        n_features: 4,
        ..SynthConfig::default()
    })
    .unwrap();
    let ev = synth_events(&cohort, &PlantConfig::default()).unwrap();
    let cases = |id: &str| ev.diagnoses.iter().filter(|e| e.outcome_id == id).count();
    assert_eq!(cases(PLANTED_OUTCOME), ev.planted.outcome.iter().filter(|y| **y).count());
    assert_eq!(cases(NULL_OUTCOME), ev.null.outcome.iter().filter(|y| **y).count());

    let window: HashMap<&str, _> = cohort
        .cross_section
        .person_ids
        .iter()
        .zip(&cohort.cross_section.window)
        .map(|(p, w)| (p.as_str(), *w))
        .collect();
    let prior = ev
        .diagnoses
        .iter()
        .filter(|e| e.first_diagnosis_month <= window[e.person_id.as_str()])
        .count();
    assert!(prior > 0 && prior < ev.diagnoses.len() / 4);

    let mut totals: HashMap<(&str, &str), f64> = HashMap::new();
    for c in &ev.costs {
        *totals.entry((c.person_id.as_str(), c.cost_type.as_str())).or_default() += c.amount;
    }
    for (i, p) in cohort.cross_section.person_ids.iter().enumerate() {
        let total = totals[&(p.as_str(), "medical")];
        assert!((total - ev.planted.cost[i]).abs() <= 1e-9 * ev.planted.cost[i]);
    }
}
