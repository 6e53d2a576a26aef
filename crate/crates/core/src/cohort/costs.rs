use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::groups::ager_groups;
use super::ranktests::{
    conover_posthoc, kruskal_wallis, mann_whitney, mann_whitney_with, Alternative, MwOptions, TestKind,
};
use crate::error::{Error, Result};
use crate::numeric::{mean, median};
use crate::vae::RateMatrix;

pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRecord {
    pub person_id: String,
    pub cost_type: String,
    pub year_offset: i32,
    pub amount: f64,
}

/// Total cost per person (aligned with `person_ids`, 0 for persons with no
/// records), optionally restricted to one cost type.
pub fn cumulative_costs(records: &[CostRecord], cost_type: Option<&str>, person_ids: &[String]) -> Vec<f64> {
    let mut totals: HashMap<&str, f64> = HashMap::new();
    for r in records {
        if cost_type.is_none_or(|t| t == r.cost_type) {
            *totals.entry(r.person_id.as_str()).or_default() += r.amount;
        }
    }
    person_ids
        .iter()
        .map(|p| totals.get(p.as_str()).copied().unwrap_or(0.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    FastVsSlow,
    AcrossDims,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub test: TestKind,
    pub group_a: String,
    /// Empty for the omnibus test.
    pub group_b: String,
    pub alternative: Option<Alternative>,
    pub statistic: f64,
    pub p_value: f64,
    pub adjusted_p: Option<f64>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub mode: CostMode,
    pub groups: Vec<GroupSummary>,
    pub tests: Vec<TestRow>,
    pub exclusions: BTreeMap<String, usize>,
}

fn summary(label: &str, values: &[f64]) -> GroupSummary {
    GroupSummary {
        label: label.to_string(),
        n: values.len(),
        mean: mean(values),
        median: median(values),
    }
}

fn pick(costs: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|i| costs[*i]).collect()
}

/// Rank-test comparison of cumulative costs between ager groups.
///
/// `FastVsSlow`: per dimension, two-sided Mann-Whitney of fast against slow.
/// `AcrossDims`: fast groups of all dimensions after dropping persons fast
/// on more than one dimension; Kruskal-Wallis, Conover pairs with Holm
/// adjustment, and one-sided Mann-Whitney for every ordered pair.
pub fn cost_compare(rates: &RateMatrix, costs: &[f64], mode: CostMode, hi_pct: f64, lo_pct: f64) -> Result<CostReport> {
    if costs.len() != rates.n_persons() {
        return Err(Error::ShapeMismatch {
            what: "cost vector",
            expected: rates.n_persons(),
            found: costs.len(),
        });
    }
    crate::numeric::check_finite(costs, "costs")?;
    let groups = (0..rates.n_dims())
        .map(|k| ager_groups(rates, k, hi_pct, lo_pct))
        .collect::<Result<Vec<_>>>()?;
    let mut exclusions = BTreeMap::new();
    let mut summaries = Vec::new();
    let mut tests = Vec::new();
    match mode {
        CostMode::FastVsSlow => {
            for g in &groups {
                let (fast_label, slow_label) = (format!("fast_r{}", g.dim + 1), format!("slow_r{}", g.dim + 1));
                if g.degenerate {
                    exclusions.insert(format!("degenerate_r{}", g.dim + 1), g.fast.len());
                }
                let fast = pick(costs, &g.fast);
                let slow = pick(costs, &g.slow);
                summaries.push(summary(&fast_label, &fast));
                summaries.push(summary(&slow_label, &slow));
                let r = mann_whitney(&fast, &slow)?;
                tests.push(TestRow {
                    test: TestKind::MannWhitney,
                    group_a: fast_label,
                    group_b: slow_label,
                    alternative: Some(Alternative::TwoSided),
                    statistic: r.statistic,
                    p_value: r.p_value,
                    adjusted_p: None,
                    significant: r.p_value < ALPHA,
                });
            }
        }
        CostMode::AcrossDims => {
            let mut fast_count = vec![0usize; rates.n_persons()];
            for g in &groups {
                for i in &g.fast {
                    fast_count[*i] += 1;
                }
            }
            let multi = fast_count.iter().filter(|c| **c > 1).count();
            exclusions.insert("multi_dimension_fast".into(), multi);
            let labels: Vec<String> = groups.iter().map(|g| format!("fast_r{}", g.dim + 1)).collect();
            let mut samples = Vec::new();
            for (g, label) in groups.iter().zip(&labels) {
                let rows: Vec<usize> = g.fast.iter().copied().filter(|i| fast_count[*i] == 1).collect();
                if rows.is_empty() {
                    return Err(Error::EmptyGroup {
                        group: label.clone(),
                        excluded: multi,
                    });
                }
                let values = pick(costs, &rows);
                summaries.push(summary(label, &values));
                samples.push(values);
            }
            let kw = kruskal_wallis(&samples)?;
            tests.push(TestRow {
                test: TestKind::KruskalWallis,
                group_a: labels.join(";"),
                group_b: String::new(),
                alternative: None,
                statistic: kw.statistic,
                p_value: kw.p_value,
                adjusted_p: None,
                significant: kw.p_value < ALPHA,
            });
            for pair in conover_posthoc(&samples)? {
                let adj = pair.result.adjusted_p;
                tests.push(TestRow {
                    test: TestKind::ConoverPair,
                    group_a: labels[pair.a].clone(),
                    group_b: labels[pair.b].clone(),
                    alternative: Some(Alternative::TwoSided),
                    statistic: pair.result.statistic,
                    p_value: pair.result.p_value,
                    adjusted_p: adj,
                    significant: adj.is_some_and(|p| p < ALPHA),
                });
            }
            let opts = MwOptions {
                alternative: Alternative::Greater,
                ..MwOptions::default()
            };
            for i in 0..samples.len() {
                for j in 0..samples.len() {
                    if i != j {
                        let r = mann_whitney_with(&samples[i], &samples[j], &opts)?;
                        tests.push(TestRow {
                            test: TestKind::MannWhitney,
                            group_a: labels[i].clone(),
                            group_b: labels[j].clone(),
                            alternative: Some(Alternative::Greater),
                            statistic: r.statistic,
                            p_value: r.p_value,
                            adjusted_p: None,
                            significant: r.p_value < ALPHA,
                        });
                    }
                }
            }
        }
    }
    Ok(CostReport {
        mode,
        groups: summaries,
        tests,
        exclusions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::rng::seeded;
    use rand::Rng as _;
    use rand_distr::{Distribution, LogNormal, StandardNormal};

    fn rates(n: usize, dims: usize, seed: u64) -> RateMatrix {
        let mut rng = seeded(seed, 0);
        let ln = LogNormal::new(0.0, 0.1).unwrap();
        let data: Vec<f64> = (0..n * dims).map(|_| ln.sample(&mut rng)).collect();
        RateMatrix::new((0..n).map(|i| format!("P{i}")).collect(), Matrix::from_vec(n, dims, data).unwrap(), vec![60.0; n]).unwrap()
    }

    #[test]
    fn cumulative_costs_sum_and_fill_zero() {
        let recs = vec![
            CostRecord { person_id: "a".into(), cost_type: "in".into(), year_offset: 0, amount: 3.0 },
            CostRecord { person_id: "a".into(), cost_type: "out".into(), year_offset: 1, amount: 2.0 },
            CostRecord { person_id: "b".into(), cost_type: "out".into(), year_offset: 0, amount: 1.0 },
        ];
        let ids = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        assert_eq!(cumulative_costs(&recs, None, &ids), vec![5.0, 1.0, 0.0]);
        assert_eq!(cumulative_costs(&recs, Some("in"), &ids), vec![3.0, 0.0, 0.0]);
    }

    #[test]
    fn planted_cost_effect_on_first_dimension() {
        let r = rates(5_000, 2, 1);
        let mut rng = seeded(2, 0);
        let col = r.rates.column(0);
        let m = mean(&col);
        let costs: Vec<f64> = col.iter().map(|v| (8.0 + 5.0 * (v - m) + 0.5 * rng.sample::<f64, _>(StandardNormal)).exp()).collect();
        let rep = cost_compare(&r, &costs, CostMode::FastVsSlow, 90.0, 10.0).unwrap();
        assert!(rep.tests[0].significant);
        assert!(!rep.tests[1].significant);
        assert_eq!(rep.groups.len(), 4);
    }

    #[test]
    fn across_dims_drops_multi_fast_and_reports_tables() {
        let r = rates(3_000, 3, 5);
        let costs: Vec<f64> = (0..3_000).map(|i| if i % 4 == 0 { 0.0 } else { 100.0 + i as f64 }).collect();
        let rep = cost_compare(&r, &costs, CostMode::AcrossDims, 90.0, 10.0).unwrap();
        let groups = (0..3).map(|k| ager_groups(&r, k, 90.0, 10.0).unwrap()).collect::<Vec<_>>();
        let mut count = vec![0; 3_000];
        for g in &groups {
            for i in &g.fast {
                count[*i] += 1;
            }
        }
        assert_eq!(rep.exclusions["multi_dimension_fast"], count.iter().filter(|c| **c > 1).count());
        let kw = rep.tests.iter().filter(|t| t.test == TestKind::KruskalWallis).count();
        let conover = rep.tests.iter().filter(|t| t.test == TestKind::ConoverPair).count();
        let mw = rep.tests.iter().filter(|t| t.test == TestKind::MannWhitney).count();
        assert_eq!((kw, conover, mw), (1, 3, 6));
    }

    #[test]
    fn constant_zero_group_has_zero_median() {
        let r = rates(400, 1, 9);
        let col = r.rates.column(0);
        let mut sorted = col.clone();
        sorted.sort_by(f64::total_cmp);
        let cut = crate::numeric::nearest_rank_sorted(&sorted, 10.0);
        let costs: Vec<f64> = col.iter().map(|v| if *v <= cut { 0.0 } else { 50.0 + v }).collect();
        let rep = cost_compare(&r, &costs, CostMode::FastVsSlow, 90.0, 10.0).unwrap();
        assert_eq!(rep.groups[1].median, 0.0);
        assert!(rep.tests[0].p_value.is_finite());
    }

    #[test]
    fn null_costs_rarely_reject() {
        let sims = 200;
        let mut rejections = 0;
        for s in 0..sims {
            let r = rates(600, 3, 100 + s);
            let mut rng = seeded(1_000 + s, 0);
            let costs: Vec<f64> = (0..600).map(|_| rng.random::<f64>() * 1000.0).collect();
            let rep = cost_compare(&r, &costs, CostMode::AcrossDims, 90.0, 10.0).unwrap();
            rejections += usize::from(rep.tests[0].significant);
        }
        assert!(rejections as f64 <= 0.1 * sims as f64, "{rejections} of {sims}");
    }

    #[test]
    fn empty_group_after_exclusions_is_an_error() {
        // Two dimensions with identical rates: every fast person is fast twice.
        let n = 50;
        let col: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 / 100.0).collect();
        let data: Vec<f64> = col.iter().flat_map(|v| [*v, *v]).collect();
        let r = RateMatrix::new((0..n).map(|i| format!("P{i}")).collect(), Matrix::from_vec(n, 2, data).unwrap(), vec![60.0; n]).unwrap();
        let err = cost_compare(&r, &vec![1.0; n], CostMode::AcrossDims, 90.0, 10.0).unwrap_err();
        // Rank ceil(0.9 * 50) = 45, so ranks 45..=50 are fast on both dimensions.
        assert!(matches!(err, Error::EmptyGroup { excluded: 6, .. }));
    }
}
