use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::numeric::{mean, mid_ranks, tie_sizes};

/// Exact Mann-Whitney is used when the smaller sample is below this size
/// (and the pooled size is at most `EXACT_MAX_TOTAL`).
pub const EXACT_MIN_CUTOVER: usize = 8;
pub const EXACT_MAX_TOTAL: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    MannWhitney,
    KruskalWallis,
    ConoverPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    /// Holm-Bonferroni adjusted p-value, when part of a family.
    pub adjusted_p: Option<f64>,
    pub exact: bool,
    /// Zero variance made the statistic uninformative; `p_value` is 1.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    /// First sample tends to be smaller.
    Less,
    /// First sample tends to be larger.
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MwMethod {
    Auto,
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwOptions {
    pub alternative: Alternative,
    pub continuity: bool,
    pub method: MwMethod,
}

impl Default for MwOptions {
    fn default() -> Self {
        MwOptions {
            alternative: Alternative::TwoSided,
            continuity: true,
            method: MwMethod::Auto,
        }
    }
}

fn combine(alt: Alternative, less: f64, greater: f64) -> f64 {
    match alt {
        Alternative::Less => less,
        Alternative::Greater => greater,
        Alternative::TwoSided => (2.0 * less.min(greater)).min(1.0),
    }
    .clamp(0.0, 1.0)
}

/// Counts of subsets of size `k` by sum of doubled mid-ranks.
fn subset_sum_counts(doubled: &[usize], k: usize) -> Vec<f64> {
    let max_sum: usize = {
        let mut d = doubled.to_vec();
        d.sort_unstable_by(|a, b| b.cmp(a));
        d.iter().take(k).sum()
    };
    let width = max_sum + 1;
    let mut dp = vec![0.0f64; (k + 1) * width];
    dp[0] = 1.0;
    for &r in doubled {
        for j in (1..=k).rev() {
            let (lower, upper) = dp.split_at_mut(j * width);
            let prev = &lower[(j - 1) * width..];
            let cur = &mut upper[..width];
            for s in (r..width).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    dp[k * width..].to_vec()
}

/// Mann-Whitney U for `a` against the pooled sample, two-sided, with
/// continuity correction on the normal approximation.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<TestResult> {
    mann_whitney_with(a, b, &MwOptions::default())
}

pub fn mann_whitney_with(a: &[f64], b: &[f64], opts: &MwOptions) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooFew {
            what: "observations in each Mann-Whitney sample",
            needed: 1,
            got: 0,
        });
    }
    crate::numeric::check_finite(a, "Mann-Whitney sample")?;
    crate::numeric::check_finite(b, "Mann-Whitney sample")?;
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = mid_ranks(&pooled);
    let ra: f64 = ranks[..na].iter().sum();
    let u = ra - (na * (na + 1)) as f64 / 2.0;
    let exact = match opts.method {
        MwMethod::Exact => true,
        MwMethod::Asymptotic => false,
        MwMethod::Auto => na.min(nb) < EXACT_MIN_CUTOVER && n <= EXACT_MAX_TOTAL,
    };
    let ties = tie_sizes(&pooled);
    let all_tied = ties.len() == 1;
    if exact {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let small_is_a = na <= nb;
        let k = na.min(nb);
        let counts = subset_sum_counts(&doubled, k);
        let total: f64 = counts.iter().sum();
        let w_small: usize = if small_is_a {
            doubled[..na].iter().sum()
        } else {
            doubled[na..].iter().sum()
        };
        let le: f64 = counts[..=w_small].iter().sum::<f64>() / total;
        let ge: f64 = counts[w_small..].iter().sum::<f64>() / total;
        // Small W for `a` means `a` is shifted down.
        let (less, greater) = if small_is_a { (le, ge) } else { (ge, le) };
        return Ok(TestResult {
            test: TestKind::MannWhitney,
            statistic: u,
            p_value: combine(opts.alternative, less, greater),
            adjusted_p: None,
            exact: true,
            degenerate: all_tied,
        });
    }
    let mu = (na * nb) as f64 / 2.0;
    let tie_term: f64 = ties.iter().map(|t| (t * t * t - t) as f64).sum::<f64>() / (n as f64 * (n as f64 - 1.0));
    let var = (na * nb) as f64 / 12.0 * ((n + 1) as f64 - tie_term);
    if !(var > 0.0) {
        return Ok(TestResult {
            test: TestKind::MannWhitney,
            statistic: u,
            p_value: 1.0,
            adjusted_p: None,
            exact: false,
            degenerate: true,
        });
    }
    let sd = var.sqrt();
    let cc = if opts.continuity { 0.5 } else { 0.0 };
    let normal = Normal::standard();
    let less = normal.cdf((u - mu + cc) / sd);
    let greater = normal.sf((u - mu - cc) / sd);
    let p = match opts.alternative {
        Alternative::TwoSided => {
            let z = ((u - mu).abs() - cc).max(0.0) / sd;
            (2.0 * normal.sf(z)).min(1.0)
        }
        alt => combine(alt, less, greater),
    };
    Ok(TestResult {
        test: TestKind::MannWhitney,
        statistic: u,
        p_value: p,
        adjusted_p: None,
        exact: false,
        degenerate: false,
    })
}

fn check_groups(groups: &[Vec<f64>], what: &'static str) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::TooFew {
            what,
            needed: 2,
            got: groups.len(),
        });
    }
    if let Some(i) = groups.iter().position(Vec::is_empty) {
        return Err(Error::InvalidInput(format!("group {i} is empty")));
    }
    for g in groups {
        crate::numeric::check_finite(g, "rank-test sample")?;
    }
    Ok(())
}

/// Kruskal-Wallis H with tie correction; chi-squared p-value on g - 1 df.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    check_groups(groups, "groups for Kruskal-Wallis")?;
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let ties = tie_sizes(&pooled);
    if ties.len() == 1 {
        return Err(Error::Undefined(
            "Kruskal-Wallis H with all observations identical".into(),
        ));
    }
    let ranks = mid_ranks(&pooled);
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h_raw = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);
    let correction = 1.0 - ties.iter().map(|t| (t * t * t - t) as f64).sum::<f64>() / (n * n * n - n);
    let h = h_raw / correction;
    let chi = ChiSquared::new((groups.len() - 1) as f64).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(TestResult {
        test: TestKind::KruskalWallis,
        statistic: h,
        p_value: chi.sf(h.max(0.0)).clamp(0.0, 1.0),
        adjusted_p: None,
        exact: false,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConoverPair {
    pub a: usize,
    pub b: usize,
    pub result: TestResult,
}

/// Pairwise squared-ranks dispersion comparisons with Holm adjustment.
/// Each observation is replaced by the squared mid-rank of its absolute
/// deviation from its group mean; pairs are compared with a t statistic
/// on N - k degrees of freedom.
pub fn conover_posthoc(groups: &[Vec<f64>]) -> Result<Vec<ConoverPair>> {
    check_groups(groups, "groups for Conover post-hoc")?;
    let k = groups.len();
    let deviations: Vec<f64> = groups
        .iter()
        .flat_map(|g| {
            let m = mean(g);
            g.iter().map(move |x| (x - m).abs())
        })
        .collect();
    let n = deviations.len();
    let nf = n as f64;
    let a: Vec<f64> = mid_ranks(&deviations).iter().map(|r| r * r).collect();
    let mut sums = Vec::with_capacity(k);
    let mut offset = 0;
    for g in groups {
        sums.push(a[offset..offset + g.len()].iter().sum::<f64>());
        offset += g.len();
    }
    let a_bar = a.iter().sum::<f64>() / nf;
    let d2 = if n > 1 {
        (a.iter().map(|v| v * v).sum::<f64>() - nf * a_bar * a_bar) / (nf - 1.0)
    } else {
        0.0
    };
    let t_omnibus = if d2 > 0.0 {
        (sums.iter().zip(groups).map(|(s, g)| s * s / g.len() as f64).sum::<f64>() - nf * a_bar * a_bar) / d2
    } else {
        0.0
    };
    let df = nf - k as f64;
    let pooled_var = if df > 0.0 { d2 * (nf - 1.0 - t_omnibus) / df } else { 0.0 };
    let t_dist = if df > 0.0 {
        Some(StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidInput(e.to_string()))?)
    } else {
        None
    };
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let (ni, nj) = (groups[i].len() as f64, groups[j].len() as f64);
            let diff = sums[i] / ni - sums[j] / nj;
            let denom = (pooled_var * (1.0 / ni + 1.0 / nj)).sqrt();
            let (statistic, p_value, degenerate) = match &t_dist {
                Some(t) if denom > 0.0 && denom.is_finite() => {
                    let stat = diff / denom;
                    (stat, (2.0 * t.sf(stat.abs())).min(1.0), false)
                }
                _ => (0.0, 1.0, true),
            };
            pairs.push(ConoverPair {
                a: i,
                b: j,
                result: TestResult {
                    test: TestKind::ConoverPair,
                    statistic,
                    p_value,
                    adjusted_p: None,
                    exact: false,
                    degenerate,
                },
            });
        }
    }
    let raw: Vec<f64> = pairs.iter().map(|p| p.result.p_value).collect();
    for (p, adj) in pairs.iter_mut().zip(holm(&raw)) {
        p.result.adjusted_p = Some(adj);
    }
    Ok(pairs)
}

/// Holm-Bonferroni step-down: the i-th smallest p is multiplied by
/// `m - i + 1`, made monotone by a running maximum and capped at 1.
pub fn holm(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|a, b| p[*a].total_cmp(&p[*b]).then(a.cmp(b)));
    let mut out = vec![0.0; m];
    let mut running = 0.0f64;
    for (i, &idx) in order.iter().enumerate() {
        running = running.max(((m - i) as f64 * p[idx]).min(1.0));
        out[idx] = running;
    }
    out
}
