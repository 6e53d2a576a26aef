use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{seeded, shuffle, streams, Rng};

pub const MAX_ITERATIONS: usize = 300;
/// Silhouette is computed on a seeded subsample above this many points.
pub const SILHOUETTE_SAMPLE: usize = 5000;
pub const DEFAULT_RESTARTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Mean silhouette; `None` when undefined (one cluster or all points equal).
    pub silhouette: Option<f64>,
    pub iterations: usize,
    /// Inertia after each assignment step.
    #[serde(default)]
    pub trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.iter_rows().enumerate() {
        let d = sq_dist(point, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn inertia_of(points: &Matrix, centroids: &Matrix, assignments: &[usize]) -> f64 {
    points
        .iter_rows()
        .zip(assignments)
        .map(|(p, c)| sq_dist(p, centroids.row(*c)))
        .sum()
}

fn plus_plus(points: &Matrix, k: usize, rng: &mut Rng) -> Matrix {
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, points.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = points.iter_rows().map(|p| sq_dist(p, centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut idx = n - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    idx = i;
                    break;
                }
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, p) in points.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centroids.row(c)));
        }
    }
    centroids
}

/// Lloyd iterations from the given centroids until the assignment stops
/// changing or `MAX_ITERATIONS` is reached.
pub fn lloyd(points: &Matrix, mut centroids: Matrix) -> ClusterModel {
    let (n, dim, k) = (points.rows(), points.cols(), centroids.rows());
    let mut assignments: Vec<usize> = points.iter_rows().map(|p| nearest(p, &centroids).0).collect();
    let mut iterations = 0;
    let mut trace = vec![inertia_of(points, &centroids, &assignments)];
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut sums = Matrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (p, c) in points.iter_rows().zip(&assignments) {
            counts[*c] += 1;
            sums.row_mut(*c).iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Reseed at the point farthest from its assigned centroid.
                let far = (0..n)
                    .max_by(|a, b| {
                        let da = sq_dist(points.row(*a), centroids.row(assignments[*a]));
                        let db = sq_dist(points.row(*b), centroids.row(assignments[*b]));
                        da.total_cmp(&db).then(b.cmp(a))
                    })
                    .expect("nonempty");
                counts[assignments[far]] -= 1;
                assignments[far] = c;
                counts[c] = 1;
                centroids.row_mut(c).copy_from_slice(points.row(far));
            }
        }
        let next: Vec<usize> = points.iter_rows().map(|p| nearest(p, &centroids).0).collect();
        trace.push(inertia_of(points, &centroids, &next));
        if next == assignments {
            break;
        }
        assignments = next;
    }
    let inertia = inertia_of(points, &centroids, &assignments);
    ClusterModel {
        k,
        centroids,
        assignments,
        inertia,
        silhouette: None,
        iterations,
        trace,
    }
}

/// Single-point moves (Hartigan) from a Lloyd solution: a point moves to
/// cluster `b` whenever `n_b/(n_b+1)·d_b² < n_a/(n_a−1)·d_a²`, i.e. whenever
/// the move lowers total inertia once both centroids shift. Escapes Lloyd
/// fixed points where a boundary point is nearer its own centroid but the
/// reassignment still pays off.
pub fn hartigan(points: &Matrix, mut model: ClusterModel) -> ClusterModel {
    let (n, dim, k) = (points.rows(), points.cols(), model.k);
    let mut counts = vec![0usize; k];
    let mut sums = Matrix::zeros(k, dim);
    for (p, c) in points.iter_rows().zip(&model.assignments) {
        counts[*c] += 1;
        sums.row_mut(*c).iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    let centroid = |sums: &Matrix, counts: &[usize], c: usize| -> Vec<f64> {
        sums.row(c).iter().map(|s| s / counts[c] as f64).collect()
    };
    let mut sweeps = 0;
    loop {
        let mut moved = false;
        for i in 0..n {
            let a = model.assignments[i];
            if counts[a] <= 1 {
                continue;
            }
            let p = points.row(i);
            let na = counts[a] as f64;
            let cost_out = na / (na - 1.0) * sq_dist(p, &centroid(&sums, &counts, a));
            let mut best = (a, cost_out);
            for b in (0..k).filter(|b| *b != a) {
                let nb = counts[b] as f64;
                let cost_in = if counts[b] == 0 {
                    0.0
                } else {
                    nb / (nb + 1.0) * sq_dist(p, &centroid(&sums, &counts, b))
                };
                // relative margin keeps rounding from cycling equal-cost moves
                if cost_in < best.1 - 1e-12 * (1.0 + cost_out) {
                    best = (b, cost_in);
                }
            }
            let b = best.0;
            if b != a {
                counts[a] -= 1;
                counts[b] += 1;
                sums.row_mut(a).iter_mut().zip(p).for_each(|(s, v)| *s -= v);
                sums.row_mut(b).iter_mut().zip(p).for_each(|(s, v)| *s += v);
                model.assignments[i] = b;
                moved = true;
            }
        }
        sweeps += 1;
        if !moved || sweeps >= MAX_ITERATIONS {
            break;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let m = centroid(&sums, &counts, c);
            model.centroids.row_mut(c).copy_from_slice(&m);
        }
    }
    model.inertia = inertia_of(points, &model.centroids, &model.assignments);
    if sweeps > 1 {
        model.trace.push(model.inertia);
    }
    model
}

/// Lloyd followed by Hartigan refinement.
fn local_search(points: &Matrix, init: Matrix) -> ClusterModel {
    hartigan(points, lloyd(points, init))
}

fn validate(points: &Matrix, k: usize) -> Result<()> {
    if k == 0 || k > points.rows() {
        return Err(Error::InvalidInput(format!(
            "k = {k} must lie in [1, {}]",
            points.rows()
        )));
    }
    if points.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("k-means input".into()));
    }
    Ok(())
}

fn restart_rng(seed: u64, restart: usize) -> Rng {
    seeded(seed, (streams::KMEANS << 32) | restart as u64)
}

fn best_of(runs: Vec<ClusterModel>) -> ClusterModel {
    // Earliest restart wins ties, keeping the result independent of scheduling.
    runs.into_iter()
        .reduce(|best, m| if m.inertia < best.inertia { m } else { best })
        .expect("at least one run")
}

/// k-means++ seeded Lloyd plus Hartigan refinement, best inertia over `restarts` independent runs.
pub fn kmeans_fit(points: &Matrix, k: usize, seed: u64, restarts: usize) -> Result<ClusterModel> {
    validate(points, k)?;
    let runs: Vec<ClusterModel> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| local_search(points, plus_plus(points, k, &mut restart_rng(seed, r))))
        .collect();
    let mut model = best_of(runs);
    model.silhouette = silhouette(points, &model.assignments, seed);
    Ok(model)
}

/// Mean silhouette width, exact up to `SILHOUETTE_SAMPLE` points.
pub fn silhouette(points: &Matrix, assignments: &[usize], seed: u64) -> Option<f64> {
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for a in assignments {
        sizes[*a] += 1;
    }
    if sizes.iter().filter(|s| **s > 0).count() < 2 {
        return None;
    }
    let first = points.row(0);
    if points.iter_rows().all(|p| p == first) {
        return None;
    }
    let mut idx: Vec<usize> = (0..points.rows()).collect();
    if idx.len() > SILHOUETTE_SAMPLE {
        shuffle(&mut idx, &mut seeded(seed, (streams::KMEANS << 32) | 0xFFFF_FFFF));
        idx.truncate(SILHOUETTE_SAMPLE);
        idx.sort_unstable();
    }
    let mut sizes = vec![0usize; k];
    for i in &idx {
        sizes[assignments[*i]] += 1;
    }
    let widths: Vec<f64> = idx
        .par_iter()
        .map(|&i| {
            let mut sums = vec![0.0; k];
            for &j in &idx {
                if j != i {
                    sums[assignments[j]] += sq_dist(points.row(i), points.row(j)).sqrt();
                }
            }
            let own = assignments[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|c| *c != own && sizes[*c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .collect();
    Some(widths.iter().sum::<f64>() / widths.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KDiagnostic {
    pub k: usize,
    pub inertia: f64,
    pub silhouette: Option<f64>,
}

/// Per-k inertia and silhouette. Each k also runs Lloyd from the previous
/// solution plus the worst-fit point, so inertia never increases with k.
pub fn choose_k(points: &Matrix, k_range: std::ops::RangeInclusive<usize>, seed: u64, restarts: usize) -> Result<Vec<KDiagnostic>> {
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo < 2 || hi >= points.rows() || lo > hi {
        return Err(Error::InvalidInput(format!(
            "k range {lo}..={hi} must lie within [2, {}]",
            points.rows().saturating_sub(1)
        )));
    }
    let mut out = Vec::new();
    let mut previous: Option<ClusterModel> = None;
    for k in lo..=hi {
        validate(points, k)?;
        let mut runs: Vec<ClusterModel> = (0..restarts.max(1))
            .into_par_iter()
            .map(|r| local_search(points, plus_plus(points, k, &mut restart_rng(seed ^ k as u64, r))))
            .collect();
        if let Some(prev) = &previous {
            let far = (0..points.rows())
                .max_by(|a, b| {
                    let da = sq_dist(points.row(*a), prev.centroids.row(prev.assignments[*a]));
                    let db = sq_dist(points.row(*b), prev.centroids.row(prev.assignments[*b]));
                    da.total_cmp(&db).then(b.cmp(a))
                })
                .expect("nonempty");
            let mut init = Matrix::zeros(k, points.cols());
            for c in 0..k - 1 {
                init.row_mut(c).copy_from_slice(prev.centroids.row(c));
            }
            init.row_mut(k - 1).copy_from_slice(points.row(far));
            runs.push(local_search(points, init));
        }
        let best = best_of(runs);
        out.push(KDiagnostic {
            k,
            inertia: best.inertia,
            silhouette: silhouette(points, &best.assignments, seed),
        });
        previous = Some(best);
    }
    Ok(out)
}

/// Advisory elbow: the interior k with the largest discrete curvature of
/// the inertia curve normalized to [0, 1] on both axes.
pub fn elbow_by_curvature(diags: &[KDiagnostic]) -> Option<usize> {
    if diags.len() < 3 {
        return None;
    }
    let max = diags.iter().map(|d| d.inertia).fold(f64::NEG_INFINITY, f64::max);
    let min = diags.iter().map(|d| d.inertia).fold(f64::INFINITY, f64::min);
    if !(max > min) {
        return None;
    }
    let y: Vec<f64> = diags.iter().map(|d| (d.inertia - min) / (max - min)).collect();
    let h = 1.0 / (diags.len() - 1) as f64;
    let mut best: Option<(usize, f64)> = None;
    for i in 1..diags.len() - 1 {
        let d1 = (y[i + 1] - y[i - 1]) / (2.0 * h);
        let d2 = (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h);
        let kappa = d2.abs() / (1.0 + d1 * d1).powf(1.5);
        if best.is_none_or(|(_, b)| kappa > b) {
            best = Some((diags[i].k, kappa));
        }
    }
    best.map(|(k, _)| k)
}
