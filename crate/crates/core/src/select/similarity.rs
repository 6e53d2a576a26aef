use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::CrossSection;
use crate::matrix::Matrix;
use crate::numeric::pearson;
use crate::vae::{infer_rates, reconstruct, AgingModel, RateMatrix};

/// Pearson correlation between the flattened held-out matrix (scaled with
/// the model's training scaler) and its posterior-mean reconstruction.
pub fn reconstruction_correlation(model: &AgingModel, held_out: &CrossSection) -> Result<f64> {
    let (x, xhat) = reconstruct(model, held_out)?;
    pearson(x.as_slice(), xhat.as_slice())
        .ok_or_else(|| Error::Undefined("reconstruction correlation of a constant matrix".into()))
}

/// Reconstruction correlation of each feature separately (`None` where a
/// column is constant).
pub fn per_feature_reconstruction(model: &AgingModel, held_out: &CrossSection) -> Result<Vec<Option<f64>>> {
    let (x, xhat) = reconstruct(model, held_out)?;
    Ok((0..x.cols())
        .map(|j| pearson(&x.column(j), &xhat.column(j)))
        .collect())
}

/// Pearson correlations between every feature (rows) and every rate
/// dimension (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub component_ids: Vec<String>,
    pub dim_count: usize,
    pub values: Matrix,
    /// `(feature, dim)` cells that were undefined (constant input) and set to 0.
    pub flagged: Vec<(usize, usize)>,
}

pub fn feature_rate_correlations(rates: &RateMatrix, cs: &CrossSection) -> Result<CorrelationMatrix> {
    if rates.person_ids != cs.person_ids {
        return Err(Error::InvalidInput(
            "rate matrix and cross-section rows are not aligned by person".into(),
        ));
    }
    let m = cs.n_components();
    let n = rates.n_dims();
    let mut values = Matrix::zeros(m, n);
    let mut flagged = Vec::new();
    let rate_cols: Vec<Vec<f64>> = (0..n).map(|k| rates.rates.column(k)).collect();
    for j in 0..m {
        let feature = cs.values.column(j);
        for (k, rate) in rate_cols.iter().enumerate() {
            match pearson(&feature, rate) {
                Some(c) => values.set(j, k, c),
                None => flagged.push((j, k)),
            }
        }
    }
    Ok(CorrelationMatrix {
        component_ids: cs.component_ids.clone(),
        dim_count: n,
        values,
        flagged,
    })
}

/// Feature x dimension indicator of `|c| >= threshold`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<bool>,
}

impl BinaryMatrix {
    pub fn from_columns(columns: &[Vec<bool>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::InvalidInput("binary columns differ in length".into()));
        }
        let mut data = vec![false; rows * columns.len()];
        for (k, col) in columns.iter().enumerate() {
            for (j, b) in col.iter().enumerate() {
                data[j * columns.len() + k] = *b;
            }
        }
        Ok(BinaryMatrix {
            rows,
            cols: columns.len(),
            data,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.cols + col]
    }

    pub fn column(&self, col: usize) -> Vec<bool> {
        (0..self.rows).map(|j| self.get(j, col)).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }
}

pub fn binarize(c: &CorrelationMatrix, delta: f64) -> Result<BinaryMatrix> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidInput(format!("threshold {delta} outside [0, 1]")));
    }
    Ok(BinaryMatrix {
        rows: c.values.rows(),
        cols: c.values.cols(),
        data: c.values.as_slice().iter().map(|v| v.abs() >= delta).collect(),
    })
}

/// |intersection| / |union| of two feature supports; 0 when both are empty.
pub fn pairwise_dim_similarity(a: &[bool], b: &[bool]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (mut both, mut either) = (0usize, 0usize);
    for (x, y) in a.iter().zip(b) {
        both += usize::from(*x && *y);
        either += usize::from(*x || *y);
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub a: usize,
    pub b: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub binary: BinaryMatrix,
    pub pairwise: Vec<PairScore>,
    /// Mean of the pairwise scores involving each dimension.
    pub per_dim: Vec<f64>,
    /// Mean of `per_dim`.
    pub intra_model: f64,
}

pub fn intra_model_similarity(b: &BinaryMatrix) -> Result<SimilarityReport> {
    let n = b.cols;
    if n < 2 {
        return Err(Error::TooFew {
            what: "rate dimensions for intra-model similarity",
            needed: 2,
            got: n,
        });
    }
    let columns: Vec<Vec<bool>> = (0..n).map(|k| b.column(k)).collect();
    let mut pairwise = Vec::new();
    let mut sums = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let score = pairwise_dim_similarity(&columns[i], &columns[j]);
            sums[i] += score;
            sums[j] += score;
            pairwise.push(PairScore { a: i, b: j, score });
        }
    }
    let per_dim: Vec<f64> = sums.iter().map(|s| s / (n - 1) as f64).collect();
    let intra_model = per_dim.iter().sum::<f64>() / n as f64;
    Ok(SimilarityReport {
        binary: b.clone(),
        pairwise,
        per_dim,
        intra_model,
    })
}

/// Largest dimension count handled by the exact assignment.
const MAX_EXACT_DIMS: usize = 20;

/// Mean score of a maximum-weight one-to-one matching between the
/// dimensions of two models. Exact (bitmask DP) up to `MAX_EXACT_DIMS`,
/// greedy on descending similarity beyond that.
fn matched_similarity(a: &BinaryMatrix, b: &BinaryMatrix) -> f64 {
    let (a, b) = if a.cols <= b.cols { (a, b) } else { (b, a) };
    if a.cols == 0 {
        return 0.0;
    }
    let cols_b: Vec<Vec<bool>> = (0..b.cols).map(|k| b.column(k)).collect();
    let scores: Vec<Vec<f64>> = (0..a.cols)
        .map(|i| {
            let ca = a.column(i);
            cols_b.iter().map(|cb| pairwise_dim_similarity(&ca, cb)).collect()
        })
        .collect();
    let total = if b.cols <= MAX_EXACT_DIMS {
        exact_assignment(&scores, b.cols)
    } else {
        greedy_assignment(&scores, b.cols)
    };
    total / a.cols as f64
}

fn exact_assignment(scores: &[Vec<f64>], nb: usize) -> f64 {
    // best[mask] = best total assigning the first popcount(mask) rows to the columns in mask.
    let mut best = vec![f64::NEG_INFINITY; 1 << nb];
    best[0] = 0.0;
    let mut out = f64::NEG_INFINITY;
    for mask in 0..(1usize << nb) {
        let cur = best[mask];
        if cur == f64::NEG_INFINITY {
            continue;
        }
        let row = mask.count_ones() as usize;
        if row == scores.len() {
            out = out.max(cur);
            continue;
        }
        for (j, s) in scores[row].iter().enumerate() {
            if mask & (1 << j) == 0 {
                let next = mask | (1 << j);
                if cur + s > best[next] {
                    best[next] = cur + s;
                }
            }
        }
    }
    out
}

fn greedy_assignment(scores: &[Vec<f64>], nb: usize) -> f64 {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(scores.len() * nb);
    for (i, row) in scores.iter().enumerate() {
        for (j, s) in row.iter().enumerate() {
            pairs.push((*s, i, j));
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; scores.len()];
    let mut used_b = vec![false; nb];
    let mut total = 0.0;
    for (s, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            total += s;
        }
    }
    total
}

/// Mean over model pairs of the matched cross-model dimension similarity.
pub fn inter_model_similarity(binaries: &[BinaryMatrix]) -> Result<f64> {
    if binaries.len() < 2 {
        return Err(Error::TooFew {
            what: "models for inter-model similarity",
            needed: 2,
            got: binaries.len(),
        });
    }
    if binaries.iter().any(|b| b.rows != binaries[0].rows) {
        return Err(Error::InvalidInput("models disagree on feature count".into()));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..binaries.len() {
        for j in i + 1..binaries.len() {
            total += matched_similarity(&binaries[i], &binaries[j]);
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Inter-model similarity of trained models evaluated on `cs`.
pub fn inter_model_similarity_of(models: &[AgingModel], cs: &CrossSection, delta: f64) -> Result<f64> {
    let binaries = models
        .iter()
        .map(|m| {
            let rates = infer_rates(m, cs)?;
            binarize(&feature_rate_correlations(&rates, cs)?, delta)
        })
        .collect::<Result<Vec<_>>>()?;
    inter_model_similarity(&binaries)
}
