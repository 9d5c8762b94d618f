//! Forecast scoring, the Beta-Bernoulli baseline and spectral community
//! detection on learned logit matrices.

use nalgebra::{DMatrix, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{logit_matrix, SnapshotSequence};

/// Scores and binary labels for a set of candidate pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoredPairs {
    pub pairs: Vec<(usize, usize)>,
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

impl ScoredPairs {
    pub fn push(&mut self, pair: (usize, usize), score: f64, label: bool) {
        self.pairs.push(pair);
        self.scores.push(score);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Candidate pairs of an `N x N` score matrix against a truth snapshot:
    /// ordered `i != j` when directed, `i < j` otherwise.
    pub fn from_matrices(scores: &DMatrix<f64>, truth: &DMatrix<u8>, directed: bool) -> Result<Self> {
        if scores.shape() != truth.shape() || !scores.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "score matrix {:?} vs truth {:?}",
                scores.shape(),
                truth.shape()
            )));
        }
        let n = scores.nrows();
        let mut out = ScoredPairs::default();
        for i in 0..n {
            for j in 0..n {
                if i == j || (!directed && j < i) {
                    continue;
                }
                out.push((i, j), scores[(i, j)], truth[(i, j)] != 0);
            }
        }
        Ok(out)
    }
}

/// Area under the ROC curve via the Mann-Whitney statistic; ties between a
/// positive and a negative score earn half credit.
pub fn auc(scored: &ScoredPairs) -> Result<f64> {
    auc_from(&scored.scores, &scored.labels)
}

pub fn auc_from(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc { positives, negatives });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // sum of mid-ranks (1-based) of the positives
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let mid = (start + end + 1) as f64 / 2.0;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i]).count();
        rank_sum += mid * pos_in_group as f64;
        start = end;
    }
    let p = positives as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Per-pair posterior mean `(count + 1) / (T + 2)` under a uniform prior on
/// the edge probability. Zero diagonal.
pub fn bas_baseline(snapshots: &SnapshotSequence) -> Result<DMatrix<f64>> {
    if snapshots.is_empty() {
        return Err(Error::InvalidSnapshots("baseline needs at least one snapshot".into()));
    }
    let n = snapshots.n_nodes();
    let mut counts = DMatrix::<u32>::zeros(n, n);
    for a in snapshots.snapshots() {
        counts += a.map(u32::from);
    }
    let denom = (snapshots.horizon() + 2) as f64;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            f64::from(counts[(i, j)] + 1) / denom
        }
    }))
}

/// AUC of a probability (or any score) matrix against one observed snapshot.
pub fn evaluate_forecast(probs: &DMatrix<f64>, truth: &DMatrix<u8>, directed: bool) -> Result<f64> {
    auc(&ScoredPairs::from_matrices(probs, truth, directed)?)
}

/// Logit matrix for community detection; the diagonal holds the
/// off-diagonal mean so it is neutral after centring.
pub fn score_matrix(z: &DMatrix<f64>, theta: &[Matrix2<f64>], directed: bool) -> DMatrix<f64> {
    let mut s = logit_matrix(z, theta, directed);
    let mean = off_diagonal_mean(&s);
    for i in 0..s.nrows() {
        s[(i, i)] = mean;
    }
    s
}

fn off_diagonal_mean(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += m[(i, j)];
            }
        }
    }
    total / (n * (n - 1)) as f64
}

/// Community labels for one timestep, numbered by first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunityAssignment {
    pub labels: Vec<usize>,
    pub timestep: usize,
    pub n_clusters: usize,
}

impl CommunityAssignment {
    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    /// Number of distinct communities actually used.
    pub fn n_used(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }
}

pub const KMEANS_RESTARTS: usize = 20;
const KMEANS_MAX_ITER: usize = 300;

/// Spectral clustering of a logit matrix into `n_clusters` groups.
///
/// The affinity is `exp(A - mean)` (off-diagonal mean), symmetrised, and
/// the rows of the `C` leading eigenvectors of the symmetric normalised
/// Laplacian are normalised and clustered with k-means++.
pub fn community_detect(
    logits: &DMatrix<f64>,
    n_clusters: usize,
    timestep: usize,
    seed: u64,
) -> Result<CommunityAssignment> {
    let n = logits.nrows();
    if !logits.is_square() {
        return Err(Error::DimensionMismatch(format!("logit matrix is {:?}", logits.shape())));
    }
    if n_clusters < 2 || n_clusters > n {
        return Err(Error::InvalidClusters(format!("need 2 <= C <= N, got C={n_clusters} N={n}")));
    }
    let mean = off_diagonal_mean(logits);
    let w = logits.map(|v| (v - mean).exp());
    let w = (&w + w.transpose()) * 0.5;
    let inv_sqrt_deg: Vec<f64> = w.row_iter().map(|r| 1.0 / r.sum().sqrt()).collect();
    let lap = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - inv_sqrt_deg[i] * w[(i, j)] * inv_sqrt_deg[j]
    });
    let eig = lap
        .try_symmetric_eigen(1e-14, 10_000)
        .ok_or(Error::EigenNonConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut emb = DMatrix::from_fn(n, n_clusters, |i, c| eig.eigenvectors[(i, order[c])]);
    for mut row in emb.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let labels = kmeans(&emb, n_clusters, KMEANS_RESTARTS, seed);
    Ok(CommunityAssignment {
        labels: relabel(&labels),
        timestep,
        n_clusters,
    })
}

fn relabel(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Lloyd's algorithm with k-means++ seeding; returns the labelling with
/// the lowest inertia over `restarts` runs.
pub fn kmeans(points: &DMatrix<f64>, k: usize, restarts: usize, seed: u64) -> Vec<usize> {
    let rows: Vec<Vec<f64>> = points.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let (inertia, labels) = lloyd(&rows, k, &mut rng);
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, labels));
        }
    }
    best.expect("at least one restart").1
}

fn lloyd(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (f64, Vec<usize>) {
    let n = rows.len();
    let dim = rows[0].len();

    // k-means++ seeding
    let mut centers: Vec<Vec<f64>> = vec![rows[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = rows
            .iter()
            .map(|p| centers.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centers.push(rows[pick].clone());
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, p) in rows.iter().enumerate() {
            let nearest = (0..k)
                .min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b])))
                .expect("k >= 1");
            if labels[i] != nearest {
                labels[i] = nearest;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // reseed an empty cluster at the point farthest from its centre
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&rows[a], &centers[labels[a]]).total_cmp(&sq_dist(&rows[b], &centers[labels[b]]))
                    })
                    .expect("n >= 1");
                centers[c] = rows[far].clone();
            } else {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let inertia = rows.iter().zip(&labels).map(|(p, &l)| sq_dist(p, &centers[l])).sum();
    (inertia, labels)
}

/// Adjusted Rand index between two labellings of the same nodes.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labellings differ in length");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&v| c2(v)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Per-timestep AUC plus the unweighted mean over timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct AucReport {
    /// `(timestep, auc)`, timesteps 1-based.
    pub rows: Vec<(usize, f64)>,
}

impl AucReport {
    pub fn mean(&self) -> f64 {
        if self.rows.is_empty() {
            return f64::NAN;
        }
        self.rows.iter().map(|r| r.1).sum::<f64>() / self.rows.len() as f64
    }
}
