//! The generative model for evolving networks.
//!
//! Each node `n` carries a vector of `K` latent attributes `z_n` in `(0, 1)`,
//! obtained by squashing unconstrained pre-attributes `psi_n` through a
//! sigmoid. Each attribute `k` owns a 2x2 interaction matrix `Theta_k`. The
//! logit of an edge `i -> j` is the sum over attributes of the expected value
//! of `Theta_k(x, y)` with `x ~ Bernoulli(z_ik)` and `y ~ Bernoulli(z_jk)`
//! drawn independently.
//!
//! Over time both `psi` and the flattened interaction matrices `theta_bar`
//! follow Gaussian random walks started from zero-mean Gaussian priors.

use nalgebra::{DMatrix, Matrix2};
use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of free entries in a flattened interaction matrix.
pub fn theta_dim(directed: bool) -> usize {
    if directed {
        4
    } else {
        3
    }
}

/// Model hyperparameters. All variances are squared scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub k: usize,
    /// Random-walk variance of the flattened interaction matrices.
    pub s_theta_sq: f64,
    /// Random-walk variance of the node pre-attributes.
    pub s_psi_sq: f64,
    /// Prior variance of the interaction matrices at the first timestep.
    pub sigma_theta_sq: f64,
    /// Prior variance of the node pre-attributes at the first timestep.
    pub sigma_psi_sq: f64,
    pub directed: bool,
}

impl Hyperparams {
    /// Builds hyperparameters from standard deviations.
    pub fn from_scales(
        k: usize,
        s_theta: f64,
        s_psi: f64,
        sigma_theta: f64,
        sigma_psi: f64,
        directed: bool,
    ) -> Result<Self> {
        let hp = Hyperparams {
            k,
            s_theta_sq: s_theta * s_theta,
            s_psi_sq: s_psi * s_psi,
            sigma_theta_sq: sigma_theta * sigma_theta,
            sigma_psi_sq: sigma_psi * sigma_psi,
            directed,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidHyperparams("K must be at least 1".into()));
        }
        for (name, v) in [
            ("s_theta_sq", self.s_theta_sq),
            ("s_psi_sq", self.s_psi_sq),
            ("sigma_theta_sq", self.sigma_theta_sq),
            ("sigma_psi_sq", self.sigma_psi_sq),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidHyperparams(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn theta_dim(&self) -> usize {
        theta_dim(self.directed)
    }
}

/// A sequence of binary adjacency matrices over a fixed node set.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSequence {
    n_nodes: usize,
    directed: bool,
    snapshots: Vec<DMatrix<u8>>,
}

impl SnapshotSequence {
    /// Validates and wraps a list of adjacency matrices.
    pub fn new(n_nodes: usize, directed: bool, snapshots: Vec<DMatrix<u8>>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidSnapshots("no nodes".into()));
        }
        for (t, a) in snapshots.iter().enumerate() {
            if a.shape() != (n_nodes, n_nodes) {
                return Err(Error::InvalidSnapshots(format!(
                    "snapshot {} has shape {:?}, expected {n_nodes}x{n_nodes}",
                    t + 1,
                    a.shape()
                )));
            }
            for i in 0..n_nodes {
                if a[(i, i)] != 0 {
                    return Err(Error::InvalidSnapshots(format!(
                        "snapshot {} has a self-loop at node {i}",
                        t + 1
                    )));
                }
                for j in 0..n_nodes {
                    let v = a[(i, j)];
                    if v > 1 {
                        return Err(Error::InvalidSnapshots(format!(
                            "snapshot {} entry ({i},{j}) = {v} is not binary",
                            t + 1
                        )));
                    }
                    if !directed && v != a[(j, i)] {
                        return Err(Error::InvalidSnapshots(format!(
                            "undirected snapshot {} is not symmetric at ({i},{j})",
                            t + 1
                        )));
                    }
                }
            }
        }
        Ok(SnapshotSequence {
            n_nodes,
            directed,
            snapshots,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn horizon(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Snapshot at zero-based index `t`.
    pub fn get(&self, t: usize) -> &DMatrix<u8> {
        &self.snapshots[t]
    }

    pub fn snapshots(&self) -> &[DMatrix<u8>] {
        &self.snapshots
    }

    /// The first `horizon` snapshots.
    pub fn truncated(&self, horizon: usize) -> SnapshotSequence {
        SnapshotSequence {
            n_nodes: self.n_nodes,
            directed: self.directed,
            snapshots: self.snapshots[..horizon.min(self.snapshots.len())].to_vec(),
        }
    }
}

/// Latent pre-attributes and flattened interaction matrices for every
/// timestep. `psi[t]` is `N x K`, `theta_bar[t]` is `K x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTrajectory {
    pub psi: Vec<DMatrix<f64>>,
    pub theta_bar: Vec<DMatrix<f64>>,
    pub directed: bool,
}

impl LatentTrajectory {
    pub fn attributes(&self, t: usize) -> DMatrix<f64> {
        self.psi[t].map(sigmoid)
    }

    pub fn interaction_matrices(&self, t: usize) -> Vec<Matrix2<f64>> {
        interaction_matrices(&self.theta_bar[t], self.directed)
            .expect("trajectory built with a consistent layout")
    }

    pub fn probability_matrix(&self, t: usize) -> DMatrix<f64> {
        probability_matrix(&self.attributes(t), &self.interaction_matrices(t), self.directed)
    }
}

/// Logistic sigmoid, evaluated on the branch that cannot overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Maps a flattened interaction vector to its 2x2 matrix.
///
/// Directed layout is row-major `[(0,0), (0,1), (1,0), (1,1)]`; undirected
/// layout is `[(0,0), (0,1), (1,1)]` with `(1,0)` mirrored from `(0,1)`.
pub fn expand_interaction_matrix(theta_bar: &[f64], directed: bool) -> Result<Matrix2<f64>> {
    let d = theta_dim(directed);
    if theta_bar.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "interaction vector has {} entries, {} layout needs {d}",
            theta_bar.len(),
            if directed { "directed" } else { "undirected" }
        )));
    }
    Ok(if directed {
        Matrix2::new(theta_bar[0], theta_bar[1], theta_bar[2], theta_bar[3])
    } else {
        Matrix2::new(theta_bar[0], theta_bar[1], theta_bar[1], theta_bar[2])
    })
}

/// Inverse of [`expand_interaction_matrix`]. For the undirected layout the
/// `(1,0)` entry is ignored.
pub fn flatten_interaction_matrix(theta: &Matrix2<f64>, directed: bool) -> Vec<f64> {
    if directed {
        vec![theta[(0, 0)], theta[(0, 1)], theta[(1, 0)], theta[(1, 1)]]
    } else {
        vec![theta[(0, 0)], theta[(0, 1)], theta[(1, 1)]]
    }
}

/// Expands every row of a `K x d` matrix of flattened interaction vectors.
pub fn interaction_matrices(theta_bar: &DMatrix<f64>, directed: bool) -> Result<Vec<Matrix2<f64>>> {
    (0..theta_bar.nrows())
        .map(|k| {
            let row: Vec<f64> = theta_bar.row(k).iter().copied().collect();
            expand_interaction_matrix(&row, directed)
        })
        .collect()
}

/// Sum over attributes of the expected interaction between `i` and `j`.
///
/// The inner sum is grouped so that swapping `i` and `j` under a symmetric
/// interaction matrix yields the bit-identical result.
pub fn pairwise_logit(z_i: &[f64], z_j: &[f64], theta: &[Matrix2<f64>]) -> f64 {
    debug_assert_eq!(z_i.len(), theta.len());
    debug_assert_eq!(z_j.len(), theta.len());
    let mut total = 0.0;
    for ((&zi, &zj), th) in z_i.iter().zip(z_j).zip(theta) {
        let both_off = (1.0 - zi) * (1.0 - zj) * th[(0, 0)];
        let mixed = (1.0 - zi) * zj * th[(0, 1)] + zi * (1.0 - zj) * th[(1, 0)];
        let both_on = zi * zj * th[(1, 1)];
        total += (both_off + mixed) + both_on;
    }
    total
}

pub fn edge_probability(z_i: &[f64], z_j: &[f64], theta: &[Matrix2<f64>]) -> f64 {
    sigmoid(pairwise_logit(z_i, z_j, theta))
}

/// Full `N x N` edge-probability matrix with a zero diagonal. In the
/// undirected case each unordered pair is evaluated once and mirrored.
pub fn probability_matrix(z: &DMatrix<f64>, theta: &[Matrix2<f64>], directed: bool) -> DMatrix<f64> {
    logit_matrix(z, theta, directed).map_with_location(|i, j, l| if i == j { 0.0 } else { sigmoid(l) })
}

/// Off-diagonal pairwise logits; the diagonal is left at zero.
pub fn logit_matrix(z: &DMatrix<f64>, theta: &[Matrix2<f64>], directed: bool) -> DMatrix<f64> {
    let n = z.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| z.row(i).iter().copied().collect()).collect();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j || (!directed && j < i) {
                continue;
            }
            let l = pairwise_logit(&rows[i], &rows[j], theta);
            out[(i, j)] = l;
            if !directed {
                out[(j, i)] = l;
            }
        }
    }
    out
}

/// Log density of an isotropic Gaussian with variance `var`.
pub fn gaussian_log_density(x: &[f64], mean: &[f64], var: f64) -> Result<f64> {
    if !(var > 0.0) {
        return Err(Error::NonPositiveVariance(var));
    }
    if x.len() != mean.len() {
        return Err(Error::DimensionMismatch(format!(
            "point has {} entries, mean has {}",
            x.len(),
            mean.len()
        )));
    }
    let norm = -0.5 * (2.0 * std::f64::consts::PI * var).ln();
    Ok(x.iter()
        .zip(mean)
        .map(|(xi, mi)| norm - (xi - mi) * (xi - mi) / (2.0 * var))
        .sum())
}

/// Draws one binary snapshot with independent edges. Undirected graphs draw
/// each unordered pair once and mirror it.
pub fn sample_snapshot<R: Rng + ?Sized>(probs: &DMatrix<f64>, directed: bool, rng: &mut R) -> DMatrix<u8> {
    let n = probs.nrows();
    let mut a = DMatrix::<u8>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j || (!directed && j < i) {
                continue;
            }
            let edge = (rng.random::<f64>() < probs[(i, j)]) as u8;
            a[(i, j)] = edge;
            if !directed {
                a[(j, i)] = edge;
            }
        }
    }
    a
}

/// Draws a network sequence and its latent trajectory from the generative
/// process. Deterministic in `seed`.
pub fn sample_network(
    hp: &Hyperparams,
    n_nodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<(SnapshotSequence, LatentTrajectory)> {
    hp.validate()?;
    if n_nodes < 2 {
        return Err(Error::InvalidHyperparams("need at least two nodes".into()));
    }
    if horizon == 0 {
        return Err(Error::InvalidHyperparams("horizon must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = hp.theta_dim();
    let k = hp.k;

    let draw = |rng: &mut ChaCha8Rng, rows: usize, cols: usize, mean: Option<&DMatrix<f64>>, var: f64| {
        let normal = Normal::new(0.0, var.sqrt()).expect("variance validated");
        DMatrix::from_fn(rows, cols, |i, j| mean.map_or(0.0, |m| m[(i, j)]) + normal.sample(rng))
    };

    let mut psi = Vec::with_capacity(horizon);
    let mut theta_bar = Vec::with_capacity(horizon);
    psi.push(draw(&mut rng, n_nodes, k, None, hp.sigma_psi_sq));
    theta_bar.push(draw(&mut rng, k, d, None, hp.sigma_theta_sq));

    let mut snapshots = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let z = psi[t].map(sigmoid);
        let theta = interaction_matrices(&theta_bar[t], hp.directed)?;
        let probs = probability_matrix(&z, &theta, hp.directed);
        let a = sample_snapshot(&probs, hp.directed, &mut rng);
        snapshots.push(a);
        if t + 1 < horizon {
            let next_psi = draw(&mut rng, n_nodes, k, Some(&psi[t]), hp.s_psi_sq);
            let next_theta = draw(&mut rng, k, d, Some(&theta_bar[t]), hp.s_theta_sq);
            psi.push(next_psi);
            theta_bar.push(next_theta);
        }
    }

    let seq = SnapshotSequence::new(n_nodes, hp.directed, snapshots)?;
    Ok((
        seq,
        LatentTrajectory {
            psi,
            theta_bar,
            directed: hp.directed,
        },
    ))
}
