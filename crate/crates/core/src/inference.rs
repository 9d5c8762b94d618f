//! Variational inference for the evolving-network model.
//!
//! The approximate posterior is mean-field Gaussian: every node's
//! pre-attribute vector and every attribute's flattened interaction matrix
//! gets its own mean and diagonal log-variance at each timestep. Those
//! variational parameters are produced by four GRUs run with all-zero
//! inputs, one each for the pre-attribute means, pre-attribute
//! log-variances, interaction means and interaction log-variances. The
//! learnable initial hidden state of each GRU is the timestep-1 parameter;
//! every step of the GRU yields the parameter for the following timestep.
//!
//! Training maximises a mini-batch estimate of the evidence lower bound with
//! Adam. Only the edge log-likelihood is estimated by sampling (one
//! reparameterised draw, with the means used at the first timestep); prior,
//! transition and entropy terms are evaluated in closed form.

use nalgebra::{DMatrix, Matrix2};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{adam_step, AdamState, ParameterStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::gru::{GruCell, GruParams};
use crate::model::{interaction_matrices, probability_matrix, sigmoid, theta_dim, Hyperparams, SnapshotSequence};

pub const PSI_MEAN: &str = "psi_mean";
pub const PSI_LOGVAR: &str = "psi_logvar";
pub const THETA_MEAN: &str = "theta_mean";
pub const THETA_LOGVAR: &str = "theta_logvar";

/// Width of the (always zero) GRU input.
pub const INPUT_DIM: usize = 1;

/// Scale of the uniform weight initialisation.
pub const INIT_SCALE: f64 = 0.1;

/// Scale of the uniform initialisation of the per-node pre-attribute means.
/// All-zero means are a stationary point (every node looks alike and the
/// interaction gradient vanishes), so they start spread out instead.
pub const PSI_MEAN_INIT_SCALE: f64 = 1.0;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// The four GRUs and their per-node / per-attribute initial states.
///
/// The parameter count depends on `N` and `K` but not on the number of
/// timesteps, so a network trained on one horizon can seed the next.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceNetwork {
    store: ParameterStore,
    n_nodes: usize,
    k: usize,
    directed: bool,
}

impl InferenceNetwork {
    /// Fresh network: weights uniform in `[-0.1, 0.1]`, pre-attribute means
    /// uniform in `[-1, 1]`, all other initial states zero.
    pub fn new(n_nodes: usize, k: usize, directed: bool, seed: u64) -> Result<Self> {
        if n_nodes < 2 || k == 0 {
            return Err(Error::InvalidConfig(format!(
                "network needs N >= 2 and K >= 1, got N={n_nodes} K={k}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = theta_dim(directed);
        let mut store = ParameterStore::new();
        for (prefix, hidden, rows) in [
            (PSI_MEAN, k, n_nodes),
            (PSI_LOGVAR, k, n_nodes),
            (THETA_MEAN, d, k),
            (THETA_LOGVAR, d, k),
        ] {
            let mut g = GruParams::random(INPUT_DIM, hidden, rows, INIT_SCALE, &mut rng);
            if prefix == PSI_MEAN {
                for v in g.h0.iter_mut() {
                    *v = rng.random_range(-PSI_MEAN_INIT_SCALE..=PSI_MEAN_INIT_SCALE);
                }
            }
            g.insert_into(&mut store, prefix)?;
        }
        Ok(InferenceNetwork {
            store,
            n_nodes,
            k,
            directed,
        })
    }

    /// Wraps an existing store after checking it has the expected layout.
    pub fn from_store(store: ParameterStore, n_nodes: usize, k: usize, directed: bool) -> Result<Self> {
        let reference = InferenceNetwork::new(n_nodes, k, directed, 0)?;
        for (name, t) in reference.store.iter() {
            let found = store
                .get(name)
                .ok_or_else(|| Error::UnknownParameter(name.clone()))?;
            if found.shape() != t.shape() {
                return Err(Error::ShapeMismatch {
                    name: name.clone(),
                    expected: t.shape(),
                    found: found.shape(),
                });
            }
        }
        if store.len() != reference.store.len() {
            return Err(Error::InvalidConfig(format!(
                "store holds {} parameters, network expects {}",
                store.len(),
                reference.store.len()
            )));
        }
        Ok(InferenceNetwork {
            store,
            n_nodes,
            k,
            directed,
        })
    }

    pub fn store(&self) -> &ParameterStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn theta_dim(&self) -> usize {
        theta_dim(self.directed)
    }

    pub fn gru(&self, prefix: &str) -> Result<GruParams> {
        GruParams::from_store(&self.store, prefix)
    }

    fn check_compatible(&self, snapshots: &SnapshotSequence, hp: &Hyperparams) -> Result<()> {
        if snapshots.n_nodes() != self.n_nodes || snapshots.directed() != self.directed {
            return Err(Error::DimensionMismatch(format!(
                "network is for N={} directed={}, data has N={} directed={}",
                self.n_nodes,
                self.directed,
                snapshots.n_nodes(),
                snapshots.directed()
            )));
        }
        if hp.k != self.k || hp.directed != self.directed {
            return Err(Error::DimensionMismatch(format!(
                "network is for K={} directed={}, hyperparameters say K={} directed={}",
                self.k, self.directed, hp.k, hp.directed
            )));
        }
        Ok(())
    }
}

/// Variational means and log-variances for every timestep.
/// `m_psi[t]` is `N x K`, `m_theta[t]` is `K x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub m_psi: Vec<Tensor>,
    pub logvar_psi: Vec<Tensor>,
    pub m_theta: Vec<Tensor>,
    pub logvar_theta: Vec<Tensor>,
}

impl VariationalState {
    pub fn horizon(&self) -> usize {
        self.m_psi.len()
    }
}

/// Variational parameters recorded on a tape, restricted to a node batch.
#[derive(Debug, Clone)]
pub struct TapeVariational {
    pub m_psi: Vec<Var>,
    pub logvar_psi: Vec<Var>,
    pub m_theta: Vec<Var>,
    pub logvar_theta: Vec<Var>,
}

/// Records the four unrolls on `tape`. `nodes` restricts the
/// pre-attribute GRUs to a subset of node rows, in the given order.
pub fn unroll_on_tape(
    tape: &mut Tape,
    store: &ParameterStore,
    horizon: usize,
    nodes: Option<&[usize]>,
) -> Result<TapeVariational> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    let steps = horizon - 1;
    let mut run = |prefix: &str, rows: Option<&[usize]>| -> Result<Vec<Var>> {
        let cell = GruCell::bind(tape, store, prefix)?;
        cell.unroll_from_initial(tape, steps, rows)
    };
    Ok(TapeVariational {
        m_psi: run(PSI_MEAN, nodes)?,
        logvar_psi: run(PSI_LOGVAR, nodes)?,
        m_theta: run(THETA_MEAN, None)?,
        logvar_theta: run(THETA_LOGVAR, None)?,
    })
}

/// Unrolls the network for `horizon` timesteps. Timestep 1 is the learnable
/// initial state; no GRU step runs when `horizon == 1`.
pub fn unroll_variational(net: &InferenceNetwork, horizon: usize) -> Result<VariationalState> {
    let mut tape = Tape::new();
    let tv = unroll_on_tape(&mut tape, &net.store, horizon, None)?;
    let grab = |vs: &[Var]| vs.iter().map(|&v| tape.value(v).clone()).collect::<Vec<_>>();
    Ok(VariationalState {
        m_psi: grab(&tv.m_psi),
        logvar_psi: grab(&tv.logvar_psi),
        m_theta: grab(&tv.m_theta),
        logvar_theta: grab(&tv.logvar_theta),
    })
}

/// Standard-normal draws for one ELBO evaluation. `psi[t]` is `B x K` and
/// `theta[t]` is `K x d`; the timestep-1 entries are ignored because the
/// means stand in for samples there.
#[derive(Debug, Clone, PartialEq)]
pub struct Noise {
    pub psi: Vec<Tensor>,
    pub theta: Vec<Tensor>,
}

impl Noise {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, horizon: usize, batch: usize, k: usize, d: usize) -> Self {
        let mut draw = |r: usize, c: usize| Tensor::from_fn(r, c, |_, _| rng.sample(StandardNormal));
        let psi = (0..horizon).map(|_| draw(batch, k)).collect();
        let theta = (0..horizon).map(|_| draw(k, d)).collect();
        Noise { psi, theta }
    }

    /// All-zero noise: every sample equals its mean.
    pub fn zeros(horizon: usize, batch: usize, k: usize, d: usize) -> Self {
        Noise {
            psi: vec![Tensor::zeros(batch, k); horizon],
            theta: vec![Tensor::zeros(k, d); horizon],
        }
    }
}

/// `m + exp(logvar / 2) * noise`, differentiable in `m` and `logvar`.
pub fn reparameterized_sample(tape: &mut Tape, m: Var, logvar: Var, noise: &Tensor) -> Var {
    let half = tape.scale(logvar, 0.5);
    let std = tape.exp(half);
    let eps = tape.constant(noise.clone());
    let shift = tape.mul(std, eps);
    tape.add(m, shift)
}

/// The ELBO and its rescaled components, as tape nodes.
#[derive(Debug, Clone, Copy)]
pub struct ElboParts {
    pub total: Var,
    /// Edge log-likelihood, rescaled to the full pair count.
    pub likelihood: Var,
    /// Prior and transition terms of the pre-attributes, rescaled to `N`.
    pub psi_prior: Var,
    pub theta_prior: Var,
    /// Entropy of the approximate posterior (pre-attribute part rescaled).
    pub entropy: Var,
}

fn check_batch(batch: &[usize], n_nodes: usize) -> Result<()> {
    if batch.len() < 2 {
        return Err(Error::InvalidBatch(format!("batch needs at least 2 nodes, got {}", batch.len())));
    }
    let mut seen = vec![false; n_nodes];
    for &n in batch {
        if n >= n_nodes {
            return Err(Error::InvalidBatch(format!("node {n} out of range 0..{n_nodes}")));
        }
        if std::mem::replace(&mut seen[n], true) {
            return Err(Error::InvalidBatch(format!("node {n} appears twice")));
        }
    }
    Ok(())
}

/// Number of dyads among `n` nodes.
pub fn pair_count(n: usize, directed: bool) -> usize {
    let ordered = n * n.saturating_sub(1);
    if directed {
        ordered
    } else {
        ordered / 2
    }
}

/// Sums `-0.5/var * sum(x) - 0.5 * count * ln(2 pi var)`.
fn gaussian_cross(tape: &mut Tape, quad: Var, var: f64, count: usize) -> Var {
    let s = tape.sum(quad);
    let scaled = tape.scale(s, -0.5 / var);
    tape.offset(scaled, -0.5 * count as f64 * (LN_2PI + var.ln()))
}

/// Closed-form prior, transition and entropy terms of one Gaussian chain.
fn chain_terms(tape: &mut Tape, means: &[Var], logvars: &[Var], prior_var: f64, walk_var: f64) -> (Var, Var) {
    let count = tape.value(means[0]).len();
    let vars: Vec<Var> = logvars.iter().map(|&lv| tape.exp(lv)).collect();

    let m2 = tape.square(means[0]);
    let q = tape.add(m2, vars[0]);
    let mut prior = gaussian_cross(tape, q, prior_var, count);
    for t in 1..means.len() {
        let diff = tape.sub(means[t], means[t - 1]);
        let d2 = tape.square(diff);
        let v = tape.add(vars[t], vars[t - 1]);
        let q = tape.add(d2, v);
        let term = gaussian_cross(tape, q, walk_var, count);
        prior = tape.add(prior, term);
    }

    let mut lv_sum = tape.sum(logvars[0]);
    for &lv in &logvars[1..] {
        let s = tape.sum(lv);
        lv_sum = tape.add(lv_sum, s);
    }
    let half = tape.scale(lv_sum, 0.5);
    let entropy = tape.offset(half, 0.5 * (1.0 + LN_2PI) * (count * logvars.len()) as f64);
    (prior, entropy)
}

/// Pairwise logits of a node batch, `B x B`, from attributes `z` (`B x K`)
/// and flattened interaction matrices (`K x d`).
///
/// Uses `sum_k Theta00 + z_i (Theta10 - Theta00) + z_j (Theta01 - Theta00)
/// + z_i z_j (Theta00 - Theta01 - Theta10 + Theta11)`, which is the
/// expectation over the four Bernoulli outcomes.
pub fn batch_logits(tape: &mut Tape, z: Var, theta: Var, directed: bool) -> Var {
    let b = tape.value(z).nrows();
    let c00 = tape.column(theta, 0);
    let c01 = tape.column(theta, 1);
    let (c10, c11) = if directed {
        (tape.column(theta, 2), tape.column(theta, 3))
    } else {
        (c01, tape.column(theta, 2))
    };
    let row_coef = tape.sub(c10, c00);
    let col_coef = tape.sub(c01, c00);
    let diag_sum = tape.add(c00, c11);
    let off_sum = tape.add(c01, c10);
    let inter = tape.sub(diag_sum, off_sum);
    let base = tape.sum(c00);

    let ones_col = tape.constant(DMatrix::from_element(b, 1, 1.0));
    let ones_row = tape.constant(DMatrix::from_element(1, b, 1.0));

    let base_col = tape.matmul(ones_col, base);
    let base_full = tape.matmul(base_col, ones_row);

    let zr = tape.matmul(z, row_coef);
    let row_term = tape.matmul(zr, ones_row);

    let zc = tape.matmul(z, col_coef);
    let zc_t = tape.transpose(zc);
    let col_term = tape.matmul(ones_col, zc_t);

    let inter_t = tape.transpose(inter);
    let inter_rows = tape.matmul(ones_col, inter_t);
    let zw = tape.mul(z, inter_rows);
    let z_t = tape.transpose(z);
    let quad = tape.matmul(zw, z_t);

    let s1 = tape.add(base_full, row_term);
    let s2 = tape.add(s1, col_term);
    tape.add(s2, quad)
}

/// Records the mini-batch ELBO on `tape`.
///
/// Dyads are ordered pairs `i != j` for directed data and unordered pairs
/// for undirected data; the likelihood is rescaled by the ratio of full to
/// batch dyad counts and the pre-attribute terms by `N / B`. Interaction
/// terms are never subsampled.
pub fn elbo_on_tape(
    tape: &mut Tape,
    snapshots: &SnapshotSequence,
    vars: &TapeVariational,
    noise: &Noise,
    batch: &[usize],
    hp: &Hyperparams,
) -> Result<ElboParts> {
    if snapshots.is_empty() {
        return Err(Error::InvalidSnapshots("empty snapshot sequence".into()));
    }
    let n = snapshots.n_nodes();
    check_batch(batch, n)?;
    let horizon = snapshots.horizon();
    let directed = snapshots.directed();
    if vars.m_psi.len() != horizon || noise.psi.len() != horizon || noise.theta.len() != horizon {
        return Err(Error::DimensionMismatch(format!(
            "{} snapshots but {} variational slices and {} noise slices",
            horizon,
            vars.m_psi.len(),
            noise.psi.len()
        )));
    }
    let b = batch.len();
    let psi_shape = tape.value(vars.m_psi[0]).shape();
    let theta_shape = tape.value(vars.m_theta[0]).shape();
    if psi_shape != (b, hp.k) || theta_shape != (hp.k, theta_dim(directed)) {
        return Err(Error::DimensionMismatch(format!(
            "variational slices are {psi_shape:?} and {theta_shape:?} for batch {b}, K={}",
            hp.k
        )));
    }
    if noise.psi[0].shape() != psi_shape || noise.theta[0].shape() != theta_shape {
        return Err(Error::DimensionMismatch("noise shapes do not match the variational slices".into()));
    }

    let mask = DMatrix::from_fn(b, b, |i, j| if i != j && (directed || i < j) { 1.0 } else { 0.0 });
    let mask = tape.constant(mask);

    let mut likelihood: Option<Var> = None;
    for t in 0..horizon {
        let (psi, theta) = if t == 0 {
            (vars.m_psi[0], vars.m_theta[0])
        } else {
            (
                reparameterized_sample(tape, vars.m_psi[t], vars.logvar_psi[t], &noise.psi[t]),
                reparameterized_sample(tape, vars.m_theta[t], vars.logvar_theta[t], &noise.theta[t]),
            )
        };
        let z = tape.sigmoid(psi);
        let logits = batch_logits(tape, z, theta, directed);

        let adj = snapshots.get(t);
        let a = tape.constant(DMatrix::from_fn(b, b, |i, j| f64::from(adj[(batch[i], batch[j])])));
        let fit = tape.mul(a, logits);
        let sp = tape.softplus(logits);
        let ll = tape.sub(fit, sp);
        let masked = tape.mul(mask, ll);
        let s = tape.sum(masked);
        likelihood = Some(match likelihood {
            Some(acc) => tape.add(acc, s),
            None => s,
        });
    }
    let pair_scale = pair_count(n, directed) as f64 / pair_count(b, directed) as f64;
    let likelihood = tape.scale(likelihood.expect("horizon >= 1"), pair_scale);

    let node_scale = n as f64 / b as f64;
    let (psi_prior, psi_entropy) =
        chain_terms(tape, &vars.m_psi, &vars.logvar_psi, hp.sigma_psi_sq, hp.s_psi_sq);
    let (theta_prior, theta_entropy) =
        chain_terms(tape, &vars.m_theta, &vars.logvar_theta, hp.sigma_theta_sq, hp.s_theta_sq);
    let psi_prior = tape.scale(psi_prior, node_scale);
    let psi_entropy = tape.scale(psi_entropy, node_scale);
    let entropy = tape.add(psi_entropy, theta_entropy);

    let s1 = tape.add(likelihood, psi_prior);
    let s2 = tape.add(s1, theta_prior);
    let total = tape.add(s2, entropy);
    Ok(ElboParts {
        total,
        likelihood,
        psi_prior,
        theta_prior,
        entropy,
    })
}

/// Value-level ELBO for fixed variational parameters. `vs` holds all `N`
/// node rows; only the `batch` rows enter the estimate.
pub fn elbo_batch(
    snapshots: &SnapshotSequence,
    vs: &VariationalState,
    noise: &Noise,
    batch: &[usize],
    hp: &Hyperparams,
) -> Result<f64> {
    check_batch(batch, snapshots.n_nodes())?;
    if vs.horizon() != snapshots.horizon() {
        return Err(Error::DimensionMismatch(format!(
            "{} snapshots but {} variational slices",
            snapshots.horizon(),
            vs.horizon()
        )));
    }
    let mut tape = Tape::new();
    let rows = |tape: &mut Tape, ts: &[Tensor]| -> Vec<Var> {
        ts.iter()
            .map(|t| {
                let all = tape.constant(t.clone());
                tape.select_rows(all, batch)
            })
            .collect()
    };
    let whole = |tape: &mut Tape, ts: &[Tensor]| -> Vec<Var> { ts.iter().map(|t| tape.constant(t.clone())).collect() };
    let tv = TapeVariational {
        m_psi: rows(&mut tape, &vs.m_psi),
        logvar_psi: rows(&mut tape, &vs.logvar_psi),
        m_theta: whole(&mut tape, &vs.m_theta),
        logvar_theta: whole(&mut tape, &vs.logvar_theta),
    };
    let parts = elbo_on_tape(&mut tape, snapshots, &tv, noise, batch, hp)?;
    Ok(tape.scalar(parts.total))
}

/// Full-batch ELBO of a network with every sample replaced by its mean.
pub fn full_elbo(net: &InferenceNetwork, snapshots: &SnapshotSequence, hp: &Hyperparams) -> Result<f64> {
    net.check_compatible(snapshots, hp)?;
    let horizon = snapshots.horizon();
    let all: Vec<usize> = (0..net.n_nodes).collect();
    let mut tape = Tape::new();
    let tv = unroll_on_tape(&mut tape, &net.store, horizon, Some(&all))?;
    let noise = Noise::zeros(horizon, net.n_nodes, net.k, net.theta_dim());
    let parts = elbo_on_tape(&mut tape, snapshots, &tv, &noise, &all, hp)?;
    Ok(tape.scalar(parts.total))
}

/// Optimiser settings. `batch_size == 0` means `min(N, 256)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub n_batches: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            n_batches: 1000,
            batch_size: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.n_batches == 0 {
            return Err(Error::InvalidConfig("number of batches must be positive".into()));
        }
        if self.batch_size == 1 {
            return Err(Error::InvalidConfig("batch size must be at least 2".into()));
        }
        Ok(())
    }

    pub fn effective_batch_size(&self, n_nodes: usize) -> usize {
        if self.batch_size == 0 {
            n_nodes.min(256)
        } else {
            self.batch_size.min(n_nodes)
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub network: InferenceNetwork,
    /// Stochastic ELBO estimate at every optimiser step.
    pub batch_elbo: Vec<f64>,
}

/// One stochastic estimate of the ELBO and its gradient with respect to
/// every network parameter.
pub fn elbo_and_gradient(
    net: &InferenceNetwork,
    snapshots: &SnapshotSequence,
    hp: &Hyperparams,
    batch: &[usize],
    noise: &Noise,
) -> Result<(f64, crate::autodiff::Gradients)> {
    let mut tape = Tape::new();
    let tv = unroll_on_tape(&mut tape, &net.store, snapshots.horizon(), Some(batch))?;
    let parts = elbo_on_tape(&mut tape, snapshots, &tv, noise, batch, hp)?;
    let loss = tape.scale(parts.total, -1.0);
    let grads = tape.gradient(loss, &net.store)?;
    Ok((tape.scalar(parts.total), grads))
}

/// Fits an inference network to `snapshots` by Adam on the negative ELBO.
///
/// Each step draws `min(N, 256)` nodes (or the configured batch size)
/// uniformly without replacement and fresh reparameterisation noise.
/// A warm start copies every parameter of the given network; otherwise the
/// network is initialised from `config.seed`.
pub fn train(
    snapshots: &SnapshotSequence,
    hp: &Hyperparams,
    config: &TrainConfig,
    warm_start: Option<&InferenceNetwork>,
) -> Result<TrainReport> {
    config.validate()?;
    hp.validate()?;
    if snapshots.is_empty() {
        return Err(Error::InvalidSnapshots("empty snapshot sequence".into()));
    }
    let n = snapshots.n_nodes();
    let mut net = match warm_start {
        Some(w) => w.clone(),
        None => InferenceNetwork::new(n, hp.k, hp.directed, config.seed)?,
    };
    net.check_compatible(snapshots, hp)?;

    // separate stream from the initialiser so warm and cold runs see the
    // same batches and noise
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_ba7c_4e5_0000);
    let b = config.effective_batch_size(n);
    let horizon = snapshots.horizon();
    let mut adam = AdamState::new(&net.store);
    let mut trace = Vec::with_capacity(config.n_batches);
    for _ in 0..config.n_batches {
        let mut batch = index::sample(&mut rng, n, b).into_vec();
        batch.sort_unstable();
        let noise = Noise::sample(&mut rng, horizon, b, hp.k, hp.theta_dim());
        let (elbo, grads) = elbo_and_gradient(&net, snapshots, hp, &batch, &noise)?;
        adam_step(&mut net.store, &grads, &mut adam, config.lr)?;
        trace.push(elbo);
    }
    Ok(TrainReport {
        network: net,
        batch_elbo: trace,
    })
}

/// Edge probabilities for the timestep after `trained_horizon`, from the
/// variational means (no sampling). Zero diagonal; symmetric when
/// undirected.
pub fn forecast(net: &InferenceNetwork, trained_horizon: usize) -> Result<Tensor> {
    let vs = unroll_variational(net, trained_horizon + 1)?;
    let z = vs.m_psi[trained_horizon].map(sigmoid);
    let theta = interaction_matrices(&vs.m_theta[trained_horizon], net.directed)?;
    Ok(probability_matrix(&z, &theta, net.directed))
}

/// Per-timestep attributes and interaction matrices from the variational
/// means.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    /// `z[t]` is `N x K`, entries in `(0, 1)`.
    pub z: Vec<Tensor>,
    /// `theta[t][k]` is the 2x2 interaction matrix of attribute `k`.
    pub theta: Vec<Vec<Matrix2<f64>>>,
    pub directed: bool,
}

pub fn extract_embeddings(net: &InferenceNetwork, horizon: usize) -> Result<Embeddings> {
    let vs = unroll_variational(net, horizon)?;
    let z = vs.m_psi.iter().map(|m| m.map(sigmoid)).collect();
    let theta = vs
        .m_theta
        .iter()
        .map(|m| interaction_matrices(m, net.directed))
        .collect::<Result<_>>()?;
    Ok(Embeddings {
        z,
        theta,
        directed: net.directed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_diff_check, FiniteDiffConfig};
    use crate::model::{expand_interaction_matrix, pairwise_logit, sample_network};
    use approx::assert_relative_eq;

    fn hp(k: usize, directed: bool) -> Hyperparams {
        Hyperparams::from_scales(k, 0.1, 0.1, 1.0, 1.0, directed).unwrap()
    }

    fn randomize(net: &mut InferenceNetwork, seed: u64, scale: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flat: Vec<f64> = net.store.flat().iter().map(|_| rng.random_range(-scale..scale)).collect();
        net.store.set_flat(&flat).unwrap();
    }

    /// Straight-loop ELBO over explicit formulas, independent of the tape.
    fn reference_elbo(
        snaps: &SnapshotSequence,
        vs: &VariationalState,
        noise: &Noise,
        batch: &[usize],
        hp: &Hyperparams,
    ) -> f64 {
        let n = snaps.n_nodes();
        let b = batch.len();
        let directed = snaps.directed();
        let d = theta_dim(directed);
        let horizon = snaps.horizon();
        let mut lik = 0.0;
        for t in 0..horizon {
            let psi_at = |bi: usize, k: usize| {
                let node = batch[bi];
                let m = vs.m_psi[t][(node, k)];
                if t == 0 {
                    m
                } else {
                    m + (0.5 * vs.logvar_psi[t][(node, k)]).exp() * noise.psi[t][(bi, k)]
                }
            };
            let theta: Vec<Matrix2<f64>> = (0..hp.k)
                .map(|k| {
                    let v: Vec<f64> = (0..d)
                        .map(|c| {
                            let m = vs.m_theta[t][(k, c)];
                            if t == 0 {
                                m
                            } else {
                                m + (0.5 * vs.logvar_theta[t][(k, c)]).exp() * noise.theta[t][(k, c)]
                            }
                        })
                        .collect();
                    expand_interaction_matrix(&v, directed).unwrap()
                })
                .collect();
            for i in 0..b {
                for j in 0..b {
                    if i == j || (!directed && j < i) {
                        continue;
                    }
                    let zi: Vec<f64> = (0..hp.k).map(|k| sigmoid(psi_at(i, k))).collect();
                    let zj: Vec<f64> = (0..hp.k).map(|k| sigmoid(psi_at(j, k))).collect();
                    let p = sigmoid(pairwise_logit(&zi, &zj, &theta));
                    let a = snaps.get(t)[(batch[i], batch[j])];
                    lik += if a == 1 { p.ln() } else { (1.0 - p).ln() };
                }
            }
        }
        lik *= pair_count(n, directed) as f64 / pair_count(b, directed) as f64;

        let chain = |m: &dyn Fn(usize, usize, usize) -> f64,
                     lv: &dyn Fn(usize, usize, usize) -> f64,
                     rows: &[usize],
                     cols: usize,
                     prior: f64,
                     walk: f64| {
            let mut total = 0.0;
            for &r in rows {
                for c in 0..cols {
                    let v0 = lv(0, r, c).exp();
                    total += -0.5 * ((m(0, r, c).powi(2) + v0) / prior + (2.0 * std::f64::consts::PI * prior).ln());
                    for t in 0..horizon {
                        total += 0.5 * (1.0 + (2.0 * std::f64::consts::PI * lv(t, r, c).exp()).ln());
                        if t > 0 {
                            let dm = m(t, r, c) - m(t - 1, r, c);
                            let q = dm * dm + lv(t, r, c).exp() + lv(t - 1, r, c).exp();
                            total += -0.5 * (q / walk + (2.0 * std::f64::consts::PI * walk).ln());
                        }
                    }
                }
            }
            total
        };
        let psi_terms = chain(
            &|t, r, c| vs.m_psi[t][(r, c)],
            &|t, r, c| vs.logvar_psi[t][(r, c)],
            batch,
            hp.k,
            hp.sigma_psi_sq,
            hp.s_psi_sq,
        );
        let all_k: Vec<usize> = (0..hp.k).collect();
        let theta_terms = chain(
            &|t, r, c| vs.m_theta[t][(r, c)],
            &|t, r, c| vs.logvar_theta[t][(r, c)],
            &all_k,
            d,
            hp.sigma_theta_sq,
            hp.s_theta_sq,
        );
        lik + psi_terms * n as f64 / b as f64 + theta_terms
    }

    fn random_state(n: usize, k: usize, d: usize, horizon: usize, seed: u64) -> VariationalState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gen = |r: usize, c: usize, s: f64| -> Vec<Tensor> {
            (0..horizon)
                .map(|_| Tensor::from_fn(r, c, |_, _| rng.random_range(-s..s)))
                .collect()
        };
        VariationalState {
            m_psi: gen(n, k, 1.5),
            logvar_psi: gen(n, k, 1.0),
            m_theta: gen(k, d, 1.5),
            logvar_theta: gen(k, d, 1.0),
        }
    }

    #[test]
    fn elbo_matches_reference_loops() {
        for directed in [false, true] {
            let h = hp(3, directed);
            let (snaps, _) = sample_network(&h, 7, 4, 5).unwrap();
            let vs = random_state(7, 3, theta_dim(directed), 4, 9);
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            for batch in [vec![0, 1, 2, 3, 4, 5, 6], vec![1, 4, 6], vec![5, 2]] {
                let noise = Noise::sample(&mut rng, 4, batch.len(), 3, theta_dim(directed));
                let got = elbo_batch(&snaps, &vs, &noise, &batch, &h).unwrap();
                let want = reference_elbo(&snaps, &vs, &noise, &batch, &h);
                assert_relative_eq!(got, want, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn single_timestep_zero_theta_likelihood() {
        let h = hp(2, false);
        let (snaps, _) = sample_network(&h, 6, 1, 1).unwrap();
        let mut vs = random_state(6, 2, 3, 1, 4);
        vs.m_theta[0] = Tensor::zeros(2, 3);
        let all: Vec<usize> = (0..6).collect();
        let mut tape = Tape::new();
        let c = |tape: &mut Tape, ts: &[Tensor]| -> Vec<Var> { ts.iter().map(|t| tape.constant(t.clone())).collect() };
        let tv = TapeVariational {
            m_psi: c(&mut tape, &vs.m_psi),
            logvar_psi: c(&mut tape, &vs.logvar_psi),
            m_theta: c(&mut tape, &vs.m_theta),
            logvar_theta: c(&mut tape, &vs.logvar_theta),
        };
        let noise = Noise::zeros(1, 6, 2, 3);
        let parts = elbo_on_tape(&mut tape, &snaps, &tv, &noise, &all, &h).unwrap();
        assert_relative_eq!(tape.scalar(parts.likelihood), -15.0 * 2f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn full_batch_has_unit_rescale() {
        assert_eq!(pair_count(30, true), 870);
        assert_eq!(pair_count(30, false), 435);
        let h = hp(2, true);
        let (snaps, _) = sample_network(&h, 5, 2, 1).unwrap();
        let vs = random_state(5, 2, 4, 2, 8);
        let noise = Noise::zeros(2, 5, 2, 4);
        let all: Vec<usize> = (0..5).collect();
        let got = elbo_batch(&snaps, &vs, &noise, &all, &h).unwrap();
        assert_relative_eq!(got, reference_elbo(&snaps, &vs, &noise, &all, &h), max_relative = 1e-12);
    }

    #[test]
    fn batch_errors() {
        let h = hp(2, false);
        let (snaps, _) = sample_network(&h, 5, 2, 1).unwrap();
        let vs = random_state(5, 2, 3, 2, 8);
        let noise = Noise::zeros(2, 1, 2, 3);
        assert!(matches!(elbo_batch(&snaps, &vs, &noise, &[3], &h), Err(Error::InvalidBatch(_))));
        let noise = Noise::zeros(2, 2, 2, 3);
        assert!(elbo_batch(&snaps, &vs, &noise, &[3, 3], &h).is_err());
        assert!(elbo_batch(&snaps, &vs, &noise, &[3, 9], &h).is_err());
        let empty = SnapshotSequence::new(5, false, vec![]).unwrap();
        let vs0 = VariationalState {
            m_psi: vec![],
            logvar_psi: vec![],
            m_theta: vec![],
            logvar_theta: vec![],
        };
        assert!(elbo_batch(&empty, &vs0, &Noise::zeros(0, 2, 2, 3), &[0, 1], &h).is_err());
    }

    #[test]
    fn likelihood_batches_are_unbiased() {
        // mean over random batches of the rescaled likelihood term vs the
        // full-data likelihood at fixed (mean) parameters
        let h = hp(3, false);
        let (snaps, _) = sample_network(&h, 20, 3, 13).unwrap();
        let vs = random_state(20, 3, 3, 3, 14);
        let lik_only = |batch: &[usize]| {
            let mut tape = Tape::new();
            let rows = |tape: &mut Tape, ts: &[Tensor]| -> Vec<Var> {
                ts.iter()
                    .map(|t| {
                        let c = tape.constant(t.clone());
                        tape.select_rows(c, batch)
                    })
                    .collect()
            };
            let whole = |tape: &mut Tape, ts: &[Tensor]| -> Vec<Var> { ts.iter().map(|t| tape.constant(t.clone())).collect() };
            let tv = TapeVariational {
                m_psi: rows(&mut tape, &vs.m_psi),
                logvar_psi: rows(&mut tape, &vs.logvar_psi),
                m_theta: whole(&mut tape, &vs.m_theta),
                logvar_theta: whole(&mut tape, &vs.logvar_theta),
            };
            let noise = Noise::zeros(3, batch.len(), 3, 3);
            let parts = elbo_on_tape(&mut tape, &snaps, &tv, &noise, batch, &h).unwrap();
            tape.scalar(parts.likelihood)
        };
        let all: Vec<usize> = (0..20).collect();
        let full = lik_only(&all);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let draws = 2000;
        let samples: Vec<f64> = (0..draws)
            .map(|_| {
                let mut b = index::sample(&mut rng, 20, 6).into_vec();
                b.sort_unstable();
                lik_only(&b)
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        assert!((mean - full).abs() < 3.0 * se, "mean {mean} full {full} se {se}");
    }

    #[test]
    fn unroll_boundary_and_halving() {
        let mut net = InferenceNetwork::new(4, 3, false, 1).unwrap();
        let h0 = Tensor::from_fn(4, 3, |i, j| (i as f64 - 1.5) * 0.3 + j as f64 * 0.1);
        net.store.set("psi_mean.h0", h0.clone()).unwrap();
        let vs = unroll_variational(&net, 1).unwrap();
        assert_eq!(vs.horizon(), 1);
        assert_eq!(vs.m_psi[0], h0);
        assert_eq!(&vs.m_theta[0], net.store.get("theta_mean.h0").unwrap());
        assert_eq!(&vs.logvar_psi[0], net.store.get("psi_logvar.h0").unwrap());

        for name in ["w1", "w2", "w3", "w4", "w5", "w6"] {
            let full = format!("psi_mean.{name}");
            let shape = net.store.get(&full).unwrap().shape();
            net.store.set(&full, Tensor::zeros(shape.0, shape.1)).unwrap();
        }
        let vs = unroll_variational(&net, 5).unwrap();
        for t in 0..5 {
            assert_eq!(vs.m_psi[t], &h0 / 2f64.powi(t as i32));
        }
    }

    #[test]
    fn nodes_unroll_independently() {
        let mut net = InferenceNetwork::new(5, 2, true, 3).unwrap();
        randomize(&mut net, 4, 0.8);
        let before = unroll_variational(&net, 4).unwrap();
        let mut h0 = net.store.get("psi_mean.h0").unwrap().clone();
        h0[(1, 0)] += 0.5;
        net.store.set("psi_mean.h0", h0).unwrap();
        let after = unroll_variational(&net, 4).unwrap();
        for t in 0..4 {
            for n in [0, 2, 3, 4] {
                assert_eq!(before.m_psi[t].row(n), after.m_psi[t].row(n));
            }
        }
        assert_ne!(before.m_psi[3].row(1), after.m_psi[3].row(1));
    }

    #[test]
    fn reparameterization() {
        let mut tape = Tape::new();
        let m = tape.leaf(Tensor::from_row_slice(1, 2, &[0.3, -1.0]));
        let lv = tape.leaf(Tensor::from_row_slice(1, 2, &[0.0, 0.4]));
        let s = reparameterized_sample(&mut tape, m, lv, &Tensor::zeros(1, 2));
        assert_eq!(tape.value(s), tape.value(m));
        let s = reparameterized_sample(&mut tape, m, lv, &Tensor::from_row_slice(1, 2, &[0.25, 1.0]));
        assert_relative_eq!(tape.value(s)[(0, 0)], 0.55, epsilon = 1e-15);
        let root = tape.sum(s);
        let adj = tape.backward(root).unwrap();
        let g = adj.get(lv).unwrap();
        assert_relative_eq!(g[(0, 1)], 0.5 * (0.2f64).exp(), max_relative = 1e-12);
        // central difference oracle on the log-variance
        let f = |x: f64| -1.0 + (0.5 * x).exp();
        let fd = (f(0.4 + 1e-6) - f(0.4 - 1e-6)) / 2e-6;
        assert_relative_eq!(g[(0, 1)], fd, max_relative = 1e-8);
        assert_eq!(adj.get(m).unwrap(), Tensor::from_element(1, 2, 1.0));
    }

    #[test]
    fn elbo_gradient_matches_finite_differences() {
        for directed in [false, true] {
            let h = hp(3, directed);
            let (snaps, _) = sample_network(&h, 6, 4, 31).unwrap();
            let mut net = InferenceNetwork::new(6, 3, directed, 1).unwrap();
            randomize(&mut net, 2, 0.5);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let batch = vec![0, 2, 3, 5];
            let noise = Noise::sample(&mut rng, 4, 4, 3, theta_dim(directed));
            let err = finite_diff_check(
                |tape, s| {
                    let tv = unroll_on_tape(tape, s, 4, Some(&batch))?;
                    Ok(elbo_on_tape(tape, &snaps, &tv, &noise, &batch, &h)?.total)
                },
                net.store(),
                FiniteDiffConfig::default(),
            )
            .unwrap();
            assert!(err < 1e-4, "directed={directed}: {err}");
        }
    }

    #[test]
    fn entropy_ignores_means() {
        let h = hp(2, true);
        let (snaps, _) = sample_network(&h, 5, 3, 2).unwrap();
        let vs = random_state(5, 2, 4, 3, 5);
        let entropy_of = |vs: &VariationalState| {
            let mut tape = Tape::new();
            let c = |tape: &mut Tape, ts: &[Tensor]| -> Vec<Var> { ts.iter().map(|t| tape.constant(t.clone())).collect() };
            let tv = TapeVariational {
                m_psi: c(&mut tape, &vs.m_psi),
                logvar_psi: c(&mut tape, &vs.logvar_psi),
                m_theta: c(&mut tape, &vs.m_theta),
                logvar_theta: c(&mut tape, &vs.logvar_theta),
            };
            let all: Vec<usize> = (0..5).collect();
            let parts = elbo_on_tape(&mut tape, &snaps, &tv, &Noise::zeros(3, 5, 2, 4), &all, &h).unwrap();
            tape.scalar(parts.entropy)
        };
        let mut moved = vs.clone();
        moved.m_psi[1][(2, 1)] += 3.0;
        moved.m_theta[2][(0, 3)] -= 1.7;
        assert_eq!(entropy_of(&vs).to_bits(), entropy_of(&moved).to_bits());
    }

    #[test]
    fn no_cross_node_gradient_in_entropy() {
        // entropy of node a's slice does not depend on node b's parameters
        let mut tape = Tape::new();
        let lv = tape.leaf(Tensor::from_row_slice(2, 2, &[0.1, -0.3, 0.7, 0.2]));
        let mut vars = TapeVariational {
            m_psi: vec![],
            logvar_psi: vec![],
            m_theta: vec![],
            logvar_theta: vec![],
        };
        let row_a = tape.select_rows(lv, &[0]);
        vars.logvar_psi.push(row_a);
        let means = vec![tape.constant(Tensor::zeros(1, 2))];
        let (_, entropy) = chain_terms(&mut tape, &means, &vars.logvar_psi, 1.0, 1.0);
        let g = tape.backward(entropy).unwrap().get(lv).unwrap();
        assert_eq!(g.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0]);
        assert_eq!(g.row(0).iter().copied().collect::<Vec<_>>(), vec![0.5, 0.5]);
    }

    #[test]
    fn undirected_likelihood_counts_each_dyad_once() {
        // with all-zero theta each counted dyad contributes ln(1/2)
        let h = hp(2, false);
        let (snaps, _) = sample_network(&h, 8, 2, 3).unwrap();
        let mut vs = random_state(8, 2, 3, 2, 1);
        for t in 0..2 {
            vs.m_theta[t] = Tensor::zeros(2, 3);
            vs.logvar_theta[t] = Tensor::from_element(2, 3, -80.0);
        }
        let all: Vec<usize> = (0..8).collect();
        let mut tape = Tape::new();
        let c = |tape: &mut Tape, ts: &[Tensor]| -> Vec<Var> { ts.iter().map(|t| tape.constant(t.clone())).collect() };
        let tv = TapeVariational {
            m_psi: c(&mut tape, &vs.m_psi),
            logvar_psi: c(&mut tape, &vs.logvar_psi),
            m_theta: c(&mut tape, &vs.m_theta),
            logvar_theta: c(&mut tape, &vs.logvar_theta),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let noise = Noise::sample(&mut rng, 2, 8, 2, 3);
        let parts = elbo_on_tape(&mut tape, &snaps, &tv, &noise, &all, &h).unwrap();
        assert_relative_eq!(tape.scalar(parts.likelihood), -2.0 * 28.0 * 2f64.ln(), max_relative = 1e-9);
    }

    #[test]
    fn forecast_shape_and_closed_form() {
        let mut net = InferenceNetwork::new(5, 2, false, 7).unwrap();
        randomize(&mut net, 8, 1.0);
        let p = forecast(&net, 3).unwrap();
        for i in 0..5 {
            assert_eq!(p[(i, i)], 0.0);
            for j in 0..5 {
                assert_eq!(p[(i, j)].to_bits(), p[(j, i)].to_bits());
            }
        }

        // zero weights: the T+1 means are the initial states halved T times
        let mut zero = net.clone();
        let names: Vec<String> = zero.store.names().filter(|n| !n.ends_with(".h0")).map(String::from).collect();
        for n in names {
            let s = zero.store.get(&n).unwrap().shape();
            zero.store.set(&n, Tensor::zeros(s.0, s.1)).unwrap();
        }
        let t = 3;
        let scale = 0.5f64.powi(t as i32);
        let m_psi = zero.store.get("psi_mean.h0").unwrap() * scale;
        let m_theta = zero.store.get("theta_mean.h0").unwrap() * scale;
        let theta: Vec<Matrix2<f64>> = (0..2)
            .map(|k| expand_interaction_matrix(&[m_theta[(k, 0)], m_theta[(k, 1)], m_theta[(k, 2)]], false).unwrap())
            .collect();
        let p = forecast(&zero, t).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i == j {
                    continue;
                }
                let zi = [sigmoid(m_psi[(i, 0)]), sigmoid(m_psi[(i, 1)])];
                let zj = [sigmoid(m_psi[(j, 0)]), sigmoid(m_psi[(j, 1)])];
                assert_relative_eq!(p[(i, j)], sigmoid(pairwise_logit(&zi, &zj, &theta)), max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn embeddings_follow_means() {
        let mut net = InferenceNetwork::new(4, 3, true, 2).unwrap();
        net.store.set("psi_mean.h0", Tensor::zeros(4, 3)).unwrap();
        let e = extract_embeddings(&net, 3).unwrap();
        assert_eq!(e.z.len(), 3);
        assert!(e.z[0].iter().all(|&v| v == 0.5));
        randomize(&mut net, 5, 2.0);
        let e = extract_embeddings(&net, 3).unwrap();
        let vs = unroll_variational(&net, 3).unwrap();
        for t in 0..3 {
            assert_eq!(e.z[t], vs.m_psi[t].map(sigmoid));
            assert!(e.z[t].iter().all(|&v| v > 0.0 && v < 1.0));
            assert_eq!(e.theta[t][1][(1, 0)], vs.m_theta[t][(1, 2)]);
        }
    }

    #[test]
    fn config_validation() {
        let (snaps, _) = sample_network(&hp(2, false), 5, 2, 0).unwrap();
        let bad = TrainConfig { lr: 0.0, ..Default::default() };
        assert!(matches!(train(&snaps, &hp(2, false), &bad, None), Err(Error::InvalidConfig(_))));
        let bad = TrainConfig { n_batches: 0, ..Default::default() };
        assert!(train(&snaps, &hp(2, false), &bad, None).is_err());
        assert_eq!(TrainConfig::default().effective_batch_size(1000), 256);
        assert_eq!(TrainConfig::default().effective_batch_size(30), 30);
        // mismatched K
        let cfg = TrainConfig { n_batches: 1, ..Default::default() };
        let other = InferenceNetwork::new(5, 3, false, 0).unwrap();
        assert!(train(&snaps, &hp(2, false), &cfg, Some(&other)).is_err());
    }

    #[test]
    fn training_is_deterministic_and_ascends() {
        let h = hp(3, false);
        let (snaps, _) = sample_network(&h, 12, 4, 21).unwrap();
        let cfg = TrainConfig {
            lr: 0.01,
            n_batches: 150,
            batch_size: 0,
            seed: 4,
        };
        let a = train(&snaps, &h, &cfg, None).unwrap();
        let b = train(&snaps, &h, &cfg, None).unwrap();
        assert_eq!(a.network, b.network);
        let init = InferenceNetwork::new(12, 3, false, cfg.seed).unwrap();
        let before = full_elbo(&init, &snaps, &h).unwrap();
        let after = full_elbo(&a.network, &snaps, &h).unwrap();
        assert!(after > before, "before {before} after {after}");
    }

    #[test]
    fn from_store_checks_layout() {
        let net = InferenceNetwork::new(4, 2, true, 0).unwrap();
        let again = InferenceNetwork::from_store(net.store().clone(), 4, 2, true).unwrap();
        assert_eq!(again, net);
        assert!(InferenceNetwork::from_store(net.store().clone(), 5, 2, true).is_err());
        assert!(InferenceNetwork::from_store(net.store().clone(), 4, 2, false).is_err());
    }
}
