//! Reverse-mode differentiation over dense matrices, plus Adam.
//!
//! A [`Tape`] records every operation as it is evaluated. Each recorded
//! node keeps its forward value, so the backward pass needs no replay: it
//! walks the tape from the root towards the leaves, accumulating adjoints
//! by addition wherever a value fans out.
//!
//! Parameters live in a [`ParameterStore`] and are bound onto a tape by
//! name with [`Tape::param`]; [`Tape::gradient`] then reports one gradient
//! array per stored parameter.
//!
//! Shape errors inside the elementary operations are programming errors and
//! panic; callers that accept user-controlled shapes check them up front.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::sigmoid;

pub type Tensor = DMatrix<f64>;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Const,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Offset(usize),
    MatMul(usize, usize),
    Transpose(usize),
    Sigmoid(usize),
    Tanh(usize),
    Exp(usize),
    Log(usize),
    Softplus(usize),
    Square(usize),
    Sum(usize),
    /// Output entry `(r, c)` reads `src[index[r * cols + c]]`.
    Gather { src: usize, index: Vec<(usize, usize)> },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Recorded computation graph.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    params: BTreeMap<String, Var>,
}

fn assert_same_shape(a: &Tensor, b: &Tensor, what: &str) {
    assert_eq!(
        a.shape(),
        b.shape(),
        "{what}: operand shapes {:?} and {:?} differ",
        a.shape(),
        b.shape()
    );
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let t = self.value(v);
        assert_eq!(t.shape(), (1, 1), "scalar() on a non-scalar node");
        t[(0, 0)]
    }

    /// Differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Const)
    }

    pub fn constant_scalar(&mut self, value: f64) -> Var {
        self.constant(Tensor::from_element(1, 1, value))
    }

    /// Binds a stored parameter as a leaf. Binding the same name twice
    /// returns the existing node.
    pub fn param(&mut self, store: &ParameterStore, name: &str) -> Result<Var> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let value = store
            .get(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?
            .clone();
        let v = self.leaf(value);
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_same_shape(self.value(a), self.value(b), "add");
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_same_shape(self.value(a), self.value(b), "sub");
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a.0, b.0))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_same_shape(self.value(a), self.value(b), "mul");
        let v = self.value(a).component_mul(self.value(b));
        self.push(v, Op::Mul(a.0, b.0))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a.0, c))
    }

    /// Adds a constant to every entry.
    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).add_scalar(c);
        self.push(v, Op::Offset(a.0))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(
            va.ncols(),
            vb.nrows(),
            "matmul: {:?} x {:?}",
            va.shape(),
            vb.shape()
        );
        let v = va * vb;
        self.push(v, Op::MatMul(a.0, b.0))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a.0))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::exp);
        self.push(v, Op::Exp(a.0))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::ln);
        self.push(v, Op::Log(a.0))
    }

    /// `ln(1 + e^x)` elementwise.
    pub fn softplus(&mut self, a: Var) -> Var {
        let v = self.value(a).map(softplus);
        self.push(v, Op::Softplus(a.0))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x * x);
        self.push(v, Op::Square(a.0))
    }

    /// Sum of all entries, as a 1x1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::from_element(1, 1, self.value(a).sum());
        self.push(v, Op::Sum(a.0))
    }

    /// Builds a `rows x cols` node whose entries are read from `src` at the
    /// given positions, listed in row-major output order.
    pub fn gather(&mut self, src: Var, rows: usize, cols: usize, index: Vec<(usize, usize)>) -> Var {
        assert_eq!(index.len(), rows * cols, "gather: index length");
        let s = self.value(src);
        for &(r, c) in &index {
            assert!(r < s.nrows() && c < s.ncols(), "gather: ({r},{c}) out of {:?}", s.shape());
        }
        let v = Tensor::from_fn(rows, cols, |r, c| {
            let (sr, sc) = index[r * cols + c];
            s[(sr, sc)]
        });
        self.push(v, Op::Gather { src: src.0, index })
    }

    /// Selects whole rows of `src`, in the given order.
    pub fn select_rows(&mut self, src: Var, rows: &[usize]) -> Var {
        let cols = self.value(src).ncols();
        let index = rows
            .iter()
            .flat_map(|&r| (0..cols).map(move |c| (r, c)))
            .collect();
        self.gather(src, rows.len(), cols, index)
    }

    /// Selects one column of `src` as a column vector.
    pub fn column(&mut self, src: Var, col: usize) -> Var {
        let rows = self.value(src).nrows();
        let index = (0..rows).map(|r| (r, col)).collect();
        self.gather(src, rows, 1, index)
    }

    /// Adjoints of every node with respect to a scalar root.
    pub fn backward(&self, root: Var) -> Result<Adjoints> {
        if root.0 >= self.nodes.len() {
            return Err(Error::MalformedTape(format!(
                "root {} is not on this tape ({} nodes)",
                root.0,
                self.nodes.len()
            )));
        }
        let shape = self.nodes[root.0].value.shape();
        if shape != (1, 1) {
            return Err(Error::NonScalarRoot(shape.0, shape.1));
        }

        let mut adj: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        adj[root.0] = Some(Tensor::from_element(1, 1, 1.0));

        fn acc(adj: &mut [Option<Tensor>], i: usize, g: Tensor) {
            match &mut adj[i] {
                Some(a) => *a += g,
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            let y = &node.value;
            match &node.op {
                Op::Leaf | Op::Const => {
                    adj[i] = Some(g);
                    continue;
                }
                Op::Add(a, b) => {
                    acc(&mut adj, *a, g.clone());
                    acc(&mut adj, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut adj, *a, g.clone());
                    acc(&mut adj, *b, -g);
                }
                Op::Mul(a, b) => {
                    let ga = g.component_mul(&self.nodes[*b].value);
                    let gb = g.component_mul(&self.nodes[*a].value);
                    acc(&mut adj, *a, ga);
                    acc(&mut adj, *b, gb);
                }
                Op::Scale(a, c) => acc(&mut adj, *a, g * *c),
                Op::Offset(a) => acc(&mut adj, *a, g),
                Op::MatMul(a, b) => {
                    let ga = &g * self.nodes[*b].value.transpose();
                    let gb = self.nodes[*a].value.transpose() * &g;
                    acc(&mut adj, *a, ga);
                    acc(&mut adj, *b, gb);
                }
                Op::Transpose(a) => acc(&mut adj, *a, g.transpose()),
                Op::Sigmoid(a) => {
                    let d = y.map(|s| s * (1.0 - s));
                    acc(&mut adj, *a, g.component_mul(&d));
                }
                Op::Tanh(a) => {
                    let d = y.map(|t| 1.0 - t * t);
                    acc(&mut adj, *a, g.component_mul(&d));
                }
                Op::Exp(a) => acc(&mut adj, *a, g.component_mul(y)),
                Op::Log(a) => {
                    let d = self.nodes[*a].value.map(|x| 1.0 / x);
                    acc(&mut adj, *a, g.component_mul(&d));
                }
                Op::Softplus(a) => {
                    let d = self.nodes[*a].value.map(sigmoid);
                    acc(&mut adj, *a, g.component_mul(&d));
                }
                Op::Square(a) => {
                    let d = self.nodes[*a].value.map(|x| 2.0 * x);
                    acc(&mut adj, *a, g.component_mul(&d));
                }
                Op::Sum(a) => {
                    let (r, c) = self.nodes[*a].value.shape();
                    acc(&mut adj, *a, Tensor::from_element(r, c, g[(0, 0)]));
                }
                Op::Gather { src, index } => {
                    let (r, c) = self.nodes[*src].value.shape();
                    let cols = y.ncols();
                    let mut gs = Tensor::zeros(r, c);
                    for (k, &(sr, sc)) in index.iter().enumerate() {
                        gs[(sr, sc)] += g[(k / cols, k % cols)];
                    }
                    acc(&mut adj, *src, gs);
                }
            }
        }
        Ok(Adjoints { adj })
    }

    /// Gradient of a scalar root with respect to every parameter in
    /// `store`. Parameters never bound on this tape get zero gradients.
    pub fn gradient(&self, root: Var, store: &ParameterStore) -> Result<Gradients> {
        let adjoints = self.backward(root)?;
        let mut out = BTreeMap::new();
        for (name, value) in store.iter() {
            let g = match self.params.get(name) {
                Some(&v) => adjoints.get(v).unwrap_or_else(|| Tensor::zeros(value.nrows(), value.ncols())),
                None => Tensor::zeros(value.nrows(), value.ncols()),
            };
            out.insert(name.clone(), g);
        }
        Ok(Gradients { grads: out })
    }
}

/// Adjoints from [`Tape::backward`]. Only leaves and constants keep their
/// adjoint; intermediate adjoints are consumed during the sweep.
#[derive(Debug, Clone)]
pub struct Adjoints {
    adj: Vec<Option<Tensor>>,
}

impl Adjoints {
    /// Adjoint of an input node, or `None` if the root does not depend on it.
    pub fn get(&self, v: Var) -> Option<Tensor> {
        self.adj.get(v.0).and_then(|a| a.clone())
    }
}

/// Named dense parameters. Names are unique and shapes are fixed once
/// inserted. The flat view walks parameters in name order and each array
/// in row-major order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    params: BTreeMap<String, Tensor>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(Error::DuplicateParameter(name));
        }
        self.params.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    /// Replaces a parameter's value, keeping its shape.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let slot = self
            .params
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        if slot.shape() != value.shape() {
            return Err(Error::ShapeMismatch {
                name: name.to_string(),
                expected: slot.shape(),
                found: value.shape(),
            });
        }
        *slot = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.params.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar entries.
    pub fn num_scalars(&self) -> usize {
        self.params.values().map(|t| t.len()).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        flatten(&self.params)
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_scalars() {
            return Err(Error::DimensionMismatch(format!(
                "flat vector has {} entries, store holds {}",
                flat.len(),
                self.num_scalars()
            )));
        }
        let mut offset = 0;
        for t in self.params.values_mut() {
            let (r, c) = t.shape();
            for i in 0..r {
                for j in 0..c {
                    t[(i, j)] = flat[offset];
                    offset += 1;
                }
            }
        }
        Ok(())
    }

    /// True when both stores hold the same names with the same shapes.
    pub fn same_layout(&self, other: &ParameterStore) -> bool {
        self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|((na, a), (nb, b))| na == nb && a.shape() == b.shape())
    }
}

fn flatten(map: &BTreeMap<String, Tensor>) -> Vec<f64> {
    let mut out = Vec::new();
    for t in map.values() {
        for i in 0..t.nrows() {
            for j in 0..t.ncols() {
                out.push(t[(i, j)]);
            }
        }
    }
    out
}

/// Named gradient arrays, one per stored parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: BTreeMap<String, Tensor>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.grads.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.grads.iter()
    }

    /// Same ordering as [`ParameterStore::flat`].
    pub fn flat(&self) -> Vec<f64> {
        flatten(&self.grads)
    }

    pub fn max_abs(&self) -> f64 {
        self.grads.values().map(|g| g.amax()).fold(0.0, f64::max)
    }
}

/// Adam moment accumulators for one parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: BTreeMap<String, Tensor>,
    second: BTreeMap<String, Tensor>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(store: &ParameterStore) -> Self {
        Self::with_constants(store, 0.9, 0.999, 1e-8)
    }

    pub fn with_constants(store: &ParameterStore, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: BTreeMap<String, Tensor> = store
            .iter()
            .map(|(n, t)| (n.clone(), Tensor::zeros(t.nrows(), t.ncols())))
            .collect();
        AdamState {
            first: zeros.clone(),
            second: zeros,
            step: 0,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update that descends along `grads`.
pub fn adam_step(
    store: &mut ParameterStore,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    for (name, p) in store.params.iter() {
        let g = grads
            .get(name)
            .ok_or_else(|| Error::UnknownParameter(name.clone()))?;
        let m = state
            .first
            .get(name)
            .ok_or_else(|| Error::UnknownParameter(name.clone()))?;
        for (what, found) in [("gradient", g.shape()), ("moment", m.shape())] {
            if found != p.shape() {
                return Err(Error::ShapeMismatch {
                    name: format!("{name} ({what})"),
                    expected: p.shape(),
                    found,
                });
            }
        }
    }

    state.step += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for (name, p) in store.params.iter_mut() {
        let g = &grads.grads[name];
        let m = state.first.get_mut(name).expect("checked above");
        let v = state.second.get_mut(name).expect("mirrors first");
        for idx in 0..p.len() {
            let gi = g[idx];
            m[idx] = b1 * m[idx] + (1.0 - b1) * gi;
            v[idx] = b2 * v[idx] + (1.0 - b2) * gi * gi;
            let m_hat = m[idx] / c1;
            let v_hat = v[idx] / c2;
            p[idx] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Settings for [`finite_diff_check`].
#[derive(Debug, Clone, Copy)]
pub struct FiniteDiffConfig {
    pub step: f64,
    /// Stores larger than this are checked on a random coordinate subset
    /// of this size.
    pub max_coords: usize,
    pub seed: u64,
}

impl Default for FiniteDiffConfig {
    fn default() -> Self {
        FiniteDiffConfig {
            step: 1e-5,
            max_coords: 500,
            seed: 0,
        }
    }
}

/// Compares the tape gradient of `loss` against central differences and
/// returns the largest relative error, using `max(|a|, |b|, 1e-8)` as the
/// denominator.
///
/// `loss` records a scalar on the supplied tape, binding parameters from the
/// supplied store. It must be deterministic.
pub fn finite_diff_check<F>(mut loss: F, store: &ParameterStore, config: FiniteDiffConfig) -> Result<f64>
where
    F: FnMut(&mut Tape, &ParameterStore) -> Result<Var>,
{
    if !(config.step > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step must be positive, got {}",
            config.step
        )));
    }
    let mut eval = |s: &ParameterStore| -> Result<(f64, Tape, Var)> {
        let mut tape = Tape::new();
        let root = loss(&mut tape, s)?;
        Ok((tape.scalar(root), tape, root))
    };

    let (base, tape, root) = eval(store)?;
    let (again, _, _) = eval(store)?;
    if base.to_bits() != again.to_bits() {
        return Err(Error::NonDeterministicLoss(base, again));
    }
    let analytic = tape.gradient(root, store)?.flat();

    let n = analytic.len();
    let coords: Vec<usize> = if n > config.max_coords {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut c = index::sample(&mut rng, n, config.max_coords.max(50).min(n)).into_vec();
        c.sort_unstable();
        c
    } else {
        (0..n).collect()
    };

    let flat = store.flat();
    let mut probe = store.clone();
    let mut worst = 0.0f64;
    for &i in &coords {
        let mut shifted = flat.clone();
        shifted[i] = flat[i] + config.step;
        probe.set_flat(&shifted)?;
        let (up, _, _) = eval(&probe)?;
        shifted[i] = flat[i] - config.step;
        probe.set_flat(&shifted)?;
        let (down, _, _) = eval(&probe)?;
        let numeric = (up - down) / (2.0 * config.step);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}
