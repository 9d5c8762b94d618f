//! Gated recurrent unit without biases, with a learnable initial state.
//!
//! States are row-major batches: an `R x k` hidden matrix carries `R`
//! independent sequences that share one set of weights. One step computes
//!
//! ```text
//! z  = sigmoid(x W1 + h W2)
//! r  = sigmoid(x W3 + h W4)
//! h~ = tanh(x W5 + r * (h W6))
//! h' = z * h + (1 - z) * h~
//! ```
//!
//! where `W1, W3, W5` are `d_in x k` and `W2, W4, W6` are `k x k`.

use std::cell::Cell;

use nalgebra::DMatrix;
use rand::Rng;

use crate::autodiff::{ParameterStore, Tape, Tensor, Var};
use crate::error::{Error, Result};

const WEIGHT_NAMES: [&str; 6] = ["w1", "w2", "w3", "w4", "w5", "w6"];

/// Plain-value GRU parameters. `h0` has one row per sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub weights: [Tensor; 6],
    pub h0: Tensor,
}

impl GruParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize, sequences: usize) -> Self {
        let weights = std::array::from_fn(|i| {
            let rows = if i % 2 == 0 { input_dim } else { hidden_dim };
            Tensor::zeros(rows, hidden_dim)
        });
        GruParams {
            weights,
            h0: Tensor::zeros(sequences, hidden_dim),
        }
    }

    /// Weights uniform in `[-scale, scale]`, zero initial state.
    pub fn random<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        sequences: usize,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim, sequences);
        for w in &mut p.weights {
            for v in w.iter_mut() {
                *v = rng.random_range(-scale..=scale);
            }
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.weights[1].ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (d, k) = (self.input_dim(), self.hidden_dim());
        for (i, w) in self.weights.iter().enumerate() {
            let expected = if i % 2 == 0 { (d, k) } else { (k, k) };
            if w.shape() != expected {
                return Err(Error::ShapeMismatch {
                    name: WEIGHT_NAMES[i].to_string(),
                    expected,
                    found: w.shape(),
                });
            }
        }
        if self.h0.ncols() != k {
            return Err(Error::ShapeMismatch {
                name: "h0".into(),
                expected: (self.h0.nrows(), k),
                found: self.h0.shape(),
            });
        }
        Ok(())
    }

    /// Stores every array as `{prefix}.w1` .. `{prefix}.w6` and `{prefix}.h0`.
    pub fn insert_into(&self, store: &mut ParameterStore, prefix: &str) -> Result<()> {
        self.validate()?;
        for (name, w) in WEIGHT_NAMES.iter().zip(&self.weights) {
            store.insert(format!("{prefix}.{name}"), w.clone())?;
        }
        store.insert(format!("{prefix}.h0"), self.h0.clone())
    }

    pub fn from_store(store: &ParameterStore, prefix: &str) -> Result<Self> {
        let fetch = |name: &str| {
            let full = format!("{prefix}.{name}");
            store
                .get(&full)
                .cloned()
                .ok_or(Error::UnknownParameter(full))
        };
        let weights = [
            fetch("w1")?,
            fetch("w2")?,
            fetch("w3")?,
            fetch("w4")?,
            fetch("w5")?,
            fetch("w6")?,
        ];
        let p = GruParams {
            weights,
            h0: fetch("h0")?,
        };
        p.validate()?;
        Ok(p)
    }
}

/// A GRU whose parameters are bound onto a tape.
#[derive(Debug)]
pub struct GruCell {
    weights: [Var; 6],
    h0: Var,
    input_dim: usize,
    hidden_dim: usize,
    steps: Cell<usize>,
}

impl GruCell {
    /// Binds `{prefix}.*` parameters from a store.
    pub fn bind(tape: &mut Tape, store: &ParameterStore, prefix: &str) -> Result<Self> {
        let params = GruParams::from_store(store, prefix)?;
        let weights: [Var; 6] = WEIGHT_NAMES
            .iter()
            .map(|name| tape.param(store, &format!("{prefix}.{name}")))
            .collect::<Result<Vec<_>>>()?
            .try_into()
            .expect("six weight names");
        let h0 = tape.param(store, &format!("{prefix}.h0"))?;
        Ok(GruCell {
            weights,
            h0,
            input_dim: params.input_dim(),
            hidden_dim: params.hidden_dim(),
            steps: Cell::new(0),
        })
    }

    /// Records plain values as differentiable leaves.
    pub fn from_params(tape: &mut Tape, params: &GruParams) -> Result<Self> {
        params.validate()?;
        let weights = std::array::from_fn(|i| tape.leaf(params.weights[i].clone()));
        let h0 = tape.leaf(params.h0.clone());
        Ok(GruCell {
            weights,
            h0,
            input_dim: params.input_dim(),
            hidden_dim: params.hidden_dim(),
            steps: Cell::new(0),
        })
    }

    pub fn weights(&self) -> &[Var; 6] {
        &self.weights
    }

    /// Learnable initial hidden state, one row per sequence.
    pub fn initial_state(&self) -> Var {
        self.h0
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    /// Number of steps recorded through this cell so far.
    pub fn steps_taken(&self) -> usize {
        self.steps.get()
    }

    /// One recurrence step for a batch of sequences.
    pub fn step(&self, tape: &mut Tape, h_prev: Var, x: Var) -> Result<Var> {
        let (h_shape, x_shape) = (tape.value(h_prev).shape(), tape.value(x).shape());
        if h_shape.1 != self.hidden_dim {
            return Err(Error::ShapeMismatch {
                name: "hidden state".into(),
                expected: (h_shape.0, self.hidden_dim),
                found: h_shape,
            });
        }
        if x_shape != (h_shape.0, self.input_dim) {
            return Err(Error::ShapeMismatch {
                name: "input".into(),
                expected: (h_shape.0, self.input_dim),
                found: x_shape,
            });
        }
        let [w1, w2, w3, w4, w5, w6] = self.weights;

        let xz = tape.matmul(x, w1);
        let hz = tape.matmul(h_prev, w2);
        let z_pre = tape.add(xz, hz);
        let z = tape.sigmoid(z_pre);

        let xr = tape.matmul(x, w3);
        let hr = tape.matmul(h_prev, w4);
        let r_pre = tape.add(xr, hr);
        let r = tape.sigmoid(r_pre);

        let xc = tape.matmul(x, w5);
        let hc = tape.matmul(h_prev, w6);
        let gated = tape.mul(r, hc);
        let c_pre = tape.add(xc, gated);
        let cand = tape.tanh(c_pre);

        // h' = z*h + (1-z)*cand = cand + z*(h - cand)
        let diff = tape.sub(h_prev, cand);
        let kept = tape.mul(z, diff);
        let h = tape.add(cand, kept);

        self.steps.set(self.steps.get() + 1);
        Ok(h)
    }

    /// Runs one step per input starting from `h_init` and returns every
    /// produced state `h(1..=T)`.
    pub fn unroll(&self, tape: &mut Tape, h_init: Var, inputs: &[Var]) -> Result<Vec<Var>> {
        let mut states = Vec::with_capacity(inputs.len());
        let mut h = h_init;
        for &x in inputs {
            h = self.step(tape, h, x)?;
            states.push(h);
        }
        Ok(states)
    }

    /// Unrolls `steps` times from the learnable initial state with all-zero
    /// inputs, optionally restricted to a subset of sequences. The returned
    /// vector starts with the (selected) initial state itself, so it holds
    /// `steps + 1` entries.
    pub fn unroll_from_initial(&self, tape: &mut Tape, steps: usize, rows: Option<&[usize]>) -> Result<Vec<Var>> {
        let h0 = match rows {
            Some(r) => tape.select_rows(self.h0, r),
            None => self.h0,
        };
        let batch = tape.value(h0).nrows();
        let zeros = tape.constant(DMatrix::zeros(batch, self.input_dim));
        let inputs = vec![zeros; steps];
        let mut out = vec![h0];
        out.extend(self.unroll(tape, h0, &inputs)?);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_diff_check, FiniteDiffConfig};
    use crate::model::sigmoid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Straight-line transcription of the four update equations for a single
    /// column-vector sequence, written against the column convention
    /// `W^T x` to stay independent of the batched code path.
    fn reference_step(p: &GruParams, h: &[f64], x: &[f64]) -> Vec<f64> {
        let k = p.hidden_dim();
        let lin = |w: &Tensor, v: &[f64], j: usize| -> f64 { (0..v.len()).map(|i| w[(i, j)] * v[i]).sum() };
        let mut out = vec![0.0; k];
        let mut r = vec![0.0; k];
        for j in 0..k {
            r[j] = sigmoid(lin(&p.weights[2], x, j) + lin(&p.weights[3], h, j));
        }
        for j in 0..k {
            let z = sigmoid(lin(&p.weights[0], x, j) + lin(&p.weights[1], h, j));
            let cand = (lin(&p.weights[4], x, j) + r[j] * lin(&p.weights[5], h, j)).tanh();
            out[j] = z * h[j] + (1.0 - z) * cand;
        }
        out
    }

    fn row(t: &Tensor, i: usize) -> Vec<f64> {
        t.row(i).iter().copied().collect()
    }

    #[test]
    fn zero_weights_halve_state() {
        let mut p = GruParams::zeros(2, 3, 1);
        p.h0 = Tensor::from_row_slice(1, 3, &[0.8, -0.4, 2.0]);
        let mut tape = Tape::new();
        let cell = GruCell::from_params(&mut tape, &p).unwrap();
        let states = cell.unroll_from_initial(&mut tape, 3, None).unwrap();
        for (t, s) in states.iter().enumerate() {
            let expect = &p.h0 / 2f64.powi(t as i32);
            assert_eq!(tape.value(*s), &expect);
        }

        let mut tape = Tape::new();
        let zero = GruParams::zeros(2, 3, 1);
        let cell = GruCell::from_params(&mut tape, &zero).unwrap();
        let h = cell.unroll_from_initial(&mut tape, 1, None).unwrap()[1];
        assert_eq!(tape.value(h), &Tensor::zeros(1, 3));
    }

    #[test]
    fn step_matches_reference_transcription() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = GruParams::random(3, 4, 1, 0.8, &mut rng);
            let h: Vec<f64> = (0..4).map(|_| rng.random_range(-1.5..1.5)).collect();
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut tape = Tape::new();
            let cell = GruCell::from_params(&mut tape, &p).unwrap();
            let hv = tape.leaf(Tensor::from_row_slice(1, 4, &h));
            let xv = tape.leaf(Tensor::from_row_slice(1, 3, &x));
            let out = cell.step(&mut tape, hv, xv).unwrap();
            let expect = reference_step(&p, &h, &x);
            for j in 0..4 {
                assert!((tape.value(out)[(0, j)] - expect[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batched_rows_are_independent_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut p = GruParams::random(1, 3, 4, 0.5, &mut rng);
        p.h0 = Tensor::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        let mut tape = Tape::new();
        let cell = GruCell::from_params(&mut tape, &p).unwrap();
        let states = cell.unroll_from_initial(&mut tape, 4, None).unwrap();
        for seq in 0..4 {
            let mut h = row(&p.h0, seq);
            for t in 1..=4 {
                h = reference_step(&p, &h, &[0.0]);
                for j in 0..3 {
                    assert!((tape.value(states[t])[(seq, j)] - h[j]).abs() < 1e-12);
                }
            }
        }
        // subset unroll reproduces the selected rows
        let sub = cell.unroll_from_initial(&mut tape, 4, Some(&[2, 0])).unwrap();
        assert_eq!(tape.value(sub[4]).row(0), tape.value(states[4]).row(2));
        assert_eq!(tape.value(sub[4]).row(1), tape.value(states[4]).row(0));
    }

    #[test]
    fn unroll_counts_steps() {
        let p = GruParams::zeros(1, 2, 1);
        let mut tape = Tape::new();
        let cell = GruCell::from_params(&mut tape, &p).unwrap();
        let states = cell.unroll_from_initial(&mut tape, 5, None).unwrap();
        assert_eq!(states.len(), 6);
        assert_eq!(cell.steps_taken(), 5);
        let one = cell.unroll_from_initial(&mut tape, 1, None).unwrap();
        assert_eq!(one.len(), 2);
        assert_eq!(cell.steps_taken(), 6);
    }

    #[test]
    fn gates_and_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let p = GruParams::random(2, 3, 1, 3.0, &mut rng);
            let h: Vec<f64> = (0..3).map(|_| rng.random_range(-4.0..4.0)).collect();
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-4.0..4.0)).collect();
            let out = reference_step(&p, &h, &x);
            let bound = h.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let mut tape = Tape::new();
            let cell = GruCell::from_params(&mut tape, &p).unwrap();
            let hv = tape.leaf(Tensor::from_row_slice(1, 3, &h));
            let xv = tape.leaf(Tensor::from_row_slice(1, 2, &x));
            let hn = cell.step(&mut tape, hv, xv).unwrap();
            assert!(tape.value(hn).amax() <= bound + 1e-12);
            assert!(out.iter().all(|v| v.abs() <= bound + 1e-12));
            // the first sigmoid nodes after the binding are the gates
            for j in 0..3 {
                let zg = sigmoid((0..2).map(|i| p.weights[0][(i, j)] * x[i]).sum::<f64>()
                    + (0..3).map(|i| p.weights[1][(i, j)] * h[i]).sum::<f64>());
                assert!(zg > 0.0 && zg < 1.0);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let p = GruParams::zeros(2, 3, 1);
        let mut tape = Tape::new();
        let cell = GruCell::from_params(&mut tape, &p).unwrap();
        let h = tape.leaf(Tensor::zeros(1, 4));
        let x = tape.leaf(Tensor::zeros(1, 2));
        assert!(matches!(cell.step(&mut tape, h, x), Err(Error::ShapeMismatch { .. })));
        let h = tape.leaf(Tensor::zeros(1, 3));
        let x = tape.leaf(Tensor::zeros(1, 5));
        assert!(cell.step(&mut tape, h, x).is_err());

        let mut bad = GruParams::zeros(2, 3, 1);
        bad.weights[3] = Tensor::zeros(2, 3);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn unroll_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut p = GruParams::random(2, 3, 2, 0.7, &mut rng);
        p.h0 = Tensor::from_fn(2, 3, |_, _| rng.random_range(-1.0..1.0));
        let mut store = ParameterStore::new();
        p.insert_into(&mut store, "g").unwrap();
        let inputs: Vec<Tensor> = (0..3).map(|_| Tensor::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0))).collect();
        let err = finite_diff_check(
            |tape, s| {
                let cell = GruCell::bind(tape, s, "g")?;
                let xs: Vec<Var> = inputs.iter().map(|x| tape.constant(x.clone())).collect();
                let h0 = cell.initial_state();
                let states = cell.unroll(tape, h0, &xs)?;
                let last = *states.last().unwrap();
                let sq = tape.square(last);
                Ok(tape.sum(sq))
            },
            &store,
            FiniteDiffConfig::default(),
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");

        // sum of a 3-step unroll's outputs, gradient with respect to h0
        let err = finite_diff_check(
            |tape, s| {
                let cell = GruCell::bind(tape, s, "g")?;
                let states = cell.unroll_from_initial(tape, 3, None)?;
                let mut total = tape.sum(states[1]);
                for &h in &states[2..] {
                    let part = tape.sum(h);
                    total = tape.add(total, part);
                }
                Ok(total)
            },
            &store,
            FiniteDiffConfig::default(),
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn store_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = GruParams::random(1, 4, 3, 0.1, &mut rng);
        assert!(p.weights.iter().all(|w| w.amax() <= 0.1));
        let mut store = ParameterStore::new();
        p.insert_into(&mut store, "m").unwrap();
        assert_eq!(GruParams::from_store(&store, "m").unwrap(), p);
        assert!(GruParams::from_store(&store, "other").is_err());
    }
}
