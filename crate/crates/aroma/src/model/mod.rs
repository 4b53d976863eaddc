//! A fixed stack of frozen linear layers, each optionally carrying a
//! low-rank adapter, with exact reverse-mode gradients for the trainable
//! adapter parameters.
//!
//! The adapter update is never materialized as an m-by-n matrix: both the
//! accumulated frozen components and the active pairs are applied as two
//! chained matrix-vector products per sample.

mod loss;

pub use loss::{loss, LossKind};

use crate::error::{Error, Result};
use crate::linalg::{matmul, Matrix, Vector};
use serde::{Deserialize, Serialize};

/// Elementwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative at pre-activation `z`; the relu subgradient at 0 is 0.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

/// One rank-one adapter component: column `b` (length m) and row `a`
/// (length n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOnePair {
    pub b: Vector,
    pub a: Vector,
}

impl RankOnePair {
    pub fn new(b: Vector, a: Vector) -> Self {
        RankOnePair { b, a }
    }

    /// Fresh pair contributing zero to the forward pass: `b` starts at zero.
    pub fn fresh(b_len: usize, a: Vector) -> Self {
        RankOnePair {
            b: Vector::zeros(b_len),
            a,
        }
    }

    pub fn fro_norm(&self) -> f64 {
        crate::linalg::rank_one_fro_norm(&self.b, &self.a)
    }
}

/// Adapter state for one layer: frozen merged components plus the currently
/// trainable pairs. Merged components never receive gradients.
///
/// The accumulated components are kept factorized one pair per entry; stacking
/// the `b`s as columns and the `a`s as rows recovers the merged matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterHandle {
    merged: Vec<RankOnePair>,
    active: Vec<RankOnePair>,
}

impl AdapterHandle {
    pub fn empty() -> Self {
        AdapterHandle {
            merged: Vec::new(),
            active: Vec::new(),
        }
    }

    pub fn with_active(pairs: Vec<RankOnePair>) -> Self {
        AdapterHandle {
            merged: Vec::new(),
            active: pairs,
        }
    }

    pub fn merged(&self) -> &[RankOnePair] {
        &self.merged
    }

    pub fn active(&self) -> &[RankOnePair] {
        &self.active
    }

    pub fn active_mut(&mut self) -> &mut [RankOnePair] {
        &mut self.active
    }

    /// Number of merged components, i.e. the nominal rank so far.
    pub fn merged_rank(&self) -> usize {
        self.merged.len()
    }

    /// Moves every active pair into the frozen accumulator.
    pub fn merge_active(&mut self) {
        self.merged.append(&mut self.active);
    }

    /// Drops the active pairs without merging them.
    pub fn discard_active(&mut self) {
        self.active.clear();
    }

    pub fn set_active(&mut self, pairs: Vec<RankOnePair>) {
        self.active = pairs;
    }

    /// Materializes the accumulated update `merged_B · merged_A` (without the
    /// active pairs). Returns a zero matrix when nothing has been merged.
    pub fn merged_delta(&self, m: usize, n: usize) -> Matrix {
        let mut acc = Matrix::zeros(m, n);
        for pair in &self.merged {
            for i in 0..m {
                let bi = pair.b.data()[i];
                for j in 0..n {
                    let v = acc.get(i, j) + bi * pair.a.data()[j];
                    acc.set(i, j, v);
                }
            }
        }
        acc
    }

    /// Materializes the full update including active pairs.
    pub fn full_delta(&self, m: usize, n: usize) -> Matrix {
        let mut acc = self.merged_delta(m, n);
        for pair in &self.active {
            for i in 0..m {
                let bi = pair.b.data()[i];
                for j in 0..n {
                    let v = acc.get(i, j) + bi * pair.a.data()[j];
                    acc.set(i, j, v);
                }
            }
        }
        acc
    }
}

/// A linear layer `x ↦ act(W·x + bias)` with a frozen base weight `w0` and an
/// optional adapter: the effective weight is `w0 + alpha·ΔW`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaptedLayer {
    w0: Matrix,
    bias: Option<Vector>,
    pub adapter: Option<AdapterHandle>,
    pub alpha: f64,
    pub activation: Activation,
}

impl AdaptedLayer {
    pub fn new(
        w0: Matrix,
        bias: Option<Vector>,
        adapter: Option<AdapterHandle>,
        alpha: f64,
        activation: Activation,
    ) -> Self {
        assert!(alpha > 0.0, "alpha must be positive");
        if let Some(b) = &bias {
            assert_eq!(b.len(), w0.rows());
        }
        AdaptedLayer {
            w0,
            bias,
            adapter,
            alpha,
            activation,
        }
    }

    pub fn frozen(w0: Matrix, activation: Activation) -> Self {
        AdaptedLayer::new(w0, None, None, 1.0, activation)
    }

    /// Frozen base weight; there is deliberately no mutable access.
    pub fn w0(&self) -> &Matrix {
        &self.w0
    }

    pub fn out_dim(&self) -> usize {
        self.w0.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.w0.cols()
    }

    /// `‖W0 + alpha·merged_B·merged_A‖_F`, the base-plus-merged magnitude the
    /// outer convergence check normalizes by.
    pub fn base_plus_merged_norm(&self) -> f64 {
        let mut acc = self.w0.clone();
        if let Some(adapter) = &self.adapter {
            let delta = adapter.merged_delta(self.w0.rows(), self.w0.cols());
            acc = acc.add(&delta.scaled(self.alpha)).expect("same shape");
        }
        crate::linalg::fro_norm(&acc)
    }
}

/// Regression targets or class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    Values(Matrix),
    Labels(Vec<usize>),
}

/// One minibatch; rows of `inputs` are samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub inputs: Matrix,
    pub targets: Targets,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Activation record retained by the forward pass for backprop.
#[derive(Debug, Clone)]
pub struct Tape {
    /// Input to each layer (element 0 is the batch input).
    layer_inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre_activations: Vec<Matrix>,
    pub outputs: Matrix,
}

/// Gradients for the active pairs of one adapted layer, in pair order.
#[derive(Debug, Clone)]
pub struct PairGrads {
    pub grad_b: Vector,
    pub grad_a: Vector,
}

/// Per-layer gradients; `None` for layers without active adapter pairs.
pub type ModelGrads = Vec<Option<Vec<PairGrads>>>;

/// The fixed layer stack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaptedModel {
    pub layers: Vec<AdaptedLayer>,
}

impl AdaptedModel {
    pub fn new(layers: Vec<AdaptedLayer>) -> Self {
        assert!(!layers.is_empty());
        AdaptedModel { layers }
    }

    /// Indices of layers carrying an adapter.
    pub fn adapted_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.adapter.is_some())
            .map(|(i, _)| i)
            .collect()
    }

    /// Applies `x·(alpha·ΔW)ᵀ` for one layer in factored form, accumulating
    /// into `out`. Merged pairs first, then active pairs.
    fn adapter_contribution(layer: &AdaptedLayer, x: &Matrix, out: &mut Matrix) {
        let Some(adapter) = &layer.adapter else {
            return;
        };
        let batch = x.rows();
        let n = layer.in_dim();
        let m = layer.out_dim();
        debug_assert_eq!(x.cols(), n);
        for pair in adapter.merged.iter().chain(adapter.active.iter()) {
            for r in 0..batch {
                let xr = x.row(r);
                let mut s = 0.0;
                for j in 0..n {
                    s += xr[j] * pair.a.data()[j];
                }
                let s = s * layer.alpha;
                let orow = &mut out.data_mut()[r * m..(r + 1) * m];
                for (o, bv) in orow.iter_mut().zip(pair.b.data().iter()) {
                    *o += s * bv;
                }
            }
        }
    }

    /// Runs the stack on a batch, recording pre-activations for backprop.
    pub fn forward(&self, batch: &Batch) -> Result<(Matrix, Tape)> {
        let mut x = batch.inputs.clone();
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());

        for (idx, layer) in self.layers.iter().enumerate() {
            if x.cols() != layer.in_dim() {
                return Err(Error::dimension(
                    "forward",
                    format!(
                        "layer {idx} expects {} inputs, got {}",
                        layer.in_dim(),
                        x.cols()
                    ),
                ));
            }
            let mut z = matmul(&x, &layer.w0.transposed())?;
            if let Some(bias) = &layer.bias {
                for r in 0..z.rows() {
                    let row = &mut z.data_mut()[r * layer.out_dim()..(r + 1) * layer.out_dim()];
                    for (zv, bv) in row.iter_mut().zip(bias.data().iter()) {
                        *zv += bv;
                    }
                }
            }
            Self::adapter_contribution(layer, &x, &mut z);

            let mut h = z.clone();
            for v in h.data_mut().iter_mut() {
                *v = layer.activation.apply(*v);
            }
            layer_inputs.push(x);
            pre_activations.push(z);
            x = h;
        }

        let tape = Tape {
            layer_inputs,
            pre_activations,
            outputs: x.clone(),
        };
        Ok((x, tape))
    }

    /// Exact gradients of the loss with respect to every active pair.
    /// Frozen tensors (base weights, biases, merged components) get none.
    pub fn backward(&self, tape: &Tape, targets: &Targets, kind: LossKind) -> Result<ModelGrads> {
        // dL/dH at the top of the stack.
        let mut grad_h = loss::loss_grad(&tape.outputs, targets, kind)?;
        let mut grads: ModelGrads = vec![None; self.layers.len()];

        for idx in (0..self.layers.len()).rev() {
            let layer = &self.layers[idx];
            let z = &tape.pre_activations[idx];
            let x = &tape.layer_inputs[idx];
            let batch = x.rows();
            let m = layer.out_dim();
            let n = layer.in_dim();

            // dL/dZ = dL/dH ⊙ act'(Z)
            let mut grad_z = grad_h;
            for (gz, zv) in grad_z.data_mut().iter_mut().zip(z.data().iter()) {
                *gz *= layer.activation.derivative(*zv);
            }

            if let Some(adapter) = &layer.adapter {
                if !adapter.active.is_empty() {
                    let mut pair_grads = Vec::with_capacity(adapter.active.len());
                    for pair in &adapter.active {
                        // s_r = a·x_r, u_r = dZ_r·b
                        let mut grad_b = Vector::zeros(m);
                        let mut grad_a = Vector::zeros(n);
                        for r in 0..batch {
                            let xr = x.row(r);
                            let gzr = grad_z.row(r);
                            let mut s = 0.0;
                            for j in 0..n {
                                s += xr[j] * pair.a.data()[j];
                            }
                            let mut u = 0.0;
                            for i in 0..m {
                                u += gzr[i] * pair.b.data()[i];
                            }
                            for i in 0..m {
                                grad_b.data_mut()[i] += layer.alpha * s * gzr[i];
                            }
                            for j in 0..n {
                                grad_a.data_mut()[j] += layer.alpha * u * xr[j];
                            }
                        }
                        pair_grads.push(PairGrads { grad_b, grad_a });
                    }
                    grads[idx] = Some(pair_grads);
                }
            }

            if idx == 0 {
                break;
            }

            // dL/dX = dZ·W_eff, computed in factored form.
            let mut grad_x = matmul(&grad_z, &layer.w0)?;
            if let Some(adapter) = &layer.adapter {
                for pair in adapter.merged.iter().chain(adapter.active.iter()) {
                    for r in 0..batch {
                        let gzr = grad_z.row(r);
                        let mut u = 0.0;
                        for i in 0..m {
                            u += gzr[i] * pair.b.data()[i];
                        }
                        let u = u * layer.alpha;
                        let row = &mut grad_x.data_mut()[r * n..(r + 1) * n];
                        for (g, av) in row.iter_mut().zip(pair.a.data().iter()) {
                            *g += u * av;
                        }
                    }
                }
            }
            grad_h = grad_x;
        }
        Ok(grads)
    }
}
