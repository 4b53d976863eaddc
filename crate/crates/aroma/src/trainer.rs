//! Machinery shared by the adaptive trainer and the fixed-rank baselines:
//! batch sampling, the per-update gradient step, evaluation, and the
//! per-step record layout.

use crate::analysis::factored_update_flops;
use crate::error::Result;
use crate::linalg::{Matrix, Rng, Vector};
use crate::model::{loss, AdaptedModel, Batch, LossKind, Targets};
use crate::optim::{adam_step, AdamConfig, OptimizerSlot};
use serde::{Deserialize, Serialize};

/// Stream tags so batching, (re)initialization, and optimizer-state pruning
/// draw from independent substreams of one experiment seed.
pub const STREAM_BATCH: u64 = 1;
pub const STREAM_INIT: u64 = 2;
pub const STREAM_RESET: u64 = 3;

/// Training and evaluation data plus sampling settings for one run.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub train_inputs: Matrix,
    pub train_targets: Targets,
    pub eval_batch: Batch,
    pub loss_kind: LossKind,
    pub batch_size: usize,
}

impl TrainData {
    /// Batch rows actually used per update.
    pub fn effective_batch(&self) -> usize {
        self.batch_size.min(self.train_inputs.rows()).max(1)
    }

    /// Small fixed batch used to check that merges leave the model function
    /// unchanged.
    pub fn probe_batch(&self) -> Batch {
        let rows = self.eval_batch.inputs.rows().min(8);
        let cols = self.eval_batch.inputs.cols();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            data.extend_from_slice(self.eval_batch.inputs.row(r));
        }
        let inputs = Matrix::from_vec(rows, cols, data);
        let targets = match &self.eval_batch.targets {
            Targets::Values(t) => {
                let mut td = Vec::with_capacity(rows * t.cols());
                for r in 0..rows {
                    td.extend_from_slice(t.row(r));
                }
                Targets::Values(Matrix::from_vec(rows, t.cols(), td))
            }
            Targets::Labels(l) => Targets::Labels(l[..rows].to_vec()),
        };
        Batch { inputs, targets }
    }
}

/// Draws a minibatch of row indices uniformly with replacement. A batch size
/// covering the whole dataset short-circuits to the full dataset in order,
/// consuming no randomness: full-batch training is deterministic.
pub fn draw_batch(rng: &mut Rng, data: &TrainData) -> Batch {
    let n = data.train_inputs.rows();
    let cols = data.train_inputs.cols();
    let size = data.effective_batch();
    if size == n {
        return Batch {
            inputs: data.train_inputs.clone(),
            targets: data.train_targets.clone(),
        };
    }
    let idx: Vec<usize> = (0..size).map(|_| rng.next_below(n)).collect();

    let mut inputs = Vec::with_capacity(size * cols);
    for &i in &idx {
        inputs.extend_from_slice(data.train_inputs.row(i));
    }
    let inputs = Matrix::from_vec(size, cols, inputs);
    let targets = match &data.train_targets {
        Targets::Values(t) => {
            let mut td = Vec::with_capacity(size * t.cols());
            for &i in &idx {
                td.extend_from_slice(t.row(i));
            }
            Targets::Values(Matrix::from_vec(size, t.cols(), td))
        }
        Targets::Labels(l) => Targets::Labels(idx.iter().map(|&i| l[i]).collect()),
    };
    Batch { inputs, targets }
}

/// Adam state for the two tensors of one rank-one pair.
#[derive(Debug, Clone)]
pub struct PairSlots {
    pub b: OptimizerSlot,
    pub a: OptimizerSlot,
}

impl PairSlots {
    pub fn new(m: usize, n: usize) -> Self {
        PairSlots {
            b: OptimizerSlot::new(m),
            a: OptimizerSlot::new(n),
        }
    }
}

/// One forward/backward/update pass: every listed layer's active pairs take
/// an Adam step (b before a, pairs in order, layers in the given order).
/// Returns the batch loss.
pub fn gradient_step(
    model: &mut AdaptedModel,
    batch: &Batch,
    loss_kind: LossKind,
    layer_order: &[usize],
    slots: &mut [Option<Vec<PairSlots>>],
    adam: &AdamConfig,
    lr: f64,
) -> Result<f64> {
    let (outputs, tape) = model.forward(batch)?;
    let batch_loss = loss(&outputs, &batch.targets, loss_kind)?;
    let grads = model.backward(&tape, &batch.targets, loss_kind)?;

    for (slot_idx, &layer_idx) in layer_order.iter().enumerate() {
        let Some(pair_slots) = slots[slot_idx].as_mut() else {
            continue;
        };
        let Some(pair_grads) = grads[layer_idx].as_ref() else {
            continue;
        };
        let adapter = model.layers[layer_idx].adapter.as_mut().expect("adapter");
        for (pair, (pg, ps)) in adapter
            .active_mut()
            .iter_mut()
            .zip(pair_grads.iter().zip(pair_slots.iter_mut()))
        {
            adam_step(pair.b.data_mut(), pg.grad_b.data(), &mut ps.b, adam, lr)?;
            adam_step(pair.a.data_mut(), pg.grad_a.data(), &mut ps.a, adam, lr)?;
        }
    }
    Ok(batch_loss)
}

/// Loss for regression targets, accuracy for labels.
pub fn evaluate(model: &AdaptedModel, eval: &Batch, loss_kind: LossKind) -> Result<f64> {
    let (outputs, _) = model.forward(eval)?;
    match &eval.targets {
        Targets::Values(_) => loss(&outputs, &eval.targets, loss_kind),
        Targets::Labels(labels) => {
            let mut correct = 0usize;
            for (r, &label) in labels.iter().enumerate() {
                let row = outputs.row(r);
                let mut best = 0usize;
                for (c, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = c;
                    }
                }
                if best == label {
                    correct += 1;
                }
            }
            Ok(correct as f64 / labels.len() as f64)
        }
    }
}

/// Flattened probe outputs, for before/after comparisons around merges.
pub fn probe_outputs(model: &AdaptedModel, probe: &Batch) -> Result<Vec<f64>> {
    let (outputs, _) = model.forward(probe)?;
    Ok(outputs.data().to_vec())
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Adapter-path multiply-add count for one full batch at the model's current
/// per-layer ranks (merged plus active components).
pub fn current_flops(model: &AdaptedModel, batch_size: usize) -> u64 {
    let mut total = 0u64;
    for layer in &model.layers {
        if let Some(adapter) = &layer.adapter {
            let k = adapter.merged_rank() + adapter.active().len();
            total += batch_size as u64 * factored_update_flops(layer.out_dim(), layer.in_dim(), k);
        }
    }
    total
}

/// Per-step metrics row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// 0 is the pre-training snapshot; step k is the state after update k.
    pub step: u64,
    pub per_module_rank: Vec<usize>,
    pub trainable_params: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub eval_metric: Option<f64>,
    pub flops_step: u64,
}

/// A completed rank-one component, logged when its inner loop ends.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRecord {
    pub module_index: usize,
    pub outer_step: usize,
    /// False when the component was discarded at freeze instead of merged.
    pub merged: bool,
    pub b: Vector,
    pub a: Vector,
}

/// Probe deviation measured around one merge.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergeEvent {
    pub step: u64,
    pub module_index: usize,
    pub deviation: f64,
}

/// Everything a training run produces besides the adapted model itself.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub records: Vec<RunRecord>,
    pub pair_log: Vec<PairRecord>,
    pub merge_events: Vec<MergeEvent>,
}

impl TrainOutput {
    pub fn final_record(&self) -> &RunRecord {
        self.records
            .last()
            .expect("runs emit at least the step-0 record")
    }
}
