//! Fixed-rank baselines sharing the model and optimizer: plain low-rank
//! adapters at a constant rank, and the periodic merge-and-restart trainer
//! that the adaptive method reduces to when both stopping criteria are
//! disabled.

use crate::error::Result;
use crate::linalg::{kaiming_init, Rng};
use crate::model::{AdaptedModel, RankOnePair};
use crate::optim::{reset_states, AdamConfig, WarmupSchedule};
use crate::trainer::{
    current_flops, draw_batch, evaluate, gradient_step, max_abs_diff, probe_outputs, MergeEvent,
    PairRecord, PairSlots, RunRecord, TrainData, TrainOutput, STREAM_BATCH, STREAM_INIT,
    STREAM_RESET,
};
use serde::{Deserialize, Serialize};

/// Constant-rank adapter training: `ΔW = B·A` with `B` zero-initialized and
/// `A` Kaiming-initialized, scaled by `alpha / rank`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LoraConfig {
    pub rank: usize,
    pub alpha: f64,
    pub max_steps: u64,
    pub eval_every: u64,
}

impl Default for LoraConfig {
    fn default() -> Self {
        LoraConfig {
            rank: 8,
            alpha: 16.0,
            max_steps: 3000,
            eval_every: 10,
        }
    }
}

/// Periodic merge-and-restart training: every cycle of `cycle_steps` the
/// rank-one pair is merged unconditionally, reinitialized, and the optimizer
/// state pruned, for `floor(max_steps / cycle_steps)` merges total.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReloraConfig {
    pub cycle_steps: u64,
    pub max_steps: u64,
    pub alpha: f64,
    pub prune_fraction: f64,
    pub reset_step_counter: bool,
    pub eval_every: u64,
}

impl Default for ReloraConfig {
    fn default() -> Self {
        ReloraConfig {
            cycle_steps: 200,
            max_steps: 3000,
            alpha: 4.0,
            prune_fraction: 0.999,
            reset_step_counter: true,
            eval_every: 10,
        }
    }
}

/// Trains every adapted layer at fixed rank `cfg.rank`. Rank and parameter
/// counts are constant over the whole run.
pub fn train_lora(
    model: &mut AdaptedModel,
    data: &TrainData,
    cfg: &LoraConfig,
    adam: &AdamConfig,
    schedule: &WarmupSchedule,
    seed: u64,
) -> Result<TrainOutput> {
    assert!(cfg.rank >= 1);
    let layer_idxs = model.adapted_layers();
    assert!(!layer_idxs.is_empty());

    let mut batch_rng = Rng::stream(seed, STREAM_BATCH);
    let mut init_rng = Rng::stream(seed, STREAM_INIT);

    let mut slots: Vec<Option<Vec<PairSlots>>> = Vec::with_capacity(layer_idxs.len());
    let mut trainable = 0usize;
    for &layer_idx in &layer_idxs {
        let (m, n) = {
            let layer = &model.layers[layer_idx];
            (layer.out_dim(), layer.in_dim())
        };
        assert!(
            cfg.rank <= m.min(n),
            "rank {} exceeds min dim of layer {layer_idx}",
            cfg.rank
        );
        let pairs: Vec<RankOnePair> = (0..cfg.rank)
            .map(|_| RankOnePair::fresh(m, kaiming_init(&mut init_rng, n, n)))
            .collect();
        let layer = &mut model.layers[layer_idx];
        layer
            .adapter
            .as_mut()
            .expect("adapted layer")
            .set_active(pairs);
        layer.alpha = cfg.alpha / cfg.rank as f64;
        slots.push(Some(vec![PairSlots::new(m, n); cfg.rank]));
        trainable += cfg.rank * (m + n);
    }

    let mut records = Vec::new();
    let eval0 = evaluate(model, &data.eval_batch, data.loss_kind)?;
    let ranks = vec![cfg.rank; layer_idxs.len()];
    records.push(RunRecord {
        step: 0,
        per_module_rank: ranks.clone(),
        trainable_params: trainable,
        lr: schedule.lr_at(0, 0),
        train_loss: eval0,
        eval_metric: Some(eval0),
        flops_step: current_flops(model, data.effective_batch()),
    });

    for update in 1..=cfg.max_steps {
        // No resets: the ramp argument always selects the initial window.
        let lr = schedule.lr_at(update - 1, update - 1);
        let batch = draw_batch(&mut batch_rng, data);
        let train_loss = gradient_step(
            model,
            &batch,
            data.loss_kind,
            &layer_idxs,
            &mut slots,
            adam,
            lr,
        )?;
        let do_eval = update % cfg.eval_every == 0 || update == cfg.max_steps;
        records.push(RunRecord {
            step: update,
            per_module_rank: ranks.clone(),
            trainable_params: trainable,
            lr,
            train_loss,
            eval_metric: if do_eval {
                Some(evaluate(model, &data.eval_batch, data.loss_kind)?)
            } else {
                None
            },
            flops_step: current_flops(model, data.effective_batch()),
        });
    }

    Ok(TrainOutput {
        records,
        pair_log: Vec::new(),
        merge_events: Vec::new(),
    })
}

/// Unconditional merge-and-restart training of one rank-one pair per module.
pub fn train_relora(
    model: &mut AdaptedModel,
    data: &TrainData,
    cfg: &ReloraConfig,
    adam: &AdamConfig,
    schedule: &WarmupSchedule,
    seed: u64,
) -> Result<TrainOutput> {
    assert!(cfg.cycle_steps >= 1);
    let layer_idxs = model.adapted_layers();
    assert!(!layer_idxs.is_empty());

    let mut batch_rng = Rng::stream(seed, STREAM_BATCH);
    let mut init_rng = Rng::stream(seed, STREAM_INIT);
    let mut reset_rng = Rng::stream(seed, STREAM_RESET);

    let mut dims: Vec<(usize, usize)> = Vec::with_capacity(layer_idxs.len());
    let mut slots: Vec<Option<Vec<PairSlots>>> = Vec::with_capacity(layer_idxs.len());
    for &layer_idx in &layer_idxs {
        let (m, n) = {
            let layer = &model.layers[layer_idx];
            (layer.out_dim(), layer.in_dim())
        };
        let a = kaiming_init(&mut init_rng, n, n);
        let layer = &mut model.layers[layer_idx];
        layer
            .adapter
            .as_mut()
            .expect("adapted layer")
            .set_active(vec![RankOnePair::fresh(m, a)]);
        layer.alpha = cfg.alpha;
        dims.push((m, n));
        slots.push(Some(vec![PairSlots::new(m, n)]));
    }
    let trainable: usize = dims.iter().map(|(m, n)| m + n).sum();

    let probe = data.probe_batch();
    let mut records = Vec::new();
    let mut pair_log = Vec::new();
    let mut merge_events = Vec::new();

    let eval0 = evaluate(model, &data.eval_batch, data.loss_kind)?;
    records.push(RunRecord {
        step: 0,
        per_module_rank: vec![0; layer_idxs.len()],
        trainable_params: trainable,
        lr: schedule.lr_at(0, 0),
        train_loss: eval0,
        eval_metric: Some(eval0),
        flops_step: current_flops(model, data.effective_batch()),
    });

    let mut cycle_t: u64 = 0;
    let mut steps_since_reset: u64 = 0;
    let mut has_reset = false;
    let mut outer_step = 1usize;

    for update in 1..=cfg.max_steps {
        let ssr = if has_reset {
            steps_since_reset
        } else {
            update - 1
        };
        let lr = schedule.lr_at(update - 1, ssr);
        let batch = draw_batch(&mut batch_rng, data);
        // Cost of this update, at the ranks it actually ran with.
        let step_flops = current_flops(model, data.effective_batch());
        let train_loss = gradient_step(
            model,
            &batch,
            data.loss_kind,
            &layer_idxs,
            &mut slots,
            adam,
            lr,
        )?;
        cycle_t += 1;
        steps_since_reset += 1;

        if cycle_t == cfg.cycle_steps {
            for (i, &layer_idx) in layer_idxs.iter().enumerate() {
                let adapter = model.layers[layer_idx].adapter.as_ref().expect("adapter");
                let pair = adapter.active()[0].clone();
                pair_log.push(PairRecord {
                    module_index: i,
                    outer_step,
                    merged: true,
                    b: pair.b,
                    a: pair.a,
                });

                let pre = probe_outputs(model, &probe)?;
                let (m, n) = dims[i];
                let adapter = model.layers[layer_idx].adapter.as_mut().expect("adapter");
                adapter.merge_active();
                let a = kaiming_init(&mut init_rng, n, n);
                adapter.set_active(vec![RankOnePair::fresh(m, a)]);
                let post = probe_outputs(model, &probe)?;
                merge_events.push(MergeEvent {
                    step: update,
                    module_index: i,
                    deviation: max_abs_diff(&pre, &post),
                });

                let pair_slots = slots[i].as_mut().expect("live module");
                for ps in pair_slots.iter_mut() {
                    reset_states(
                        &mut ps.b,
                        cfg.prune_fraction,
                        &mut reset_rng,
                        cfg.reset_step_counter,
                    );
                    reset_states(
                        &mut ps.a,
                        cfg.prune_fraction,
                        &mut reset_rng,
                        cfg.reset_step_counter,
                    );
                }
            }
            outer_step += 1;
            cycle_t = 0;
            steps_since_reset = 0;
            has_reset = true;
        }

        let do_eval = update % cfg.eval_every == 0 || update == cfg.max_steps;
        records.push(RunRecord {
            step: update,
            per_module_rank: layer_idxs
                .iter()
                .map(|&idx| {
                    model.layers[idx]
                        .adapter
                        .as_ref()
                        .map(|a| a.merged_rank())
                        .unwrap_or(0)
                })
                .collect(),
            trainable_params: trainable,
            lr,
            train_loss,
            eval_metric: if do_eval {
                Some(evaluate(model, &data.eval_batch, data.loss_kind)?)
            } else {
                None
            },
            flops_step: step_flops,
        });
    }

    Ok(TrainOutput {
        records,
        pair_log,
        merge_events,
    })
}
