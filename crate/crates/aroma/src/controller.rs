//! The dual-loop rank-growth trainer.
//!
//! Every adapted layer trains a single rank-one pair in an inner loop; at
//! synchronized barriers each module either freezes (its relative weight
//! change fell below the outer tolerance) or merges the pair into the frozen
//! accumulator and reinitializes a fresh one, pruning optimizer state and
//! restarting the learning-rate ramp. A module's learned rank is the number
//! of merges it completed before freezing.

use crate::error::{Error, Result};
use crate::linalg::{kaiming_init, Rng};
use crate::model::{AdaptedModel, RankOnePair};
use crate::optim::{reset_states, AdamConfig, WarmupSchedule};
use crate::trainer::{
    current_flops, draw_batch, evaluate, gradient_step, max_abs_diff, probe_outputs, MergeEvent,
    PairRecord, PairSlots, RunRecord, TrainData, TrainOutput, STREAM_BATCH, STREAM_INIT,
    STREAM_RESET,
};
use serde::{Deserialize, Serialize};

/// Disables the inner stopping criterion: no signed relative change is ever
/// below negative infinity.
pub const EPS_IN_DISABLED: f64 = f64::NEG_INFINITY;
/// Disables the outer stopping criterion: the nonnegative weight-change ratio
/// is never strictly below zero.
pub const EPS_OUT_DISABLED: f64 = 0.0;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Maximum total training steps (T).
    pub max_steps: u64,
    /// Maximum inner steps per outer iteration (T_in).
    pub max_inner_steps: u64,
    /// Inner checking interval (dT_in).
    pub inner_check_interval: u64,
    /// Inner tolerance; `EPS_IN_DISABLED` turns the check off.
    pub eps_in: f64,
    /// Outer tolerance; `EPS_OUT_DISABLED` turns the check off.
    pub eps_out: f64,
    /// Scaling factor applied to the accumulated update.
    pub alpha: f64,
    /// Fraction of optimizer-state entries zeroed at each reset.
    pub prune_fraction: f64,
    /// Below this baseline norm the inner check reports not-converged
    /// instead of dividing by a near-zero previous norm.
    pub guard_delta: f64,
    /// Ablation switch: when false, merges skip the optimizer-state pruning.
    pub reset_enabled: bool,
    /// Whether a reset also restarts Adam's bias-correction counter.
    pub reset_step_counter: bool,
    /// Use |change| instead of the signed change in the inner check.
    pub abs_inner_change: bool,
    /// Evaluation cadence in steps.
    pub eval_every: u64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            max_steps: 3000,
            max_inner_steps: 200,
            inner_check_interval: 10,
            eps_in: 0.1,
            eps_out: 1e-3,
            alpha: 4.0,
            prune_fraction: 0.999,
            guard_delta: 1e-12,
            reset_enabled: true,
            reset_step_counter: true,
            abs_inner_change: false,
            eval_every: 10,
        }
    }
}

/// Per-module loop state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModuleState {
    pub layer_idx: usize,
    pub out_dim: usize,
    pub in_dim: usize,
    /// Outer step p, 1-based.
    pub outer_step: usize,
    /// Pair norm at the previous inner check (sliding window).
    pub prev_pair_norm: f64,
    pub inner_converged: bool,
    pub outer_converged: bool,
    pub frozen: bool,
}

/// Inner stopping criterion: the relative change of the pair norm since the
/// previous check is below `eps_in`. A baseline below `guard_delta` reports
/// not-converged; a fresh pair starts at norm zero and no convergence claim
/// can be made from it.
pub fn inner_check(
    pair: &RankOnePair,
    prev_norm: f64,
    eps_in: f64,
    guard_delta: f64,
    abs_change: bool,
) -> bool {
    if prev_norm < guard_delta {
        return false;
    }
    let mut change = (pair.fro_norm() - prev_norm) / prev_norm;
    if abs_change {
        change = change.abs();
    }
    change < eps_in
}

/// Outer stopping criterion: `alpha·‖b aᵀ‖_F / ‖W0 + alpha·B A‖_F < eps_out`.
pub fn outer_check(
    pair: &RankOnePair,
    alpha: f64,
    base_plus_merged_norm: f64,
    eps_out: f64,
) -> Result<bool> {
    if base_plus_merged_norm <= 0.0 {
        return Err(Error::numeric(
            "outer_check",
            "base-plus-merged norm is zero",
        ));
    }
    Ok(alpha * pair.fro_norm() / base_plus_merged_norm < eps_out)
}

/// Folds the active pair into the frozen accumulator and starts the next
/// outer step with a zero `b` and a Kaiming-initialized `a`.
pub fn merge_and_reinit(model: &mut AdaptedModel, module: &mut ModuleState, rng: &mut Rng) {
    let adapter = model.layers[module.layer_idx]
        .adapter
        .as_mut()
        .expect("adapted layer");
    adapter.merge_active();
    let a = kaiming_init(rng, module.in_dim, module.in_dim);
    adapter.set_active(vec![RankOnePair::fresh(module.out_dim, a)]);
    module.outer_step += 1;
    module.prev_pair_norm = 0.0;
    module.inner_converged = false;
}

/// Marks the module outer-converged: the active pair is discarded, not
/// merged, and the module stops training.
pub fn freeze_module(model: &mut AdaptedModel, module: &mut ModuleState) {
    let adapter = model.layers[module.layer_idx]
        .adapter
        .as_mut()
        .expect("adapted layer");
    adapter.discard_active();
    module.outer_converged = true;
    module.frozen = true;
}

/// Trainable scalars across all unfrozen modules: (m + n) per active pair.
pub fn count_trainable(modules: &[ModuleState], model: &AdaptedModel) -> usize {
    modules
        .iter()
        .filter(|s| !s.frozen)
        .map(|s| {
            let pairs = model.layers[s.layer_idx]
                .adapter
                .as_ref()
                .map(|a| a.active().len())
                .unwrap_or(0);
            pairs * (s.out_dim + s.in_dim)
        })
        .sum()
}

/// Initial trainable-parameter count for a set of adapted shapes at one
/// rank-one pair per module.
pub fn initial_trainable_params(shapes: &[(usize, usize)]) -> usize {
    shapes.iter().map(|(m, n)| m + n).sum()
}

/// Runs the synchronized dual loop until every module freezes or the step
/// budget is exhausted. The model's adapted layers must carry (possibly
/// empty) adapters; the first pair of each module is initialized here so the
/// whole training trajectory is a function of `seed`.
pub fn run(
    model: &mut AdaptedModel,
    data: &TrainData,
    cfg: &ControllerConfig,
    adam: &AdamConfig,
    schedule: &WarmupSchedule,
    seed: u64,
) -> Result<(Vec<ModuleState>, TrainOutput)> {
    let layer_idxs = model.adapted_layers();
    assert!(
        !layer_idxs.is_empty(),
        "the adaptive trainer needs at least one adapted layer"
    );

    let mut batch_rng = Rng::stream(seed, STREAM_BATCH);
    let mut init_rng = Rng::stream(seed, STREAM_INIT);
    let mut reset_rng = Rng::stream(seed, STREAM_RESET);

    let mut modules: Vec<ModuleState> = Vec::with_capacity(layer_idxs.len());
    let mut slots: Vec<Option<Vec<PairSlots>>> = Vec::with_capacity(layer_idxs.len());
    for &layer_idx in &layer_idxs {
        let (m, n) = {
            let layer = &model.layers[layer_idx];
            (layer.out_dim(), layer.in_dim())
        };
        let a = kaiming_init(&mut init_rng, n, n);
        model.layers[layer_idx]
            .adapter
            .as_mut()
            .expect("adapted layer")
            .set_active(vec![RankOnePair::fresh(m, a)]);
        model.layers[layer_idx].alpha = cfg.alpha;
        modules.push(ModuleState {
            layer_idx,
            out_dim: m,
            in_dim: n,
            outer_step: 1,
            prev_pair_norm: 0.0,
            inner_converged: false,
            outer_converged: false,
            frozen: false,
        });
        slots.push(Some(vec![PairSlots::new(m, n)]));
    }

    let probe = data.probe_batch();
    let mut records = Vec::new();
    let mut pair_log = Vec::new();
    let mut merge_events = Vec::new();

    let eval0 = evaluate(model, &data.eval_batch, data.loss_kind)?;
    records.push(RunRecord {
        step: 0,
        per_module_rank: vec![0; modules.len()],
        trainable_params: count_trainable(&modules, model),
        lr: schedule.lr_at(0, 0),
        train_loss: eval0,
        eval_metric: Some(eval0),
        flops_step: current_flops(model, data.effective_batch()),
    });

    let mut update: u64 = 0;
    let mut inner_t: u64 = 0;
    let mut steps_since_reset: u64 = 0;
    let mut has_reset = false;

    while update < cfg.max_steps && modules.iter().any(|m| !m.frozen) {
        let ssr = if has_reset { steps_since_reset } else { update };
        let lr = schedule.lr_at(update, ssr);

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
        update += 1;
        inner_t += 1;
        steps_since_reset += 1;

        // Inner checks every dT_in steps, sliding the comparison baseline.
        if inner_t.is_multiple_of(cfg.inner_check_interval) {
            for module in modules.iter_mut().filter(|m| !m.frozen) {
                let pair = &model.layers[module.layer_idx]
                    .adapter
                    .as_ref()
                    .expect("adapted layer")
                    .active()[0];
                if !module.inner_converged {
                    module.inner_converged = inner_check(
                        pair,
                        module.prev_pair_norm,
                        cfg.eps_in,
                        cfg.guard_delta,
                        cfg.abs_inner_change,
                    );
                }
                module.prev_pair_norm = pair.fro_norm();
            }
        }

        // Barrier: every unfrozen module converged, or the inner budget ran out.
        let barrier = inner_t == cfg.max_inner_steps
            || modules
                .iter()
                .filter(|m| !m.frozen)
                .all(|m| m.inner_converged);
        if barrier {
            let mut any_merge = false;
            for i in 0..modules.len() {
                if modules[i].frozen {
                    continue;
                }
                let layer_idx = modules[i].layer_idx;
                let pair = model.layers[layer_idx]
                    .adapter
                    .as_ref()
                    .expect("adapter")
                    .active()[0]
                    .clone();
                let denom = model.layers[layer_idx].base_plus_merged_norm();
                let converged = outer_check(&pair, cfg.alpha, denom, cfg.eps_out)?;
                pair_log.push(PairRecord {
                    module_index: i,
                    outer_step: modules[i].outer_step,
                    merged: !converged,
                    b: pair.b.clone(),
                    a: pair.a.clone(),
                });
                if converged {
                    freeze_module(model, &mut modules[i]);
                    slots[i] = None;
                } else {
                    let pre = probe_outputs(model, &probe)?;
                    merge_and_reinit(model, &mut modules[i], &mut init_rng);
                    let post = probe_outputs(model, &probe)?;
                    merge_events.push(MergeEvent {
                        step: update,
                        module_index: i,
                        deviation: max_abs_diff(&pre, &post),
                    });
                    if cfg.reset_enabled {
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
                    any_merge = true;
                }
            }
            inner_t = 0;
            if any_merge {
                // Fresh ramp for the new components.
                steps_since_reset = 0;
                has_reset = true;
            }
        }

        let all_frozen = modules.iter().all(|m| m.frozen);
        let do_eval =
            update.is_multiple_of(cfg.eval_every) || all_frozen || update == cfg.max_steps;
        records.push(RunRecord {
            step: update,
            per_module_rank: modules
                .iter()
                .map(|s| {
                    model.layers[s.layer_idx]
                        .adapter
                        .as_ref()
                        .map(|a| a.merged_rank())
                        .unwrap_or(0)
                })
                .collect(),
            trainable_params: count_trainable(&modules, model),
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

    Ok((
        modules,
        TrainOutput {
            records,
            pair_log,
            merge_events,
        },
    ))
}
