//! Adam with decoupled weight decay, per-tensor moment state, and randomized
//! state pruning for subspace switching.

mod schedule;

pub use schedule::{DecayPolicy, WarmupSchedule};

use crate::error::{Error, Result};
use crate::linalg::Rng;
use serde::{Deserialize, Serialize};

/// Adam hyperparameters. `lr_peak` is the schedule's base rate; the actual
/// per-step rate comes from [`WarmupSchedule::lr_at`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr_peak: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr_peak: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// First/second moment buffers plus step counter for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSlot {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl OptimizerSlot {
    pub fn new(len: usize) -> Self {
        OptimizerSlot {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One Adam update with decoupled weight decay.
///
/// On a non-finite gradient the slot and parameter are left untouched and a
/// numeric error is returned.
pub fn adam_step(
    param: &mut [f64],
    grad: &[f64],
    slot: &mut OptimizerSlot,
    cfg: &AdamConfig,
    lr_t: f64,
) -> Result<()> {
    if param.len() != grad.len() || slot.m.len() != param.len() {
        return Err(Error::dimension(
            "adam_step",
            format!(
                "param {} grad {} slot {}",
                param.len(),
                grad.len(),
                slot.m.len()
            ),
        ));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::numeric("adam_step", "non-finite gradient"));
    }
    debug_assert!(lr_t >= 0.0);

    slot.step += 1;
    let t = slot.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);

    for i in 0..param.len() {
        let g = grad[i];
        slot.m[i] = cfg.beta1 * slot.m[i] + (1.0 - cfg.beta1) * g;
        slot.v[i] = cfg.beta2 * slot.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = slot.m[i] / bc1;
        let v_hat = slot.v[i] / bc2;
        param[i] -= lr_t * (m_hat / (v_hat.sqrt() + cfg.eps));
        param[i] -= lr_t * cfg.weight_decay * param[i];
    }
    Ok(())
}

/// Zeroes a uniformly random `floor(fraction * N)` subset of moment entries,
/// at the same positions in `m` and `v`. Parameter values are untouched.
/// When `reset_step_counter` is set the bias-correction counter restarts.
pub fn reset_states(
    slot: &mut OptimizerSlot,
    fraction: f64,
    rng: &mut Rng,
    reset_step_counter: bool,
) {
    assert!((0.0..=1.0).contains(&fraction));
    let n = slot.m.len();
    let count = (fraction * n as f64).floor() as usize;
    let count = count.min(n);
    if count > 0 {
        for idx in rng.sample_indices(n, count) {
            slot.m[idx] = 0.0;
            slot.v[idx] = 0.0;
        }
    }
    if reset_step_counter {
        slot.step = 0;
    }
}
