//! Sawtooth learning-rate schedule: a linear warmup at run start and a
//! shorter re-warmup after every optimizer reset.

use serde::{Deserialize, Serialize};

/// What happens to the base rate after the ramp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayPolicy {
    /// Hold `base_lr` flat between ramps.
    Constant,
    /// Scale `base_lr` by `1 - global_step/horizon`.
    LinearToZero { horizon: u64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WarmupSchedule {
    pub initial_warmup_steps: u64,
    pub rewarmup_steps: u64,
    pub base_lr: f64,
    pub decay: DecayPolicy,
}

impl WarmupSchedule {
    pub fn constant(base_lr: f64, initial_warmup_steps: u64, rewarmup_steps: u64) -> Self {
        WarmupSchedule {
            initial_warmup_steps,
            rewarmup_steps,
            base_lr,
            decay: DecayPolicy::Constant,
        }
    }

    /// Learning rate for the update at `global_step` (0-based).
    ///
    /// `steps_since_last_reset` counts updates since the most recent reset,
    /// 0 at the first post-reset update. Before any reset it equals
    /// `global_step`, which selects the initial warmup window; afterwards it
    /// is strictly smaller and selects the re-warmup window.
    pub fn lr_at(&self, global_step: u64, steps_since_last_reset: u64) -> f64 {
        debug_assert!(steps_since_last_reset <= global_step);
        let (window, into) = if steps_since_last_reset == global_step {
            (self.initial_warmup_steps, global_step)
        } else {
            (self.rewarmup_steps, steps_since_last_reset)
        };
        let ramp = if window == 0 || into >= window {
            1.0
        } else {
            into as f64 / window as f64
        };
        let decay = match self.decay {
            DecayPolicy::Constant => 1.0,
            DecayPolicy::LinearToZero { horizon } => {
                if horizon == 0 {
                    1.0
                } else {
                    (1.0 - global_step as f64 / horizon as f64).max(0.0)
                }
            }
        };
        self.base_lr * ramp * decay
    }
}
