//! Experiment configuration as structured key-value text.
//!
//! Grammar: one `key = value` per line, `#` starts a comment, blank lines
//! are ignored. Dotted keys group related settings. Every diagnostic carries
//! the 1-based line number; line 0 means a file-level problem such as a
//! missing required key.

use crate::baselines::{LoraConfig, ReloraConfig};
use crate::controller::ControllerConfig;
use crate::error::{Error, Result};
use crate::harness::task::{TaskKind, TaskSpec};
use crate::optim::{AdamConfig, DecayPolicy, WarmupSchedule};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum MethodConfig {
    Aroma(ControllerConfig),
    Lora(LoraConfig),
    Relora(ReloraConfig),
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Aroma(_) => "aroma",
            MethodConfig::Lora(_) => "lora",
            MethodConfig::Relora(_) => "relora",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskSpec,
    pub method: MethodConfig,
    pub adam: AdamConfig,
    pub schedule: WarmupSchedule,
    pub seed: u64,
    pub batch_size: usize,
    pub eval_every: u64,
    pub output: PathBuf,
}

struct Line<'a> {
    no: usize,
    key: &'a str,
    value: &'a str,
}

fn parse_lines(text: &str) -> Result<Vec<Line<'_>>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(Error::config(
                no,
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        let key = line[..eq].trim();
        let value = line[eq + 1..].trim();
        if key.is_empty() || value.is_empty() {
            return Err(Error::config(no, "empty key or value"));
        }
        out.push(Line { no, key, value });
    }
    Ok(out)
}

fn parse_f64(l: &Line) -> Result<f64> {
    l.value.parse::<f64>().map_err(|_| {
        Error::config(
            l.no,
            format!("key `{}` expects a number, got `{}`", l.key, l.value),
        )
    })
}

fn parse_u64(l: &Line) -> Result<u64> {
    l.value.parse::<u64>().map_err(|_| {
        Error::config(
            l.no,
            format!("key `{}` expects an integer, got `{}`", l.key, l.value),
        )
    })
}

fn parse_usize(l: &Line) -> Result<usize> {
    l.value.parse::<usize>().map_err(|_| {
        Error::config(
            l.no,
            format!("key `{}` expects an integer, got `{}`", l.key, l.value),
        )
    })
}

fn parse_bool(l: &Line) -> Result<bool> {
    match l.value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::config(
            l.no,
            format!("key `{}` expects true/false, got `{}`", l.key, l.value),
        )),
    }
}

/// Parses and validates a config, filling documented defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let lines = parse_lines(text)?;

    // Required pieces tracked as options.
    let mut task_kind: Option<TaskKind> = None;
    let mut task_m: Option<usize> = None;
    let mut task_n: Option<usize> = None;
    let mut task_layers = 1usize;
    let mut task_rank = 3usize;
    let mut task_noise = 0.0f64;
    let mut task_samples = 512usize;
    let mut task_seed = 0u64;

    let mut method_name = "aroma".to_string();

    let mut aroma = ControllerConfig::default();
    let mut lora = LoraConfig::default();
    let mut relora = ReloraConfig::default();
    let mut saw_aroma_keys: Option<usize> = None;
    let mut saw_lora_keys: Option<usize> = None;
    let mut saw_relora_keys: Option<usize> = None;

    let mut adam = AdamConfig::default();
    let mut lr = 1e-3f64;
    let mut warmup = 100u64;
    let mut rewarmup = 50u64;
    let mut decay_linear = false;
    let mut decay_horizon: Option<u64> = None;

    let mut seed = 0u64;
    let mut batch_size = 32usize;
    let mut eval_every = 10u64;
    let mut output = PathBuf::from("aroma_out");

    for l in &lines {
        match l.key {
            "task.kind" => {
                task_kind = Some(match l.value {
                    "lowrank_regression" => TaskKind::LowRankRegression,
                    "blob_classification" => TaskKind::BlobClassification,
                    other => {
                        return Err(Error::config(l.no, format!("unknown task kind `{other}`")))
                    }
                });
            }
            "task.m" => task_m = Some(parse_usize(l)?),
            "task.n" => task_n = Some(parse_usize(l)?),
            "task.layers" => task_layers = parse_usize(l)?,
            "task.rank" => task_rank = parse_usize(l)?,
            "task.noise_std" => task_noise = parse_f64(l)?,
            "task.samples" => task_samples = parse_usize(l)?,
            "task.seed" => task_seed = parse_u64(l)?,

            "method" => {
                method_name = l.value.to_string();
                if !["aroma", "lora", "relora"].contains(&l.value) {
                    return Err(Error::config(l.no, format!("unknown method `{}`", l.value)));
                }
            }

            "aroma.max_steps" => {
                aroma.max_steps = parse_u64(l)?;
                saw_aroma_keys.get_or_insert(l.no);
            }
            "aroma.inner_steps" => {
                aroma.max_inner_steps = parse_u64(l)?;
                saw_aroma_keys.get_or_insert(l.no);
            }
            "aroma.check_interval" => {
                aroma.inner_check_interval = parse_u64(l)?;
                saw_aroma_keys.get_or_insert(l.no);
            }
            "aroma.eps_in" => {
                aroma.eps_in = match l.value {
                    "disabled" => crate::controller::EPS_IN_DISABLED,
                    _ => parse_f64(l)?,
                };
                saw_aroma_keys.get_or_insert(l.no);
            }
            "aroma.eps_out" => {
                aroma.eps_out = match l.value {
                    "disabled" => crate::controller::EPS_OUT_DISABLED,
                    _ => parse_f64(l)?,
                };
                saw_aroma_keys.get_or_insert(l.no);
            }
            "aroma.alpha" => {
                aroma.alpha = parse_f64(l)?;
                saw_aroma_keys.get_or_insert(l.no);
            }
            "aroma.prune_fraction" => {
                aroma.prune_fraction = parse_f64(l)?;
                saw_aroma_keys.get_or_insert(l.no);
            }
            "aroma.reset" => {
                aroma.reset_enabled = parse_bool(l)?;
                saw_aroma_keys.get_or_insert(l.no);
            }
            "aroma.reset_step_counter" => {
                aroma.reset_step_counter = parse_bool(l)?;
                saw_aroma_keys.get_or_insert(l.no);
            }
            "aroma.abs_inner_change" => {
                aroma.abs_inner_change = parse_bool(l)?;
                saw_aroma_keys.get_or_insert(l.no);
            }

            "lora.rank" => {
                lora.rank = parse_usize(l)?;
                saw_lora_keys.get_or_insert(l.no);
            }
            "lora.alpha" => {
                lora.alpha = parse_f64(l)?;
                saw_lora_keys.get_or_insert(l.no);
            }
            "lora.max_steps" => {
                lora.max_steps = parse_u64(l)?;
                saw_lora_keys.get_or_insert(l.no);
            }

            "relora.cycle_steps" => {
                relora.cycle_steps = parse_u64(l)?;
                saw_relora_keys.get_or_insert(l.no);
            }
            "relora.max_steps" => {
                relora.max_steps = parse_u64(l)?;
                saw_relora_keys.get_or_insert(l.no);
            }
            "relora.alpha" => {
                relora.alpha = parse_f64(l)?;
                saw_relora_keys.get_or_insert(l.no);
            }
            "relora.prune_fraction" => {
                relora.prune_fraction = parse_f64(l)?;
                saw_relora_keys.get_or_insert(l.no);
            }

            "adam.lr" => lr = parse_f64(l)?,
            "adam.beta1" => adam.beta1 = parse_f64(l)?,
            "adam.beta2" => adam.beta2 = parse_f64(l)?,
            "adam.eps" => adam.eps = parse_f64(l)?,
            "adam.weight_decay" => adam.weight_decay = parse_f64(l)?,

            "schedule.warmup" => warmup = parse_u64(l)?,
            "schedule.rewarmup" => rewarmup = parse_u64(l)?,
            "schedule.decay" => match l.value {
                "constant" => decay_linear = false,
                "linear" => decay_linear = true,
                other => {
                    return Err(Error::config(
                        l.no,
                        format!("unknown decay policy `{other}`"),
                    ))
                }
            },
            "schedule.horizon" => decay_horizon = Some(parse_u64(l)?),

            "seed" => seed = parse_u64(l)?,
            "batch_size" => batch_size = parse_usize(l)?,
            "eval_every" => eval_every = parse_u64(l)?,
            "output" => output = PathBuf::from(l.value),

            other => {
                return Err(Error::config(l.no, format!("unknown key `{other}`")));
            }
        }
    }

    let task_kind =
        task_kind.ok_or_else(|| Error::config(0, "missing required key `task.kind`"))?;
    let task_m = task_m.ok_or_else(|| Error::config(0, "missing required key `task.m`"))?;
    let task_n = task_n.ok_or_else(|| Error::config(0, "missing required key `task.n`"))?;

    // Exactly one method section may appear.
    for (name, seen) in [
        ("aroma", saw_aroma_keys),
        ("lora", saw_lora_keys),
        ("relora", saw_relora_keys),
    ] {
        if let Some(line) = seen {
            if name != method_name {
                return Err(Error::config(
                    line,
                    format!("`{name}.*` keys present but method is `{method_name}`"),
                ));
            }
        }
    }

    if !(0.0..=1.0).contains(&aroma.prune_fraction) || !(0.0..=1.0).contains(&relora.prune_fraction)
    {
        return Err(Error::config(0, "prune_fraction must lie in [0, 1]"));
    }
    if batch_size == 0 || task_samples == 0 {
        return Err(Error::config(
            0,
            "batch_size and task.samples must be positive",
        ));
    }
    if task_samples < batch_size {
        return Err(Error::config(
            0,
            format!("task.samples {task_samples} smaller than batch_size {batch_size}"),
        ));
    }
    if aroma.max_steps == 0 || aroma.max_inner_steps == 0 || aroma.inner_check_interval == 0 {
        return Err(Error::config(
            0,
            "aroma step counts and check interval must be positive",
        ));
    }
    if lora.rank == 0 || lora.max_steps == 0 || relora.cycle_steps == 0 || relora.max_steps == 0 {
        return Err(Error::config(
            0,
            "method step counts and rank must be positive",
        ));
    }
    if aroma.alpha <= 0.0 || lora.alpha <= 0.0 || relora.alpha <= 0.0 {
        return Err(Error::config(0, "alpha must be positive"));
    }
    if eval_every == 0 {
        return Err(Error::config(0, "eval_every must be positive"));
    }
    if lr <= 0.0 {
        return Err(Error::config(0, "adam.lr must be positive"));
    }

    aroma.eval_every = eval_every;
    lora.eval_every = eval_every;
    relora.eval_every = eval_every;

    let method = match method_name.as_str() {
        "aroma" => MethodConfig::Aroma(aroma),
        "lora" => MethodConfig::Lora(lora),
        "relora" => MethodConfig::Relora(relora),
        _ => unreachable!("validated above"),
    };

    let horizon = decay_horizon.unwrap_or(match &method {
        MethodConfig::Aroma(c) => c.max_steps,
        MethodConfig::Lora(c) => c.max_steps,
        MethodConfig::Relora(c) => c.max_steps,
    });
    let schedule = WarmupSchedule {
        initial_warmup_steps: warmup,
        rewarmup_steps: rewarmup,
        base_lr: lr,
        decay: if decay_linear {
            DecayPolicy::LinearToZero { horizon }
        } else {
            DecayPolicy::Constant
        },
    };
    adam.lr_peak = lr;

    Ok(ExperimentConfig {
        task: TaskSpec {
            kind: task_kind,
            m: task_m,
            n: task_n,
            n_layers: task_layers,
            true_rank: task_rank,
            noise_std: task_noise,
            n_samples: task_samples,
            seed: task_seed,
        },
        method,
        adam,
        schedule,
        seed,
        batch_size,
        eval_every,
        output,
    })
}

impl ExperimentConfig {
    /// Canonical text form; parsing it reproduces this config exactly.
    pub fn to_normalized_string(&self) -> String {
        let mut s = String::new();
        let kind = match self.task.kind {
            TaskKind::LowRankRegression => "lowrank_regression",
            TaskKind::BlobClassification => "blob_classification",
        };
        s.push_str(&format!("task.kind = {kind}\n"));
        s.push_str(&format!("task.m = {}\n", self.task.m));
        s.push_str(&format!("task.n = {}\n", self.task.n));
        s.push_str(&format!("task.layers = {}\n", self.task.n_layers));
        s.push_str(&format!("task.rank = {}\n", self.task.true_rank));
        s.push_str(&format!("task.noise_std = {}\n", self.task.noise_std));
        s.push_str(&format!("task.samples = {}\n", self.task.n_samples));
        s.push_str(&format!("task.seed = {}\n", self.task.seed));
        s.push_str(&format!("method = {}\n", self.method.name()));
        match &self.method {
            MethodConfig::Aroma(c) => {
                s.push_str(&format!("aroma.max_steps = {}\n", c.max_steps));
                s.push_str(&format!("aroma.inner_steps = {}\n", c.max_inner_steps));
                s.push_str(&format!(
                    "aroma.check_interval = {}\n",
                    c.inner_check_interval
                ));
                if c.eps_in == crate::controller::EPS_IN_DISABLED {
                    s.push_str("aroma.eps_in = disabled\n");
                } else {
                    s.push_str(&format!("aroma.eps_in = {}\n", c.eps_in));
                }
                s.push_str(&format!("aroma.eps_out = {}\n", c.eps_out));
                s.push_str(&format!("aroma.alpha = {}\n", c.alpha));
                s.push_str(&format!("aroma.prune_fraction = {}\n", c.prune_fraction));
                s.push_str(&format!("aroma.reset = {}\n", c.reset_enabled));
                s.push_str(&format!(
                    "aroma.reset_step_counter = {}\n",
                    c.reset_step_counter
                ));
                s.push_str(&format!(
                    "aroma.abs_inner_change = {}\n",
                    c.abs_inner_change
                ));
            }
            MethodConfig::Lora(c) => {
                s.push_str(&format!("lora.rank = {}\n", c.rank));
                s.push_str(&format!("lora.alpha = {}\n", c.alpha));
                s.push_str(&format!("lora.max_steps = {}\n", c.max_steps));
            }
            MethodConfig::Relora(c) => {
                s.push_str(&format!("relora.cycle_steps = {}\n", c.cycle_steps));
                s.push_str(&format!("relora.max_steps = {}\n", c.max_steps));
                s.push_str(&format!("relora.alpha = {}\n", c.alpha));
                s.push_str(&format!("relora.prune_fraction = {}\n", c.prune_fraction));
            }
        }
        s.push_str(&format!("adam.lr = {}\n", self.schedule.base_lr));
        s.push_str(&format!("adam.beta1 = {}\n", self.adam.beta1));
        s.push_str(&format!("adam.beta2 = {}\n", self.adam.beta2));
        s.push_str(&format!("adam.eps = {}\n", self.adam.eps));
        s.push_str(&format!("adam.weight_decay = {}\n", self.adam.weight_decay));
        s.push_str(&format!(
            "schedule.warmup = {}\n",
            self.schedule.initial_warmup_steps
        ));
        s.push_str(&format!(
            "schedule.rewarmup = {}\n",
            self.schedule.rewarmup_steps
        ));
        match self.schedule.decay {
            DecayPolicy::Constant => s.push_str("schedule.decay = constant\n"),
            DecayPolicy::LinearToZero { horizon } => {
                s.push_str("schedule.decay = linear\n");
                s.push_str(&format!("schedule.horizon = {horizon}\n"));
            }
        }
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("batch_size = {}\n", self.batch_size));
        s.push_str(&format!("eval_every = {}\n", self.eval_every));
        s.push_str(&format!("output = {}\n", self.output.display()));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults_and_roundtrips() {
        let text = "task.kind = lowrank_regression\ntask.m = 32\ntask.n = 32\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.task.m, 32);
        assert_eq!(cfg.eval_every, 10);
        match &cfg.method {
            MethodConfig::Aroma(c) => {
                assert_eq!(c.eps_in, 0.1);
                assert_eq!(c.inner_check_interval, 10);
                assert_eq!(c.prune_fraction, 0.999);
            }
            _ => panic!("default method is the adaptive trainer"),
        }
        assert_eq!(cfg.adam.beta1, 0.9);
        assert_eq!(cfg.adam.beta2, 0.999);
        assert_eq!(cfg.schedule.initial_warmup_steps, 100);
        assert_eq!(cfg.schedule.rewarmup_steps, 50);

        let normalized = cfg.to_normalized_string();
        let cfg2 = parse_config(&normalized).unwrap();
        assert_eq!(normalized, cfg2.to_normalized_string());
    }

    #[test]
    fn type_error_names_key_and_line() {
        let text = "task.kind = lowrank_regression\ntask.m = 8\ntask.n = 8\naroma.eps_in = abc\n";
        let err = parse_config(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 4"), "{msg}");
        assert!(msg.contains("aroma.eps_in"), "{msg}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = "task.kind = lowrank_regression\ntask.m = 8\ntask.n = 8\nbogus = 1\n";
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("unknown key"), "{err}");
        assert!(err.contains("line 4"), "{err}");
    }

    #[test]
    fn missing_required_key_is_reported() {
        let err = parse_config("task.m = 8\ntask.n = 8\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("task.kind"), "{err}");
    }

    #[test]
    fn foreign_method_keys_are_rejected() {
        let text = "task.kind = lowrank_regression\ntask.m = 8\ntask.n = 8\n\
                    method = aroma\nlora.rank = 4\n";
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("lora"), "{err}");
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = "# header\n\ntask.kind = lowrank_regression # inline\ntask.m = 8\ntask.n = 8\n";
        assert!(parse_config(text).is_ok());
    }

    #[test]
    fn disabled_sentinels_parse() {
        let text = "task.kind = lowrank_regression\ntask.m = 8\ntask.n = 8\n\
                    aroma.eps_in = disabled\naroma.eps_out = disabled\n";
        let cfg = parse_config(text).unwrap();
        match cfg.method {
            MethodConfig::Aroma(c) => {
                assert_eq!(c.eps_in, crate::controller::EPS_IN_DISABLED);
                assert_eq!(c.eps_out, crate::controller::EPS_OUT_DISABLED);
            }
            _ => unreachable!(),
        }
    }
}
