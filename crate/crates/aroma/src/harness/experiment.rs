//! Seeded end-to-end runs with metrics persistence.
//!
//! Each run writes four artifacts into its output directory:
//! `records.csv` (one row per step per module), `summary.json`,
//! `checkpoint.json` (the final model), and `pairs.json` (the logged
//! rank-one components, for cross-run diagnostics).

use crate::analysis::{flop_ledger, rank_report, FlopLedger, RankReport, DEFAULT_TAIL_CUT};
use crate::baselines::{train_lora, train_relora};
use crate::controller;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, MethodConfig};
use crate::harness::task::gen_task;
use crate::model::AdaptedModel;
use crate::trainer::{PairRecord, RunRecord, TrainOutput};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

/// When set, relative output paths are re-rooted under this directory.
pub const OUTPUT_ROOT_ENV: &str = "AROMA_OUT_ROOT";

/// Everything a finished run leaves behind, both in memory and on disk.
#[derive(Debug)]
pub struct RunArtifacts {
    pub output_dir: PathBuf,
    pub model: AdaptedModel,
    pub output: TrainOutput,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub seed: u64,
    pub steps_run: u64,
    pub final_per_module_rank: Vec<usize>,
    pub total_rank: usize,
    pub final_trainable_params: usize,
    pub final_train_loss: f64,
    pub final_eval_metric: Option<f64>,
    pub all_modules_frozen: bool,
    pub merge_count: usize,
    /// Largest probe deviation observed across all merges.
    pub merge_continuity_max_dev: f64,
    /// Adapter-path multiply-adds summed over the whole run: the overall
    /// training cost, integrating the growing per-step cost.
    pub flops_total: u64,
    pub rank_report: RankReport,
    pub flops: FlopLedger,
}

fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !path.is_absolute() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}

/// Runs the configured trainer and persists metrics. The input config is
/// never modified.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let task = gen_task(&cfg.task, cfg.batch_size)?;
    let mut model = task.model.clone();

    let output = match &cfg.method {
        MethodConfig::Aroma(c) => {
            let (_modules, out) = controller::run(
                &mut model,
                &task.data,
                c,
                &cfg.adam,
                &cfg.schedule,
                cfg.seed,
            )?;
            out
        }
        MethodConfig::Lora(c) => train_lora(
            &mut model,
            &task.data,
            c,
            &cfg.adam,
            &cfg.schedule,
            cfg.seed,
        )?,
        MethodConfig::Relora(c) => train_relora(
            &mut model,
            &task.data,
            c,
            &cfg.adam,
            &cfg.schedule,
            cfg.seed,
        )?,
    };

    // Fold any still-active pairs into the frozen accumulator: training is
    // over, so the whole learned update is now frozen. Zero pairs (a fresh
    // reinit that never trained) contribute nothing and are dropped rather
    // than counted as rank. A fully converged adaptive run has nothing left
    // to fold.
    for idx in model.adapted_layers() {
        let adapter = model.layers[idx].adapter.as_mut().expect("adapter");
        let nonzero: Vec<_> = adapter
            .active()
            .iter()
            .filter(|p| p.fro_norm() > 0.0)
            .cloned()
            .collect();
        adapter.set_active(nonzero);
        adapter.merge_active();
    }

    let final_record = output.final_record().clone();
    let trainable_at_end = final_record.trainable_params;
    let all_frozen = trainable_at_end == 0;
    let summary = RunSummary {
        method: cfg.method.name().to_string(),
        seed: cfg.seed,
        steps_run: final_record.step,
        final_per_module_rank: final_record.per_module_rank.clone(),
        total_rank: final_record.per_module_rank.iter().sum(),
        final_trainable_params: trainable_at_end,
        final_train_loss: final_record.train_loss,
        final_eval_metric: final_record.eval_metric,
        all_modules_frozen: all_frozen,
        merge_count: output.merge_events.len(),
        merge_continuity_max_dev: output
            .merge_events
            .iter()
            .map(|e| e.deviation)
            .fold(0.0, f64::max),
        // Step 0 is a snapshot, not an update; the overall cost sums the
        // per-step cost of the updates actually performed.
        flops_total: output
            .records
            .iter()
            .filter(|r| r.step > 0)
            .map(|r| r.flops_step)
            .sum(),
        rank_report: rank_report(&model, DEFAULT_TAIL_CUT),
        flops: flop_ledger(&model),
    };

    let out_dir = resolve_output(&cfg.output);
    fs::create_dir_all(&out_dir)?;
    fs::write(out_dir.join("records.csv"), records_to_csv(&output.records))?;
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    fs::write(
        out_dir.join("checkpoint.json"),
        serde_json::to_string(&model)?,
    )?;
    fs::write(
        out_dir.join("pairs.json"),
        serde_json::to_string(&output.pair_log)?,
    )?;

    Ok(RunArtifacts {
        output_dir: out_dir,
        model,
        output,
        summary,
    })
}

/// CSV schema: `step,module_id,rank,trainable_params,lr,train_loss,eval_metric,flops_step`.
/// One row per (step, module); step-level columns repeat on each module row;
/// `eval_metric` is empty on steps without an evaluation.
pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut s =
        String::from("step,module_id,rank,trainable_params,lr,train_loss,eval_metric,flops_step\n");
    for rec in records {
        for (module_id, rank) in rec.per_module_rank.iter().enumerate() {
            let eval = rec.eval_metric.map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                rec.step,
                module_id,
                rank,
                rec.trainable_params,
                rec.lr,
                rec.train_loss,
                eval,
                rec.flops_step
            ));
        }
    }
    s
}

/// Loads a checkpoint written by [`run_experiment`].
pub fn load_checkpoint(path: &Path) -> Result<AdaptedModel> {
    let text = fs::read_to_string(path)?;
    let model: AdaptedModel = serde_json::from_str(&text)?;
    for layer in &model.layers {
        if !layer.w0().is_finite() {
            return Err(Error::numeric("load_checkpoint", "non-finite base weight"));
        }
    }
    Ok(model)
}

/// Loads logged pair components written by [`run_experiment`].
pub fn load_pairs(path: &Path) -> Result<Vec<PairRecord>> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
