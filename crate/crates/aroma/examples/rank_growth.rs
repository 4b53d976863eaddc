//! Adaptive rank growth on a planted low-rank regression task.
//!
//! A single 32x32 layer carries a hidden rank-3 update on top of a dominant
//! frozen base. The trainer grows rank-one components until the relative
//! weight change falls below the outer tolerance, then freezes. Run with:
//!
//! ```bash
//! cargo run --release -p aroma --example rank_growth
//! ```

use aroma::controller::{run, ControllerConfig};
use aroma::harness::{gen_task, optimal_rank_residual, TaskKind, TaskSpec};
use aroma::linalg::fro_norm;
use aroma::optim::{AdamConfig, WarmupSchedule};

fn main() -> aroma::Result<()> {
    let spec = TaskSpec {
        kind: TaskKind::LowRankRegression,
        m: 32,
        n: 32,
        n_layers: 1,
        true_rank: 3,
        noise_std: 0.0,
        n_samples: 512,
        seed: 7,
    };
    let task = gen_task(&spec, 512)?;

    let cfg = ControllerConfig {
        max_steps: 8000,
        max_inner_steps: 1500,
        inner_check_interval: 100,
        eps_in: 0.1,
        eps_out: 1e-3,
        alpha: 1.0,
        ..Default::default()
    };
    let adam = AdamConfig {
        lr_peak: 1e-2,
        weight_decay: 0.01,
        ..Default::default()
    };
    let schedule = WarmupSchedule::constant(1e-2, 50, 50);

    let mut model = task.model.clone();
    let (modules, out) = run(&mut model, &task.data, &cfg, &adam, &schedule, spec.seed)?;

    println!("step  rank  trainable  train_loss      eval");
    let mut last_rank = usize::MAX;
    for rec in &out.records {
        let rank: usize = rec.per_module_rank.iter().sum();
        if rank != last_rank || rec.step == out.records.last().unwrap().step {
            println!(
                "{:>5} {:>5} {:>10} {:>11.3e} {:>9.3e}",
                rec.step,
                rank,
                rec.trainable_params,
                rec.train_loss,
                rec.eval_metric.unwrap_or(f64::NAN)
            );
            last_rank = rank;
        }
    }

    println!("\ncompleted components (norm scaled by alpha):");
    for p in &out.pair_log {
        println!(
            "  outer {:>2}  alpha*|b a|_F = {:>10.4e}  merged = {}",
            p.outer_step,
            cfg.alpha * p.b.norm() * p.a.norm(),
            p.merged
        );
    }

    let final_rec = out.records.last().unwrap();
    println!("\nsteps run: {}", final_rec.step);
    println!("modules frozen: {}", modules.iter().all(|m| m.frozen));
    println!("learned rank: {}", final_rec.per_module_rank[0]);

    // Compare the learned update against the planted one.
    let delta_target = task.target_delta.as_ref().unwrap();
    let layer = &model.layers[0];
    let adapter = layer.adapter.as_ref().unwrap();
    let learned = adapter.full_delta(32, 32).scaled(layer.alpha);
    let err = fro_norm(&learned.sub(delta_target)?);
    println!("weight-space error |alpha*dW - dW*|_F = {err:.4}");
    println!("|dW*|_F = {:.4}", fro_norm(delta_target));
    for k in 0..=4 {
        println!(
            "optimal rank-{k} residual of dW*: {:.4}",
            optimal_rank_residual(delta_target, k)
        );
    }
    Ok(())
}
