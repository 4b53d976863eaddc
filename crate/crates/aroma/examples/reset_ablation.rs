//! Effect of optimizer-state pruning on rank growth.
//!
//! Trains the same task twice per seed, once with the 99.9% moment pruning
//! at each merge and once without, then compares final ranks, losses, and
//! the cosine similarity between the components the two runs learned at each
//! outer step. Run with:
//!
//! ```bash
//! cargo run --release -p aroma --example reset_ablation
//! ```

use aroma::analysis::cosine_similarity_probe;
use aroma::controller::{run, ControllerConfig};
use aroma::harness::{gen_task, TaskKind, TaskSpec};
use aroma::optim::{AdamConfig, WarmupSchedule};

fn main() -> aroma::Result<()> {
    let seeds = [0u64, 1, 2, 3, 4];
    let mut rank_with = 0.0;
    let mut rank_without = 0.0;
    let mut loss_with = 0.0;
    let mut loss_without = 0.0;

    println!("seed  rank w/  rank w/o  loss w/      loss w/o     cosine diagonal");
    for &seed in &seeds {
        let spec = TaskSpec {
            kind: TaskKind::LowRankRegression,
            m: 32,
            n: 32,
            n_layers: 1,
            true_rank: 5,
            noise_std: 0.0,
            n_samples: 512,
            seed,
        };
        let task = gen_task(&spec, 512)?;
        let adam = AdamConfig {
            lr_peak: 1e-2,
            weight_decay: 0.01,
            ..Default::default()
        };
        let schedule = WarmupSchedule::constant(1e-2, 50, 50);
        let base = ControllerConfig {
            max_steps: 8000,
            max_inner_steps: 1500,
            inner_check_interval: 100,
            eps_in: 0.1,
            eps_out: 1e-3,
            alpha: 1.0,
            ..Default::default()
        };

        let mut with_reset = task.model.clone();
        let (_, out_with) = run(
            &mut with_reset,
            &task.data,
            &ControllerConfig {
                reset_enabled: true,
                ..base
            },
            &adam,
            &schedule,
            seed,
        )?;

        let mut without_reset = task.model.clone();
        let (_, out_without) = run(
            &mut without_reset,
            &task.data,
            &ControllerConfig {
                reset_enabled: false,
                ..base
            },
            &adam,
            &schedule,
            seed,
        )?;

        let rw: usize = out_with.final_record().per_module_rank.iter().sum();
        let ro: usize = out_without.final_record().per_module_rank.iter().sum();
        let lw = out_with.final_record().eval_metric.unwrap();
        let lo = out_without.final_record().eval_metric.unwrap();
        rank_with += rw as f64;
        rank_without += ro as f64;
        loss_with += lw;
        loss_without += lo;

        let cosines = cosine_similarity_probe(&out_with.pair_log, &out_without.pair_log)?;
        let diag = cosines[0].diagonal();
        let diag_str: Vec<String> = diag.iter().map(|c| format!("{c:.3}")).collect();
        println!(
            "{seed:>4} {rw:>8} {ro:>9} {lw:>12.3e} {lo:>12.3e}  [{}]",
            diag_str.join(", ")
        );
    }

    let n = seeds.len() as f64;
    println!("\nmean rank with reset:    {:.2}", rank_with / n);
    println!("mean rank without reset: {:.2}", rank_without / n);
    println!("mean loss with reset:    {:.3e}", loss_with / n);
    println!("mean loss without reset: {:.3e}", loss_without / n);
    Ok(())
}
