//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test -p aroma --test acceptance -- --nocapture` to see
//! every line; a failing criterion fails its test with the offending values.

#![allow(clippy::needless_range_loop)]

use aroma::analysis::{
    cosine_similarity_probe, effective_rank, flops_step, AdapterMethod, DEFAULT_TAIL_CUT,
};
use aroma::baselines::{train_lora, train_relora, LoraConfig, ReloraConfig};
use aroma::controller::{
    inner_check, outer_check, run, ControllerConfig, EPS_IN_DISABLED, EPS_OUT_DISABLED,
};
use aroma::harness::{
    gen_task, optimal_rank_residual, parse_config, records_to_csv, run_experiment, Task, TaskKind,
    TaskSpec,
};
use aroma::linalg::{fro_norm, kaiming_init, matmul, Matrix, Rng, Vector};
use aroma::model::{
    loss, Activation, AdaptedLayer, AdaptedModel, AdapterHandle, Batch, LossKind, RankOnePair,
    Targets,
};
use aroma::optim::{AdamConfig, WarmupSchedule};
use std::time::Instant;

fn pass(criterion: &str, detail: String) {
    println!("[acceptance] {criterion}: PASS — {detail}");
}

// ---------------------------------------------------------------- criterion 1

#[test]
fn criterion_1_gradient_correctness() {
    let start = Instant::now();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut scalars = 0usize;

    for trial in 0..10u64 {
        let mut rng = Rng::new(1000 + trial);
        let n_layers = 2 + (trial % 2) as usize;
        let mut dims = vec![3 + rng.next_below(4)];
        for _ in 0..n_layers {
            dims.push(3 + rng.next_below(4));
        }
        // tanh/identity stacks: central differences are exact-order there,
        // while the relu kink is checked separately in unit tests.
        let mut layers = Vec::new();
        for l in 0..n_layers {
            let (m, n) = (dims[l + 1], dims[l]);
            let w = Matrix::random_normal(&mut rng, m, n, 0.7);
            let adapter = AdapterHandle::with_active(vec![RankOnePair::new(
                kaiming_init(&mut rng, m, m),
                kaiming_init(&mut rng, n, n),
            )]);
            let act = if l + 1 == n_layers && trial % 3 == 0 {
                Activation::Identity
            } else {
                Activation::Tanh
            };
            layers.push(AdaptedLayer::new(w, None, Some(adapter), 1.5, act));
        }
        let mut model = AdaptedModel::new(layers);
        let batch = Batch {
            inputs: Matrix::random_normal(&mut rng, 5, dims[0], 1.0),
            targets: Targets::Values(Matrix::random_normal(&mut rng, 5, dims[n_layers], 1.0)),
        };

        let (_, tape) = model.forward(&batch).unwrap();
        let grads = model
            .backward(&tape, &batch.targets, LossKind::Mse)
            .unwrap();

        for layer_idx in 0..n_layers {
            let pair_grads = grads[layer_idx].as_ref().unwrap()[0].clone();
            for (is_b, analytic) in [(true, &pair_grads.grad_b), (false, &pair_grads.grad_a)] {
                for k in 0..analytic.len() {
                    let bump = |model: &mut AdaptedModel, delta: f64| {
                        let pair = &mut model.layers[layer_idx]
                            .adapter
                            .as_mut()
                            .unwrap()
                            .active_mut()[0];
                        let v = if is_b {
                            &mut pair.b.data_mut()[k]
                        } else {
                            &mut pair.a.data_mut()[k]
                        };
                        *v += delta;
                    };
                    let eval = |model: &AdaptedModel| {
                        let (y, _) = model.forward(&batch).unwrap();
                        loss(&y, &batch.targets, LossKind::Mse).unwrap()
                    };
                    bump(&mut model, h);
                    let up = eval(&model);
                    bump(&mut model, -2.0 * h);
                    let down = eval(&model);
                    bump(&mut model, h);
                    let fd = (up - down) / (2.0 * h);
                    let g = analytic.data()[k];
                    let rel = (g - fd).abs() / g.abs().max(1.0);
                    assert!(
                        rel < 1e-5,
                        "trial {trial} layer {layer_idx} b={is_b} k={k}: analytic {g} vs fd {fd}"
                    );
                    worst = worst.max(rel);
                    scalars += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    pass(
        "criterion 1 (gradient correctness)",
        format!(
            "{scalars} trainable scalars over 10 models, worst rel err {worst:.2e}, {elapsed:.2?}"
        ),
    );
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_2_stopping_criterion_tables() {
    let pair_of =
        |b: &[f64], a: &[f64]| RankOnePair::new(Vector::from_slice(b), Vector::from_slice(a));

    // Inner criterion table.
    assert!(inner_check(
        &pair_of(&[1.05], &[1.0]),
        1.0,
        0.1,
        1e-12,
        false
    ));
    assert!(!inner_check(
        &pair_of(&[1.5], &[1.0]),
        1.0,
        0.1,
        1e-12,
        false
    ));
    // Zero-baseline guard: a fresh pair never claims convergence.
    assert!(!inner_check(
        &pair_of(&[0.7], &[1.0]),
        0.0,
        0.1,
        1e-12,
        false
    ));
    assert!(!inner_check(
        &pair_of(&[0.7], &[1.0]),
        1e-13,
        0.1,
        1e-12,
        false
    ));

    // Outer criterion table.
    assert!(outer_check(&pair_of(&[0.0, 0.0], &[1.0, 2.0]), 4.0, 100.0, 1e-3).unwrap());
    assert!(outer_check(&pair_of(&[0.1], &[0.1]), 4.0, 100.0, 1e-3).unwrap());
    assert!(!outer_check(&pair_of(&[1.0], &[1.0]), 4.0, 100.0, 1e-3).unwrap());

    // Disabled sentinels never fire.
    assert!(!inner_check(
        &pair_of(&[0.5], &[1.0]),
        1.0,
        EPS_IN_DISABLED,
        1e-12,
        false
    ));
    assert!(!outer_check(&pair_of(&[0.0], &[1.0]), 4.0, 100.0, EPS_OUT_DISABLED).unwrap());

    pass(
        "criterion 2 (stopping criterion tables)",
        "inner and outer tables reproduced, including zero-baseline guard".to_string(),
    );
}

// ---------------------------------------------------------------- criterion 3

/// Independent spectrum route: cyclic two-sided Jacobi eigensolver on the
/// Gram matrix, written from scratch in test code. Works on the narrow
/// orientation so the Gram matrix carries exactly min(rows, cols)
/// eigenvalues, with no spurious null space.
fn oracle_singular_values(m: &Matrix) -> Vec<f64> {
    let tall = if m.rows() >= m.cols() {
        m.clone()
    } else {
        m.transposed()
    };
    let g = matmul(&tall.transposed(), &tall).unwrap();
    let n = g.rows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| g.row(i).to_vec()).collect();
    for _ in 0..300 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[i][j] * a[i][j];
                }
            }
        }
        if off.sqrt() < 1e-13 {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut sv: Vec<f64> = (0..n).map(|i| a[i][i].max(0.0).sqrt()).collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

fn oracle_effective_rank(m: &Matrix) -> f64 {
    let sigma = oracle_singular_values(m);
    let total: f64 = sigma.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let entropy: f64 = sigma
        .iter()
        .filter(|&&s| s > 0.0)
        .map(|&s| {
            let p = s / total;
            -p * p.ln()
        })
        .sum();
    entropy.exp()
}

#[test]
fn criterion_3_effective_rank_oracle() {
    let mut rng = Rng::new(30);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let rows = 2 + rng.next_below(7);
        let cols = 2 + rng.next_below(7);
        let m = Matrix::random_normal(&mut rng, rows, cols, 1.0);
        let got = effective_rank(&m, DEFAULT_TAIL_CUT);
        let want = oracle_effective_rank(&m);
        let rel = (got - want).abs() / want.abs().max(1e-300);
        assert!(rel < 1e-9, "{rows}x{cols}: {got} vs oracle {want}");
        worst = worst.max(rel);
    }
    for n in 1..=16 {
        let e = effective_rank(&Matrix::identity(n), DEFAULT_TAIL_CUT);
        assert!((e - n as f64).abs() < 1e-9, "identity {n}: {e}");
    }
    pass(
        "criterion 3 (effective-rank oracle)",
        format!("50 random matrices within 1e-9 of the entropy oracle (worst {worst:.2e}); identity exact to n=16"),
    );
}

// ---------------------------------------------------------------- criterion 4

fn recovery_spec(seed: u64) -> TaskSpec {
    TaskSpec {
        kind: TaskKind::LowRankRegression,
        m: 32,
        n: 32,
        n_layers: 1,
        true_rank: 3,
        noise_std: 0.0,
        n_samples: 512,
        seed,
    }
}

fn recovery_controller() -> ControllerConfig {
    ControllerConfig {
        max_steps: 8000,
        max_inner_steps: 1500,
        inner_check_interval: 100,
        eps_in: 0.1,
        eps_out: 1e-3,
        alpha: 1.0,
        ..Default::default()
    }
}

fn recovery_optimizer() -> (AdamConfig, WarmupSchedule) {
    (
        AdamConfig {
            lr_peak: 1e-2,
            weight_decay: 0.01,
            ..Default::default()
        },
        WarmupSchedule::constant(1e-2, 50, 50),
    )
}

fn run_recovery(
    task: &Task,
    cfg: &ControllerConfig,
    seed: u64,
) -> (AdaptedModel, aroma::trainer::TrainOutput) {
    let (adam, schedule) = recovery_optimizer();
    let mut model = task.model.clone();
    let (_, out) = run(&mut model, &task.data, cfg, &adam, &schedule, seed).unwrap();
    (model, out)
}

#[test]
fn criterion_4_rank_recovery() {
    let start = Instant::now();
    let task = gen_task(&recovery_spec(7), 512).unwrap();
    let (model, out) = run_recovery(&task, &recovery_controller(), 7);
    let elapsed = start.elapsed();

    let final_rec = out.records.last().unwrap();
    let rank = final_rec.per_module_rank[0];
    assert!(
        (3..=5).contains(&rank),
        "learned rank {rank} outside [3, 5]"
    );
    assert_eq!(final_rec.trainable_params, 0, "run should end frozen");

    // Fit error in weight space against the truncated-SVD oracle: the best
    // rank-3 approximation of the target weight matrix W0 + dW*.
    let delta_target = task.target_delta.as_ref().unwrap();
    let w_target = task
        .base_weight
        .as_ref()
        .unwrap()
        .add(delta_target)
        .unwrap();
    let oracle = optimal_rank_residual(&w_target, 3);
    let layer = &model.layers[0];
    let learned = layer
        .adapter
        .as_ref()
        .unwrap()
        .full_delta(32, 32)
        .scaled(layer.alpha);
    let fit = fro_norm(&learned.sub(delta_target).unwrap());
    assert!(
        fit <= 2.0 * oracle,
        "fit {fit} exceeds 2x the rank-3 truncation residual {oracle}"
    );
    // Sharper recovery evidence: the fit beats the best possible rank-2
    // update, so at least three directions were genuinely extracted.
    let rank2_floor = optimal_rank_residual(delta_target, 2);
    assert!(
        fit < rank2_floor,
        "fit {fit} does not beat the rank-2 optimum {rank2_floor}"
    );

    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    pass(
        "criterion 4 (rank recovery)",
        format!(
            "rank {rank} in [3,5], fit {fit:.3} <= 2x{oracle:.3} and below rank-2 floor {rank2_floor:.3}, {elapsed:.2?}"
        ),
    );
}

// ---------------------------------------------------------------- criterion 5

fn blob_spec(seed: u64) -> TaskSpec {
    TaskSpec {
        kind: TaskKind::BlobClassification,
        m: 8,
        n: 16,
        n_layers: 2,
        true_rank: 0,
        noise_std: 0.5,
        n_samples: 128,
        seed,
    }
}

#[test]
fn criterion_5_trajectory_shapes() {
    // Adaptive run on the recovery task: ranks are non-decreasing
    // staircases, trainable parameters non-increasing and 0 at freeze.
    let task = gen_task(&recovery_spec(3), 512).unwrap();
    let (_, out) = run_recovery(&task, &recovery_controller(), 3);
    let mut frozen_seen = false;
    for w in out.records.windows(2) {
        for m in 0..w[0].per_module_rank.len() {
            assert!(
                w[1].per_module_rank[m] >= w[0].per_module_rank[m],
                "rank decreased at step {}",
                w[1].step
            );
        }
        assert!(
            w[1].trainable_params <= w[0].trainable_params,
            "trainable params increased at step {}",
            w[1].step
        );
    }
    if out.records.last().unwrap().trainable_params == 0 {
        frozen_seen = true;
    }
    assert!(frozen_seen, "recovery run should freeze every module");

    // Multi-module adaptive run: same shape properties.
    let blob_task = gen_task(&blob_spec(1), 32).unwrap();
    let (adam, schedule) = recovery_optimizer();
    let mut model = blob_task.model.clone();
    let (_, blob_out) = run(
        &mut model,
        &blob_task.data,
        &ControllerConfig {
            max_steps: 600,
            max_inner_steps: 100,
            inner_check_interval: 10,
            eps_in: 0.1,
            eps_out: 1e-3,
            alpha: 1.0,
            ..Default::default()
        },
        &adam,
        &schedule,
        1,
    )
    .unwrap();
    for w in blob_out.records.windows(2) {
        for m in 0..w[0].per_module_rank.len() {
            assert!(w[1].per_module_rank[m] >= w[0].per_module_rank[m]);
        }
        assert!(w[1].trainable_params <= w[0].trainable_params);
    }

    // Fixed-rank baseline: rank and parameter columns are constant.
    let mut lora_model = task.model.clone();
    let lora_out = train_lora(
        &mut lora_model,
        &task.data,
        &LoraConfig {
            rank: 3,
            alpha: 3.0,
            max_steps: 300,
            eval_every: 10,
        },
        &adam,
        &schedule,
        3,
    )
    .unwrap();
    for rec in &lora_out.records {
        assert_eq!(rec.per_module_rank, vec![3]);
        assert_eq!(rec.trainable_params, 3 * 64);
    }

    pass(
        "criterion 5 (trajectory shapes)",
        format!(
            "adaptive ranks staircase up and params fall to 0 over {} records; fixed-rank columns constant",
            out.records.len()
        ),
    );
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn criterion_6_relora_reduction() {
    // Two-module nonlinear task with real minibatching, so every random
    // stream (batching, reinit, reset) is exercised.
    let task = gen_task(&blob_spec(5), 32).unwrap();
    let adam = AdamConfig {
        lr_peak: 5e-3,
        weight_decay: 0.01,
        ..Default::default()
    };
    let schedule = WarmupSchedule::constant(5e-3, 20, 10);
    let seed = 5;

    let mut controller_model = task.model.clone();
    let (_, controller_out) = run(
        &mut controller_model,
        &task.data,
        &ControllerConfig {
            max_steps: 200,
            max_inner_steps: 50,
            inner_check_interval: 10,
            eps_in: EPS_IN_DISABLED,
            eps_out: EPS_OUT_DISABLED,
            alpha: 1.0,
            eval_every: 10,
            ..Default::default()
        },
        &adam,
        &schedule,
        seed,
    )
    .unwrap();

    let mut relora_model = task.model.clone();
    let relora_out = train_relora(
        &mut relora_model,
        &task.data,
        &ReloraConfig {
            cycle_steps: 50,
            max_steps: 200,
            alpha: 1.0,
            prune_fraction: 0.999,
            reset_step_counter: true,
            eval_every: 10,
        },
        &adam,
        &schedule,
        seed,
    )
    .unwrap();

    let controller_csv = records_to_csv(&controller_out.records);
    let relora_csv = records_to_csv(&relora_out.records);
    assert_eq!(
        controller_csv.as_bytes(),
        relora_csv.as_bytes(),
        "record streams must be bit-identical"
    );

    // Rank staircase: merges land exactly at cycle multiples.
    for rec in &relora_out.records {
        let expect = (rec.step / 50) as usize;
        assert_eq!(rec.per_module_rank, vec![expect; 2], "step {}", rec.step);
    }

    pass(
        "criterion 6 (reduction to periodic restarts)",
        format!(
            "{} records bit-identical between the disabled-criteria run and the restart baseline; 4 merges per module",
            relora_out.records.len()
        ),
    );
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_7_reset_ablation_direction() {
    let seeds = [0u64, 1, 2, 3, 4];
    let mut rank_with = 0.0;
    let mut rank_without = 0.0;
    let mut loss_with = 0.0;
    let mut loss_without = 0.0;
    let mut last_diags = Vec::new();

    for &seed in &seeds {
        let spec = TaskSpec {
            true_rank: 5,
            ..recovery_spec(seed)
        };
        let task = gen_task(&spec, 512).unwrap();
        let base = recovery_controller();

        let (_, out_with) = {
            let cfg = ControllerConfig {
                reset_enabled: true,
                ..base
            };
            run_recovery(&task, &cfg, seed)
        };
        let (_, out_without) = {
            let cfg = ControllerConfig {
                reset_enabled: false,
                ..base
            };
            run_recovery(&task, &cfg, seed)
        };

        rank_with += out_with.final_record().per_module_rank[0] as f64;
        rank_without += out_without.final_record().per_module_rank[0] as f64;
        loss_with += out_with.final_record().eval_metric.unwrap();
        loss_without += out_without.final_record().eval_metric.unwrap();

        let cosines = cosine_similarity_probe(&out_with.pair_log, &out_without.pair_log).unwrap();
        let diag = cosines[0].diagonal();
        assert!(diag.len() >= 3, "need at least 3 shared outer steps");
        assert!(diag[0] > 0.999, "first components should agree: {diag:?}");
        for (k, &c) in diag.iter().enumerate().skip(1) {
            assert!(
                c < diag[0],
                "seed {seed}: diagonal entry {k} = {c} not below the first"
            );
        }
        last_diags.push(*diag.last().unwrap());
    }

    let n = seeds.len() as f64;
    let (rank_with, rank_without) = (rank_with / n, rank_without / n);
    let (loss_with, loss_without) = (loss_with / n, loss_without / n);
    assert!(
        rank_with >= rank_without,
        "mean rank with reset {rank_with} below without {rank_without}"
    );
    assert!(
        loss_with <= loss_without,
        "mean loss with reset {loss_with} above without {loss_without}"
    );
    let mean_last = last_diags.iter().sum::<f64>() / n;
    assert!(
        mean_last < 0.9,
        "solutions should diverge across resets: mean final diagonal {mean_last}"
    );

    pass(
        "criterion 7 (reset ablation direction)",
        format!(
            "mean rank {rank_with:.1} >= {rank_without:.1}, mean loss {loss_with:.2e} <= {loss_without:.2e}, cosine diagonal 1.0 -> {mean_last:.3}"
        ),
    );
}

// ---------------------------------------------------------------- criterion 8

struct OpCounter {
    mul: u64,
    add: u64,
}

/// Executes B(Ax) with every multiply and add tallied.
fn counted_factored_matvec(
    b_cols: &[Vec<f64>],
    a_rows: &[Vec<f64>],
    x: &[f64],
    m: usize,
    c: &mut OpCounter,
) -> Vec<f64> {
    let dot = |u: &[f64], v: &[f64], c: &mut OpCounter| -> f64 {
        let mut acc = u[0] * v[0];
        c.mul += 1;
        for i in 1..u.len() {
            acc += u[i] * v[i];
            c.mul += 1;
            c.add += 1;
        }
        acc
    };
    let s: Vec<f64> = a_rows.iter().map(|a| dot(a, x, c)).collect();
    (0..m)
        .map(|i| {
            let b_row: Vec<f64> = b_cols.iter().map(|col| col[i]).collect();
            dot(&b_row, &s, c)
        })
        .collect()
}

#[test]
fn criterion_8_complexity_accounting() {
    let mut rng = Rng::new(808);
    for trial in 0..20 {
        let m = 2 + rng.next_below(60);
        let n = 2 + rng.next_below(60);
        let r = 1 + rng.next_below(8);

        for p in 1..=r {
            // Instrumented-arithmetic oracle.
            let b_cols: Vec<Vec<f64>> = (0..p)
                .map(|_| (0..m).map(|_| rng.next_normal()).collect())
                .collect();
            let a_rows: Vec<Vec<f64>> = (0..p)
                .map(|_| (0..n).map(|_| rng.next_normal()).collect())
                .collect();
            let x: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
            let mut counter = OpCounter { mul: 0, add: 0 };
            let _ = counted_factored_matvec(&b_cols, &a_rows, &x, m, &mut counter);
            let counted = counter.mul + counter.add;

            let formula = flops_step(AdapterMethod::Aroma { p }, m, n).count;
            assert_eq!(
                formula, counted,
                "trial {trial} m={m} n={n} p={p}: formula vs instrumented"
            );

            let lora = flops_step(AdapterMethod::Lora { r }, m, n).count;
            assert!(formula <= lora, "aroma({p}) > lora({r}) at {m}x{n}");
            let adalora = flops_step(AdapterMethod::AdaLora { r_tilde: r }, m, n).count;
            assert!(lora <= adalora);
        }
    }
    pass(
        "criterion 8 (complexity accounting)",
        "20 random shapes: exact counts match the instrumented oracle; growing-rank cost never exceeds fixed-rank".to_string(),
    );
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_9_determinism() {
    let run_csv = |tag: &str, method_lines: &str| -> Vec<u8> {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "task.kind = blob_classification\ntask.m = 8\ntask.n = 16\ntask.layers = 2\n\
             task.noise_std = 0.5\ntask.samples = 128\ntask.seed = 9\n\
             adam.lr = 0.005\nschedule.warmup = 20\nschedule.rewarmup = 10\n\
             seed = 9\nbatch_size = 32\neval_every = 10\noutput = {}\n{}",
            dir.path().join(tag).display(),
            method_lines
        );
        let cfg = parse_config(&text).unwrap();
        let art = run_experiment(&cfg).unwrap();
        std::fs::read(art.output_dir.join("records.csv")).unwrap()
    };

    for (name, method) in [
        (
            "adaptive",
            "method = aroma\naroma.max_steps = 150\naroma.inner_steps = 40\n",
        ),
        (
            "fixed",
            "method = lora\nlora.rank = 2\nlora.max_steps = 120\n",
        ),
        (
            "restarts",
            "method = relora\nrelora.cycle_steps = 40\nrelora.max_steps = 120\n",
        ),
    ] {
        let a = run_csv("a", method);
        let b = run_csv("b", method);
        assert_eq!(
            a, b,
            "{name}: identical config+seed must give identical bytes"
        );
    }
    pass(
        "criterion 9 (determinism)",
        "all three trainers produce byte-identical CSV on repeated runs".to_string(),
    );
}

// --------------------------------------------------------------- criterion 10

#[test]
fn criterion_10_merge_continuity() {
    // Merges from the recovery run and a minibatched multi-module run.
    let task = gen_task(&recovery_spec(7), 512).unwrap();
    let (_, out) = run_recovery(&task, &recovery_controller(), 7);
    let mut events = out.merge_events.clone();

    let blob_task = gen_task(&blob_spec(2), 32).unwrap();
    let (adam, schedule) = recovery_optimizer();
    let mut model = blob_task.model.clone();
    let (_, blob_out) = run(
        &mut model,
        &blob_task.data,
        &ControllerConfig {
            max_steps: 300,
            max_inner_steps: 50,
            inner_check_interval: 10,
            eps_in: EPS_IN_DISABLED,
            eps_out: EPS_OUT_DISABLED,
            alpha: 1.0,
            ..Default::default()
        },
        &adam,
        &schedule,
        2,
    )
    .unwrap();
    events.extend(blob_out.merge_events.iter().cloned());

    assert!(!events.is_empty(), "no merges observed");
    let worst = events.iter().map(|e| e.deviation).fold(0.0, f64::max);
    assert!(
        worst <= 1e-12,
        "probe outputs moved by {worst} across a merge"
    );
    pass(
        "criterion 10 (merge continuity)",
        format!(
            "{} merges observed, max probe deviation {worst:.2e} <= 1e-12",
            events.len()
        ),
    );
}
