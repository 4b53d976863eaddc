//! Thin command-line entry points over the library.
//!
//! ```text
//! aroma train <config>        run one experiment, write metrics
//! aroma compare <config>...   run several experiments back to back
//! aroma analyze <checkpoint>  print the rank report for a saved model
//! aroma flops <m> <n> <k>     print adapter-path flop counts at rank k
//! ```
//!
//! Exit codes: 0 success, 2 unreadable or invalid config, 3 unwritable
//! output, 4 numeric failure, 1 anything else.

use aroma::analysis::{flops_step, rank_report, AdapterMethod, DEFAULT_TAIL_CUT};
use aroma::error::Error;
use aroma::harness::{load_checkpoint, parse_config, run_experiment, ExperimentConfig};
use std::path::Path;
use std::process::ExitCode;

const USAGE: &str = "usage: aroma <train|compare|analyze|flops> ...
  train <config>         run one experiment from a config file
  compare <config>...    run several experiments back to back
  analyze <checkpoint>   print the rank report for a checkpoint.json
  flops <m> <n> <k>      print adapter flop counts for an m x n layer at rank k";

const EXIT_CONFIG: u8 = 2;
const EXIT_OUTPUT: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(cmd) = args.first() else {
        eprintln!("{USAGE}");
        return ExitCode::from(EXIT_CONFIG);
    };
    match cmd.as_str() {
        "train" => {
            if args.len() != 2 {
                eprintln!("{USAGE}");
                return ExitCode::from(EXIT_CONFIG);
            }
            train(&args[1])
        }
        "compare" => {
            if args.len() < 2 {
                eprintln!("{USAGE}");
                return ExitCode::from(EXIT_CONFIG);
            }
            for path in &args[1..] {
                let code = train(path);
                if code != ExitCode::SUCCESS {
                    return code;
                }
            }
            ExitCode::SUCCESS
        }
        "analyze" => {
            if args.len() != 2 {
                eprintln!("{USAGE}");
                return ExitCode::from(EXIT_CONFIG);
            }
            analyze(&args[1])
        }
        "flops" => {
            if args.len() != 4 {
                eprintln!("{USAGE}");
                return ExitCode::from(EXIT_CONFIG);
            }
            flops(&args[1], &args[2], &args[3])
        }
        _ => {
            eprintln!("{USAGE}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn load(path: &str) -> Result<ExperimentConfig, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("cannot read config {path}: {e}");
        ExitCode::from(EXIT_CONFIG)
    })?;
    parse_config(&text).map_err(|e| {
        eprintln!("{path}: {e}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn train(path: &str) -> ExitCode {
    let cfg = match load(path) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    match run_experiment(&cfg) {
        Ok(art) => {
            println!(
                "{}: method={} steps={} total_rank={} trainable={} out={}",
                path,
                art.summary.method,
                art.summary.steps_run,
                art.summary.total_rank,
                art.summary.final_trainable_params,
                art.output_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{path}: {e}");
            match e {
                Error::Numeric { .. } => ExitCode::from(EXIT_NUMERIC),
                Error::Io(_) => ExitCode::from(EXIT_OUTPUT),
                Error::Config { .. } | Error::Input { .. } => ExitCode::from(EXIT_CONFIG),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn analyze(path: &str) -> ExitCode {
    let model = match load_checkpoint(Path::new(path)) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("cannot load checkpoint {path}: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let report = rank_report(&model, DEFAULT_TAIL_CUT);
    match serde_json::to_string_pretty(&report) {
        Ok(json) => {
            println!("{json}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("serialization failed: {e}");
            ExitCode::FAILURE
        }
    }
}

fn flops(m: &str, n: &str, k: &str) -> ExitCode {
    let parse = |s: &str| -> Result<usize, ExitCode> {
        s.parse::<usize>().map_err(|_| {
            eprintln!("expected a positive integer, got `{s}`");
            ExitCode::from(EXIT_CONFIG)
        })
    };
    let (m, n, k) = match (parse(m), parse(n), parse(k)) {
        (Ok(m), Ok(n), Ok(k)) if m >= 1 && n >= 1 && k >= 1 => (m, n, k),
        _ => return ExitCode::from(EXIT_CONFIG),
    };
    let aroma = flops_step(AdapterMethod::Aroma { p: k }, m, n);
    let lora = flops_step(AdapterMethod::Lora { r: k }, m, n);
    let adalora = flops_step(AdapterMethod::AdaLora { r_tilde: k }, m, n);
    println!(
        "{}",
        serde_json::json!({
            "m": m,
            "n": n,
            "rank": k,
            "aroma": { "count": aroma.count, "order": aroma.closed_form },
            "lora": { "count": lora.count, "order": lora.closed_form },
            "adalora": { "count": adalora.count, "order": adalora.closed_form },
        })
    );
    ExitCode::SUCCESS
}
