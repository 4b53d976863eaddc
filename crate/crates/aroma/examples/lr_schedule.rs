//! The sawtooth learning-rate schedule: a long initial warmup, then a short
//! re-warmup after every optimizer reset.
//!
//! ```bash
//! cargo run -p aroma --example lr_schedule
//! ```

use aroma::optim::WarmupSchedule;

fn main() {
    let schedule = WarmupSchedule::constant(1e-3, 20, 8);
    // Pretend merges (and resets) land at the end of updates 35 and 60.
    let resets = [35u64, 60];

    println!("update  lr          ramp");
    let mut since_reset = 0u64;
    let mut has_reset = false;
    for step in 0..80u64 {
        let ssr = if has_reset { since_reset } else { step };
        let lr = schedule.lr_at(step, ssr);
        let bar_len = (lr / 1e-3 * 40.0).round() as usize;
        println!("{step:>6}  {lr:<10.2e} {}", "#".repeat(bar_len));
        since_reset += 1;
        if resets.contains(&step) {
            since_reset = 0;
            has_reset = true;
        }
    }
}
