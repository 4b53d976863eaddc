//! Post-hoc and in-loop analytics: spectral effective rank, per-module rank
//! reports, adapter-path flop accounting, and the cross-run cosine
//! similarity diagnostic.

use crate::error::{Error, Result};
use crate::linalg::{singular_values, Matrix};
use crate::model::AdaptedModel;
use crate::trainer::PairRecord;
use serde::{Deserialize, Serialize};

/// Relative cutoff under which trailing singular values are dropped before
/// the entropy computation. Numerically-zero values contribute nothing to
/// the entropy; the cut only stabilizes the log evaluation.
pub const DEFAULT_TAIL_CUT: f64 = 1e-12;

/// Effective rank: `exp` of the Shannon entropy of the normalized singular
/// values (natural log). A zero matrix reports 0 by convention; any nonzero
/// matrix lands in `[1, min(rows, cols)]`.
pub fn effective_rank(m: &Matrix, tail_cut: f64) -> f64 {
    let sigma = singular_values(m);
    let top = sigma[0];
    if top <= 0.0 {
        return 0.0;
    }
    let kept: Vec<f64> = sigma
        .iter()
        .copied()
        .filter(|&s| s >= tail_cut * top)
        .collect();
    let total: f64 = kept.iter().sum();
    let entropy: f64 = kept
        .iter()
        .map(|&s| {
            let p = s / total;
            -p * p.ln()
        })
        .sum();
    entropy.exp()
}

/// Per-module rank summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModuleRankEntry {
    pub module_index: usize,
    pub layer_idx: usize,
    pub nominal_rank: usize,
    pub effective_rank: f64,
    /// effective/nominal; reported as 1 for a rank-0 module.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankReport {
    pub modules: Vec<ModuleRankEntry>,
    pub mean_ratio: f64,
}

/// Nominal rank (merged component count) and effective rank of the
/// materialized update, per adapted layer.
pub fn rank_report(model: &AdaptedModel, tail_cut: f64) -> RankReport {
    let mut modules = Vec::new();
    for (module_index, layer_idx) in model.adapted_layers().into_iter().enumerate() {
        let layer = &model.layers[layer_idx];
        let adapter = layer.adapter.as_ref().expect("adapted layer");
        let nominal = adapter.merged_rank();
        let eff = if nominal == 0 {
            0.0
        } else {
            let delta = adapter.merged_delta(layer.out_dim(), layer.in_dim());
            effective_rank(&delta, tail_cut)
        };
        let ratio = if nominal == 0 {
            1.0
        } else {
            eff / nominal as f64
        };
        modules.push(ModuleRankEntry {
            module_index,
            layer_idx,
            nominal_rank: nominal,
            effective_rank: eff,
            ratio,
        });
    }
    let mean_ratio = if modules.is_empty() {
        1.0
    } else {
        modules.iter().map(|e| e.ratio).sum::<f64>() / modules.len() as f64
    };
    RankReport {
        modules,
        mean_ratio,
    }
}

/// Adapter forward methods compared in the flop accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdapterMethod {
    /// Rank-one accumulation at outer step `p`: computes `B_p(A_p x)`.
    Aroma { p: usize },
    /// Fixed rank `r`: computes `B(A x)`.
    Lora { r: usize },
    /// SVD-style parameterization at current rank: computes `P(Λ(Q x))`.
    AdaLora { r_tilde: usize },
}

/// Exact multiply-add count plus the symbolic complexity order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlopCount {
    pub count: u64,
    pub closed_form: String,
}

/// Multiply-adds for the factored update `B(Ax)` with inner dimension `k`
/// on one length-n input: a k-length dot product costs k multiplies and
/// k-1 adds. Zero inner dimension costs nothing.
pub fn factored_update_flops(m: usize, n: usize, k: usize) -> u64 {
    if k == 0 {
        return 0;
    }
    let (m, n, k) = (m as u64, n as u64, k as u64);
    k * (2 * n - 1) + m * (2 * k - 1)
}

/// Exact adapter-path multiply-add count for one input vector.
pub fn flops_step(method: AdapterMethod, m: usize, n: usize) -> FlopCount {
    match method {
        AdapterMethod::Aroma { p } => {
            assert!(p >= 1);
            FlopCount {
                count: factored_update_flops(m, n, p),
                closed_form: "O((m+n)p)".to_string(),
            }
        }
        AdapterMethod::Lora { r } => {
            assert!(r >= 1);
            FlopCount {
                count: factored_update_flops(m, n, r),
                closed_form: "O((m+n)r)".to_string(),
            }
        }
        AdapterMethod::AdaLora { r_tilde } => {
            assert!(r_tilde >= 1);
            let (m64, n64, r64) = (m as u64, n as u64, r_tilde as u64);
            // Qx, then the diagonal scaling (one multiply per entry), then P(·).
            let count = r64 * (2 * n64 - 1) + r64 + m64 * (2 * r64 - 1);
            FlopCount {
                count,
                closed_form: "O((m+n)r~)".to_string(),
            }
        }
    }
}

/// Per-module flop comparison at the module's final rank. The closed forms
/// extend to rank 0 as zero cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlopLedgerEntry {
    pub module_index: usize,
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    pub aroma_actual: u64,
    pub lora_formula: u64,
    pub adalora_formula: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlopLedger {
    pub per_module: Vec<FlopLedgerEntry>,
    pub total_aroma_actual: u64,
}

/// Ledger over the model's adapted layers at their current materialized
/// ranks (merged plus active components).
pub fn flop_ledger(model: &AdaptedModel) -> FlopLedger {
    let mut per_module = Vec::new();
    let mut total = 0u64;
    for (module_index, layer_idx) in model.adapted_layers().into_iter().enumerate() {
        let layer = &model.layers[layer_idx];
        let adapter = layer.adapter.as_ref().expect("adapted layer");
        let rank = adapter.merged_rank() + adapter.active().len();
        let (m, n) = (layer.out_dim(), layer.in_dim());
        let actual = factored_update_flops(m, n, rank);
        let adalora = if rank == 0 {
            0
        } else {
            flops_step(AdapterMethod::AdaLora { r_tilde: rank }, m, n).count
        };
        total += actual;
        per_module.push(FlopLedgerEntry {
            module_index,
            m,
            n,
            rank,
            aroma_actual: actual,
            lora_formula: actual,
            adalora_formula: adalora,
        });
    }
    FlopLedger {
        per_module,
        total_aroma_actual: total,
    }
}

/// Cosine grid between two runs' logged components for one module; entry
/// `[i][j]` compares run A's component at outer step i+1 with run B's at
/// outer step j+1. The diagonal is the quantity of interest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModuleCosines {
    pub module_index: usize,
    pub grid: Vec<Vec<f64>>,
}

impl ModuleCosines {
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self
            .grid
            .len()
            .min(self.grid.first().map_or(0, |r| r.len())))
            .map(|i| self.grid[i][i])
            .collect()
    }
}

/// Cosine similarity between the vectorized rank-one components of two runs,
/// aligned by outer-step index. For components `b aᵀ` and `b' a'ᵀ` the
/// cosine is `(b·b')(a·a') / (‖b‖‖a‖‖b'‖‖a'‖)`, so the m-by-n outer products
/// are never materialized.
pub fn cosine_similarity_probe(
    run_a: &[PairRecord],
    run_b: &[PairRecord],
) -> Result<Vec<ModuleCosines>> {
    let modules_a: Vec<usize> = sorted_modules(run_a);
    let modules_b: Vec<usize> = sorted_modules(run_b);
    if modules_a != modules_b {
        return Err(Error::input(
            "cosine_similarity_probe",
            format!("module sets differ: {modules_a:?} vs {modules_b:?}"),
        ));
    }

    let mut out = Vec::new();
    for &module in &modules_a {
        let mut a_pairs: Vec<&PairRecord> =
            run_a.iter().filter(|p| p.module_index == module).collect();
        let mut b_pairs: Vec<&PairRecord> =
            run_b.iter().filter(|p| p.module_index == module).collect();
        a_pairs.sort_by_key(|p| p.outer_step);
        b_pairs.sort_by_key(|p| p.outer_step);

        let grid = a_pairs
            .iter()
            .map(|pa| {
                b_pairs
                    .iter()
                    .map(|pb| {
                        let denom = pa.b.norm() * pa.a.norm() * pb.b.norm() * pb.a.norm();
                        if denom == 0.0 {
                            0.0
                        } else {
                            pa.b.dot(&pb.b) * pa.a.dot(&pb.a) / denom
                        }
                    })
                    .collect()
            })
            .collect();
        out.push(ModuleCosines {
            module_index: module,
            grid,
        });
    }
    Ok(out)
}

fn sorted_modules(records: &[PairRecord]) -> Vec<usize> {
    let mut m: Vec<usize> = records.iter().map(|p| p.module_index).collect();
    m.sort_unstable();
    m.dedup();
    m
}
