//! Singular values via one-sided Jacobi.
//!
//! Only the values are computed; downstream analysis needs the spectrum, not
//! the vectors. The sweep orthogonalizes column pairs until every pair's
//! normalized inner product drops below `TOL`, after which the singular
//! values are the column norms.

use super::Matrix;

const TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Singular values of `m`, descending. Returns `min(rows, cols)` values,
/// all nonnegative; a zero matrix yields all zeros.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    // Work on the tall orientation so the column count is min(rows, cols);
    // singular values are transpose-invariant.
    let work = if m.rows() >= m.cols() {
        m.clone()
    } else {
        m.transposed()
    };
    let rows = work.rows();
    let cols = work.cols();

    // Column-major working copy.
    let mut c: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..rows).map(|i| work.get(i, j)).collect())
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut converged = true;
        for i in 0..cols.saturating_sub(1) {
            for j in (i + 1)..cols {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for k in 0..rows {
                    alpha += c[i][k] * c[i][k];
                    beta += c[j][k] * c[j][k];
                    gamma += c[i][k] * c[j][k];
                }
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= TOL * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                // Rutishauser rotation annihilating the (i,j) inner product.
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for k in 0..rows {
                    let vi = c[i][k];
                    let vj = c[j][k];
                    c[i][k] = cs * vi - sn * vj;
                    c[j][k] = sn * vi + cs * vj;
                }
            }
        }
        if converged {
            break;
        }
    }

    let mut sigma: Vec<f64> = c
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    sigma.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sigma
}
