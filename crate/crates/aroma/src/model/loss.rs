//! Task losses: mean squared error and softmax cross-entropy.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::Targets;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    Mse,
    SoftmaxCrossEntropy,
}

/// Batch-mean loss. MSE sums squared error over output dimensions and
/// averages over the batch; cross-entropy expects logits and label targets
/// and uses a stable log-sum-exp.
pub fn loss(outputs: &Matrix, targets: &Targets, kind: LossKind) -> Result<f64> {
    let batch = outputs.rows();
    match (kind, targets) {
        (LossKind::Mse, Targets::Values(t)) => {
            if t.rows() != outputs.rows() || t.cols() != outputs.cols() {
                return Err(Error::dimension(
                    "loss",
                    format!(
                        "outputs {}x{} vs targets {}x{}",
                        outputs.rows(),
                        outputs.cols(),
                        t.rows(),
                        t.cols()
                    ),
                ));
            }
            let sum: f64 = outputs
                .data()
                .iter()
                .zip(t.data().iter())
                .map(|(y, t)| (y - t) * (y - t))
                .sum();
            Ok(sum / batch as f64)
        }
        (LossKind::SoftmaxCrossEntropy, Targets::Labels(labels)) => {
            if labels.len() != batch {
                return Err(Error::dimension(
                    "loss",
                    format!("{} labels for batch of {}", labels.len(), batch),
                ));
            }
            let classes = outputs.cols();
            let mut total = 0.0;
            for (r, &label) in labels.iter().enumerate() {
                if label >= classes {
                    return Err(Error::input(
                        "loss",
                        format!("label {label} out of range for {classes} classes"),
                    ));
                }
                let row = outputs.row(r);
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
                total += lse - row[label];
            }
            Ok(total / batch as f64)
        }
        _ => Err(Error::input("loss", "loss kind does not match target kind")),
    }
}

/// dL/d(outputs) for the batch-mean loss above.
pub(crate) fn loss_grad(outputs: &Matrix, targets: &Targets, kind: LossKind) -> Result<Matrix> {
    let batch = outputs.rows();
    match (kind, targets) {
        (LossKind::Mse, Targets::Values(t)) => {
            if t.rows() != outputs.rows() || t.cols() != outputs.cols() {
                return Err(Error::dimension("loss_grad", "shape mismatch"));
            }
            let mut g = outputs.clone();
            for (gv, tv) in g.data_mut().iter_mut().zip(t.data().iter()) {
                *gv = 2.0 * (*gv - tv) / batch as f64;
            }
            Ok(g)
        }
        (LossKind::SoftmaxCrossEntropy, Targets::Labels(labels)) => {
            let classes = outputs.cols();
            let mut g = Matrix::zeros(batch, classes);
            for (r, &label) in labels.iter().enumerate() {
                if label >= classes {
                    return Err(Error::input("loss_grad", "label out of range"));
                }
                let row = outputs.row(r);
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let denom: f64 = row.iter().map(|z| (z - max).exp()).sum();
                for c in 0..classes {
                    let p = (row[c] - max).exp() / denom;
                    let delta = if c == label { 1.0 } else { 0.0 };
                    g.set(r, c, (p - delta) / batch as f64);
                }
            }
            Ok(g)
        }
        _ => Err(Error::input(
            "loss_grad",
            "loss kind does not match targets",
        )),
    }
}
