//! Central-finite-difference verification of the adapter gradients on a
//! random two-layer tanh model.
//!
//! ```bash
//! cargo run -p aroma --example gradient_check
//! ```

#![allow(clippy::needless_range_loop)]

use aroma::linalg::{kaiming_init, Matrix, Rng};
use aroma::model::{
    loss, Activation, AdaptedLayer, AdaptedModel, AdapterHandle, Batch, LossKind, RankOnePair,
    Targets,
};

fn main() -> aroma::Result<()> {
    let mut rng = Rng::new(42);
    let dims = [6, 5, 4];
    let mut layers = Vec::new();
    for l in 0..2 {
        let (m, n) = (dims[l + 1], dims[l]);
        let w = Matrix::random_normal(&mut rng, m, n, 0.7);
        let adapter = AdapterHandle::with_active(vec![RankOnePair::new(
            kaiming_init(&mut rng, m, m),
            kaiming_init(&mut rng, n, n),
        )]);
        layers.push(AdaptedLayer::new(
            w,
            None,
            Some(adapter),
            2.0,
            Activation::Tanh,
        ));
    }
    let mut model = AdaptedModel::new(layers);

    let batch = Batch {
        inputs: Matrix::random_normal(&mut rng, 8, 6, 1.0),
        targets: Targets::Values(Matrix::random_normal(&mut rng, 8, 4, 1.0)),
    };

    let (_, tape) = model.forward(&batch)?;
    let grads = model.backward(&tape, &batch.targets, LossKind::Mse)?;

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    println!("layer  tensor  index   analytic        finite-diff     rel-err");
    for layer_idx in 0..2 {
        let pair_grads = grads[layer_idx].as_ref().unwrap()[0].clone();
        for (tensor, analytic) in [("b", &pair_grads.grad_b), ("a", &pair_grads.grad_a)] {
            for k in 0..analytic.len() {
                let bump = |delta: f64, model: &mut AdaptedModel| {
                    let pair = &mut model.layers[layer_idx]
                        .adapter
                        .as_mut()
                        .unwrap()
                        .active_mut()[0];
                    let v = if tensor == "b" {
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
                bump(h, &mut model);
                let up = eval(&model);
                bump(-2.0 * h, &mut model);
                let down = eval(&model);
                bump(h, &mut model);
                let fd = (up - down) / (2.0 * h);
                let g = analytic.data()[k];
                let rel = (g - fd).abs() / g.abs().max(1.0);
                worst = worst.max(rel);
                if k == 0 {
                    println!(
                        "{layer_idx:>5}  {tensor:>6}  {k:>5}   {g:<14.6e}  {fd:<14.6e}  {rel:.2e}"
                    );
                }
            }
        }
    }
    println!("\nworst relative error across every trainable scalar: {worst:.2e}");
    assert!(worst < 1e-5);
    println!("all gradients agree with central differences at h = 1e-5");
    Ok(())
}
