//! Spectral effective rank: the exponentiated entropy of the normalized
//! singular values, a scale-free count of the directions a matrix actually
//! uses.
//!
//! ```bash
//! cargo run --release -p aroma --example effective_rank_report
//! ```

use aroma::analysis::{effective_rank, DEFAULT_TAIL_CUT};
use aroma::linalg::{outer, singular_values, Matrix, Rng, Vector};

fn show(name: &str, m: &Matrix) {
    let sigma = singular_values(m);
    let top: Vec<String> = sigma.iter().take(4).map(|s| format!("{s:.3}")).collect();
    println!(
        "{name:<28} erank {:>7.4}   sigma [{}{}]",
        effective_rank(m, DEFAULT_TAIL_CUT),
        top.join(", "),
        if sigma.len() > 4 { ", ..." } else { "" },
    );
}

fn main() {
    let mut rng = Rng::new(3);

    show("identity 6x6", &Matrix::identity(6));

    let b = Vector::from_slice(&[1.0, -2.0, 0.5, 3.0]);
    let a = Vector::from_slice(&[2.0, 1.0, -1.0, 0.5, 1.5]);
    show("rank-one outer product", &outer(&b, &a));

    show(
        "diag(3, 1)",
        &Matrix::from_rows(&[&[3.0, 0.0], &[0.0, 1.0]]),
    );

    // A flat spectrum uses all directions; a decaying one concentrates.
    let mut flat = Matrix::zeros(6, 6);
    let mut decaying = Matrix::zeros(6, 6);
    for i in 0..6 {
        flat.set(i, i, 2.0);
        decaying.set(i, i, 2.0_f64.powi(-(i as i32)));
    }
    show("flat spectrum (all 2.0)", &flat);
    show("geometric spectrum", &decaying);

    show(
        "random gaussian 8x8",
        &Matrix::random_normal(&mut rng, 8, 8, 1.0),
    );

    // Scaling never changes the effective rank.
    let m = Matrix::random_normal(&mut rng, 5, 7, 1.0);
    println!(
        "\nscale invariance: erank(M) = {:.6}, erank(100 M) = {:.6}",
        effective_rank(&m, DEFAULT_TAIL_CUT),
        effective_rank(&m.scaled(100.0), DEFAULT_TAIL_CUT)
    );
}
