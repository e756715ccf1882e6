//! The minimal solver returns up to three candidate matrices.

use fmbench::synth::{generate_pair, Rig, SceneConfig};
use fmbench::{compute_sgd, nsgd, solve_seven_point, SgdConfig};

fn main() -> fmbench::Result<()> {
    let pair = generate_pair(&SceneConfig::new(Rig::Random, 8, 11))?;
    let seven = &pair.correspondences()[..7];
    let candidates = solve_seven_point(seven)?;
    println!("{} real root(s)", candidates.len());
    for (i, f) in candidates.iter().enumerate() {
        let max_alg = seven
            .iter()
            .map(|c| f.algebraic_error(c).abs())
            .fold(0.0, f64::max);
        let sgd = compute_sgd(&pair.f_gt, f, &SgdConfig::new(pair.dims, pair.dims))?;
        println!(
            "  root {i}: max |x2' F x1| = {max_alg:.2e}, NSGD = {:.2e}",
            nsgd(sgd, pair.dims, pair.dims)
        );
    }
    Ok(())
}
