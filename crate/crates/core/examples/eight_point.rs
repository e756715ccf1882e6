//! Recover F from eight or more clean correspondences and check the
//! epipolar constraint.
//!
//! cargo run --example eight_point

use fmbench::synth::{generate_pair, Rig, SceneConfig};
use fmbench::{compute_sgd, nsgd, solve_eight_point, SgdConfig};

fn main() -> fmbench::Result<()> {
    let pair = generate_pair(&SceneConfig::new(Rig::WideBaseline, 40, 1))?;
    let f = solve_eight_point(pair.correspondences())?;

    let worst = pair
        .correspondences()
        .iter()
        .map(|c| f.residual(c))
        .fold(0.0, f64::max);
    println!("estimated F = {:?}", f.matrix());
    println!("worst symmetric epipolar distance: {worst:.3e} px");

    let sgd = compute_sgd(&pair.f_gt, &f, &SgdConfig::new(pair.dims, pair.dims))?;
    println!("NSGD vs ground truth: {:.3e}", nsgd(sgd, pair.dims, pair.dims));

    let noisy = generate_pair(&SceneConfig::new(Rig::WideBaseline, 40, 1).with_noise(1.0))?;
    let g = solve_eight_point(noisy.correspondences())?;
    let sgd = compute_sgd(&noisy.f_gt, &g, &SgdConfig::new(pair.dims, pair.dims))?;
    println!("with 1 px noise: SGD {sgd:.3} px");
    Ok(())
}
