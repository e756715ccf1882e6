//! SGD, its normalised form and %Recall.

use fmbench::metrics::compute_sgd_terms;
use fmbench::synth::{generate_pair, Rig, SceneConfig};
use fmbench::{compute_sgd, nsgd, recall, solve_eight_point, ImageDims, SgdConfig};

fn main() -> fmbench::Result<()> {
    let dims = ImageDims::new(480, 640)?;
    let cfg = SgdConfig::new(dims, dims).with_seed(7);
    let truth = generate_pair(&SceneConfig::new(Rig::Random, 30, 5))?;
    println!("SGD(F, F) = {}", compute_sgd(&truth.f_gt, &truth.f_gt, &cfg)?);

    let mut values = Vec::new();
    for sigma in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let noisy = generate_pair(&SceneConfig::new(Rig::Random, 30, 5).with_noise(sigma))?;
        let f = solve_eight_point(noisy.correspondences())?;
        let terms = compute_sgd_terms(&truth.f_gt, &f, &cfg)?;
        let n = nsgd(terms.sgd(), dims, dims);
        println!("sigma {sigma:>4}: SGD {:>8.3} px  NSGD {n:.4}", terms.sgd());
        values.push(n);
    }
    for t in [0.005, 0.01, 0.05] {
        println!("recall at {t}: {:.0}%", recall(&values, t)?);
    }
    Ok(())
}
