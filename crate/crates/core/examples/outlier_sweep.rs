//! %Recall of each estimator as the outlier rate grows.
//!
//! cargo run --release --example outlier_sweep -- 50

use fmbench::synth::{generate_pair, Rig, SceneConfig};
use fmbench::{compute_sgd, estimate, nsgd, recall, EstimatorConfig, EstimatorKind, SgdConfig};

fn main() -> fmbench::Result<()> {
    let pairs: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    print!("outliers");
    for kind in EstimatorKind::ALL {
        print!(" {:>7}", kind.name());
    }
    println!();
    for rate in [0.1, 0.3, 0.5, 0.6, 0.7] {
        let mut per_kind = vec![Vec::new(); EstimatorKind::ALL.len()];
        for seed in 0..pairs {
            let pair = generate_pair(&SceneConfig::new(Rig::Random, 200, seed).with_noise(0.5).with_outliers(rate))?;
            for (k, kind) in EstimatorKind::ALL.into_iter().enumerate() {
                let cfg = EstimatorConfig::new(kind).with_threshold(1.5).with_seed(seed);
                let v = match estimate(pair.correspondences(), &cfg) {
                    Ok(r) => nsgd(compute_sgd(&pair.f_gt, &r.f, &SgdConfig::new(pair.dims, pair.dims))?, pair.dims, pair.dims),
                    Err(_) => 1.0,
                };
                per_kind[k].push(v);
            }
        }
        print!("{:>8.0}%", rate * 100.0);
        for v in &per_kind {
            print!(" {:>7.1}", recall(v, 0.05)?);
        }
        println!();
    }
    Ok(())
}
