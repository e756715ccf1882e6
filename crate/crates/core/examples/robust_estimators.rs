//! Run every robust estimator on one contaminated pair.
//!
//! ```text
//! cargo run --release --example robust_estimators -- 0.6
//! ```
//! The optional argument is the outlier rate (default 0.5).

use std::time::Instant;

use fmbench::synth::{generate_pair, Rig, SceneConfig};
use fmbench::{compute_sgd, estimate, nsgd, EstimatorConfig, EstimatorKind, SgdConfig};

fn main() -> fmbench::Result<()> {
    let rate: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let pair = generate_pair(&SceneConfig::new(Rig::Random, 200, 3).with_noise(0.5).with_outliers(rate))?;
    println!("{} correspondences, {} true inliers", pair.corrs.len(), pair.inlier_count());

    for kind in EstimatorKind::ALL {
        let cfg = EstimatorConfig::new(kind).with_threshold(1.5).with_seed(42);
        let t = Instant::now();
        match estimate(pair.correspondences(), &cfg) {
            Ok(res) => {
                let sgd = compute_sgd(&pair.f_gt, &res.f, &SgdConfig::new(pair.dims, pair.dims))?;
                let hits = res
                    .inlier_mask
                    .iter()
                    .zip(&pair.inlier_truth)
                    .filter(|(a, b)| **a && **b)
                    .count();
                println!(
                    "{:>7}: NSGD {:.4}  inliers {:>3} ({hits} true)  iterations {:>5}  {:.1} ms",
                    kind.name(),
                    nsgd(sgd, pair.dims, pair.dims),
                    res.inlier_count(),
                    res.iterations_used,
                    t.elapsed().as_secs_f64() * 1e3
                );
                if let Some(d) = res.stage_diagnostics {
                    println!("         coarse stage kept {} ({:.1}%)", d.survivors, 100.0 * d.survivor_rate);
                }
            }
            Err(e) => println!("{:>7}: failed: {e}", kind.name()),
        }
    }
    Ok(())
}
