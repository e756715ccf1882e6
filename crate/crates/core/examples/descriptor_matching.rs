//! Exact nearest-neighbour matching, the ratio test and a pruner.

use fmbench::matching::OraclePruner;
use fmbench::metrics::DEFAULT_ALPHA;
use fmbench::synth::{generate_pair, plant_descriptors, DescriptorConfig, Rig, SceneConfig};
use fmbench::{apply_pruner, match_nearest_neighbor, ratio_test};

fn main() -> fmbench::Result<()> {
    let pair = generate_pair(&SceneConfig::new(Rig::ShortBaselineForward, 300, 8).with_noise(0.5).with_outliers(0.3))?;
    let kp = plant_descriptors(&pair, &DescriptorConfig::new(64, 1));
    let all = match_nearest_neighbor(&kp.image1, &kp.image2)?;
    println!("{} x {} keypoints -> {} matches", kp.image1.len(), kp.image2.len(), all.len());

    for t in [0.6, 0.7, 0.8, 0.9] {
        println!("ratio {t}: {} kept", ratio_test(&all, t)?.len());
    }
    let kept = ratio_test(&all, 0.8)?;
    let (pruned, stats) = apply_pruner(&kept, &OraclePruner {
        f_gt: pair.f_gt,
        dims1: pair.dims,
        dims2: pair.dims,
        alpha: DEFAULT_ALPHA,
    })?;
    println!("oracle pruner: {} -> {} ({} left)", stats.before, stats.after, pruned.len());
    Ok(())
}
