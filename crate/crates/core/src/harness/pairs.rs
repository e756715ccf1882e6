use rand::seq::index;

use crate::error::Result;
use crate::geometry::{fm_from_projections, CameraIntrinsics, Correspondence, FundamentalMatrix, ProjectionMatrix};
use crate::harness::formats::PoseRecord;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// Frames captured at most `max_time_gap` seconds apart.
    ShortBaseline,
    /// Every pair of frames.
    WideBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSelectionConfig {
    pub mode: SelectionMode,
    /// Pairs need strictly more ground-truth inliers than this.
    pub min_inliers: usize,
    pub inlier_px: f64,
    pub max_time_gap: f64,
    pub sample_count: usize,
    pub seed: u64,
}

impl Default for PairSelectionConfig {
    fn default() -> Self {
        Self {
            mode: SelectionMode::ShortBaseline,
            min_inliers: 20,
            inlier_px: 1.0,
            max_time_gap: 1.0,
            sample_count: 1000,
            seed: 0,
        }
    }
}

/// Projection matrix of a camera-to-world pose.
pub fn pose_projection(k: &CameraIntrinsics, pose: &PoseRecord) -> Result<ProjectionMatrix> {
    let (r, t) = pose.world_to_camera();
    ProjectionMatrix::from_krt(k, &r, &t)
}

/// Ground-truth F from image `a` to image `b`.
pub fn pose_fundamental(k: &CameraIntrinsics, a: &PoseRecord, b: &PoseRecord) -> Result<FundamentalMatrix> {
    fm_from_projections(&pose_projection(k, a)?, &pose_projection(k, b)?)
}

/// Frame-id pairs worth benchmarking.
///
/// `matches(a, b)` supplies candidate correspondences between frames `a`
/// and `b` (image `a` first), or `None` if there are none. A pair is kept when
/// more than `min_inliers` of them lie within `inlier_px` of the ground-truth
/// epipolar lines in both images. The survivors are sorted, then
/// `sample_count` of them are drawn with the configured seed and returned
/// sorted.
pub fn select_pairs(
    poses: &[PoseRecord],
    intrinsics: &CameraIntrinsics,
    matches: &dyn Fn(usize, usize) -> Option<Vec<Correspondence>>,
    cfg: &PairSelectionConfig,
) -> Vec<(usize, usize)> {
    let mut sorted: Vec<&PoseRecord> = poses.iter().collect();
    sorted.sort_by_key(|p| p.frame);
    let mut candidates = Vec::new();
    let mut untimed = false;
    for (i, a) in sorted.iter().enumerate() {
        for b in &sorted[i + 1..] {
            if cfg.mode == SelectionMode::ShortBaseline {
                match (a.timestamp, b.timestamp) {
                    (Some(ta), Some(tb)) if (tb - ta).abs() <= cfg.max_time_gap => {}
                    (Some(_), Some(_)) => continue,
                    _ => {
                        untimed = true;
                        continue;
                    }
                }
            }
            candidates.push((*a, *b));
        }
    }
    if untimed {
        log::warn!("short-baseline selection skipped frames without timestamps");
    }
    let mut kept = Vec::new();
    for (a, b) in candidates {
        let Ok(f) = pose_fundamental(intrinsics, a, b) else {
            continue;
        };
        let Some(corrs) = matches(a.frame, b.frame) else {
            continue;
        };
        let inliers = corrs.iter().filter(|c| f.residual(c) <= cfg.inlier_px).count();
        if inliers > cfg.min_inliers {
            kept.push((a.frame, b.frame));
        }
    }
    if kept.is_empty() {
        log::warn!("no candidate pair passed the inlier rule");
        return kept;
    }
    kept.sort_unstable();
    kept.dedup();
    if kept.len() <= cfg.sample_count {
        return kept;
    }
    let mut rng = seed::rng(cfg.seed);
    let mut out: Vec<(usize, usize)> = index::sample(&mut rng, kept.len(), cfg.sample_count)
        .into_iter()
        .map(|i| kept[i])
        .collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ImageDims, Point2};
    use crate::harness::formats::Rotation;
    use crate::numeric::mat3;

    fn pose(frame: usize, t: f64, x: f64) -> PoseRecord {
        PoseRecord {
            frame,
            timestamp: Some(t),
            rotation: Rotation::Matrix(mat3::identity()),
            translation: [x, 0.0, 0.0],
        }
    }

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::for_image(ImageDims::new(480, 640).unwrap())
    }

    /// `n` exact matches of points at depth 5 between frames a and b.
    fn exact_matches(poses: &[PoseRecord], a: usize, b: usize, n: usize) -> Vec<Correspondence> {
        let pa = pose_projection(&k(), &poses[a]).unwrap();
        let pb = pose_projection(&k(), &poses[b]).unwrap();
        (0..n)
            .map(|i| {
                let x = [(i % 7) as f64 * 0.2 - 0.6, (i / 7) as f64 * 0.2 - 0.4, 5.0 + (i % 3) as f64];
                let u = crate::geometry::project(&pa, x).unwrap();
                let v = crate::geometry::project(&pb, x).unwrap();
                Correspondence::new(u, v)
            })
            .collect()
    }

    #[test]
    fn inlier_count_rule() {
        let poses = vec![pose(0, 0.0, 0.0), pose(1, 0.5, 0.3), pose(2, 0.9, 0.6)];
        let provider = |a: usize, b: usize| {
            let n = if (a, b) == (0, 1) { 30 } else { 15 };
            Some(exact_matches(&poses, a, b, n))
        };
        let cfg = PairSelectionConfig::default();
        assert_eq!(select_pairs(&poses, &k(), &provider, &cfg), vec![(0, 1)]);
    }

    #[test]
    fn short_baseline_time_gap() {
        let poses = vec![pose(0, 0.0, 0.0), pose(1, 2.0, 0.3)];
        let provider = |a: usize, b: usize| Some(exact_matches(&poses, a, b, 40));
        let short = PairSelectionConfig::default();
        assert!(select_pairs(&poses, &k(), &provider, &short).is_empty());
        let wide = PairSelectionConfig {
            mode: SelectionMode::WideBaseline,
            ..short
        };
        assert_eq!(select_pairs(&poses, &k(), &provider, &wide), vec![(0, 1)]);
    }

    #[test]
    fn rejects_displaced_matches() {
        let poses = vec![pose(0, 0.0, 0.0), pose(1, 0.1, 0.3)];
        let provider = |a: usize, b: usize| {
            let mut m = exact_matches(&poses, a, b, 40);
            for c in m.iter_mut().skip(15) {
                c.p2 = Point2::new(c.p2.u, c.p2.v + 3.0);
            }
            Some(m)
        };
        assert!(select_pairs(&poses, &k(), &provider, &PairSelectionConfig::default()).is_empty());
    }

    #[test]
    fn order_invariant_and_sampled() {
        let poses: Vec<PoseRecord> = (0..12).map(|i| pose(i, i as f64 * 0.2, i as f64 * 0.1)).collect();
        let provider = |a: usize, b: usize| Some(exact_matches(&poses, a, b, 25));
        let cfg = PairSelectionConfig {
            sample_count: 10,
            seed: 4,
            ..Default::default()
        };
        let a = select_pairs(&poses, &k(), &provider, &cfg);
        let mut rev = poses.clone();
        rev.reverse();
        let b = select_pairs(&rev, &k(), &provider, &cfg);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|&(x, y)| y > x && (y - x) <= 5));
    }
}
