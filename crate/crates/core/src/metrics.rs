//! Evaluation metrics: symmetric geometry distance (SGD) between two
//! fundamental matrices, its normalised form, recall and inlier rates.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{Correspondence, FundamentalMatrix, ImageDims, Line, Point2};
use crate::matching::MatchSet;
use crate::numeric::mat3;
use crate::seed;

pub const DEFAULT_SGD_SAMPLES: usize = 10_000;
pub const DEFAULT_RECALL_THRESHOLD: f64 = 0.05;
/// Inlier threshold as a fraction of the image diagonal.
pub const DEFAULT_ALPHA: f64 = 0.003;
/// Rejected draws allowed per requested sample before giving up.
const REJECTION_FACTOR: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub dims1: ImageDims,
    pub dims2: ImageDims,
}

impl SgdConfig {
    pub fn new(dims1: ImageDims, dims2: ImageDims) -> Self {
        Self {
            n_samples: DEFAULT_SGD_SAMPLES,
            seed: 0,
            dims1,
            dims2,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.n_samples = n;
        self
    }

    /// The same configuration with the two images exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            dims1: self.dims2,
            dims2: self.dims1,
            ..*self
        }
    }
}

/// Accumulated point-to-line distances, split by the image they were measured in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdTerms {
    pub in_image1: f64,
    pub in_image2: f64,
    pub n_samples: usize,
    pub dims1: ImageDims,
    pub dims2: ImageDims,
}

impl SgdTerms {
    /// SGD in pixels.
    pub fn sgd(&self) -> f64 {
        (self.in_image1 + self.in_image2) / (4.0 * self.n_samples as f64)
    }

    /// Normalised SGD: each term divided by the diagonal of the image it was
    /// measured in, clamped to `[0, 1]`.
    pub fn nsgd(&self) -> f64 {
        let v = (self.in_image1 / self.dims1.diagonal() + self.in_image2 / self.dims2.diagonal())
            / (4.0 * self.n_samples as f64);
        v.clamp(0.0, 1.0)
    }
}

/// SGD between two fundamental matrices, in pixels.
pub fn compute_sgd(f1: &FundamentalMatrix, f2: &FundamentalMatrix, cfg: &SgdConfig) -> Result<f64> {
    compute_sgd_terms(f1, f2, cfg).map(|t| t.sgd())
}

/// Runs the two halves of the SGD sampler and keeps the per-image sums.
///
/// Each half draws `n_samples` virtual correspondences from one matrix and
/// measures them against the other. The second half swaps both the images and
/// the matrices. Half seeds depend on the matrices and image sizes involved,
/// so exchanging the arguments (and the dims) reproduces the same draws.
pub fn compute_sgd_terms(f1: &FundamentalMatrix, f2: &FundamentalMatrix, cfg: &SgdConfig) -> Result<SgdTerms> {
    if cfg.n_samples == 0 {
        return Err(Error::InvalidInput("SGD needs at least one sample".into()));
    }
    let mut terms = SgdTerms {
        in_image1: 0.0,
        in_image2: 0.0,
        n_samples: cfg.n_samples,
        dims1: cfg.dims1,
        dims2: cfg.dims2,
    };
    if f1 == f2 {
        // Every virtual point lies on both lines; skip the rounding residue.
        return Ok(terms);
    }
    let a = half(f1, f2, cfg.dims1, cfg.dims2, cfg)?;
    let b = half(f2, f1, cfg.dims2, cfg.dims1, cfg)?;
    terms.in_image1 = a.in_sample_image + b.in_line_image;
    terms.in_image2 = a.in_line_image + b.in_sample_image;
    Ok(terms)
}

struct HalfSums {
    in_sample_image: f64,
    in_line_image: f64,
}

fn half_seed(base: u64, gen: &FundamentalMatrix, meas: &FundamentalMatrix, a: ImageDims, b: ImageDims) -> u64 {
    let mut parts: Vec<u64> = Vec::with_capacity(22);
    parts.extend(gen.entries().iter().map(|x| x.to_bits()));
    parts.extend(meas.entries().iter().map(|x| x.to_bits()));
    parts.extend([a.h, a.w, b.h, b.w].map(u64::from));
    seed::derive(base, &parts)
}

/// One pass of the sampler: points `m` in the sample image, lines of `gen`
/// in the line image, distances under `meas`.
fn half(
    gen: &FundamentalMatrix,
    meas: &FundamentalMatrix,
    sample_dims: ImageDims,
    line_dims: ImageDims,
    cfg: &SgdConfig,
) -> Result<HalfSums> {
    let mut rng = seed::rng(half_seed(cfg.seed, gen, meas, sample_dims, line_dims));
    let (w, h) = (f64::from(sample_dims.w), f64::from(sample_dims.h));
    let g = gen.matrix();
    let f = meas.matrix();
    let ft = meas.transpose();
    let mut sums = HalfSums {
        in_sample_image: 0.0,
        in_line_image: 0.0,
    };
    let cap = REJECTION_FACTOR.saturating_mul(cfg.n_samples);
    let mut rejected = 0usize;
    let mut count = 0usize;
    while count < cfg.n_samples {
        let m = Point2::new(rng.random_range(0.0..w), rng.random_range(0.0..h));
        let chord = Line::from_homogeneous(mat3::mul_vec(g, &m.homogeneous()))
            .ok()
            .and_then(|l| clip_line(&l, line_dims));
        let Some((p0, p1)) = chord else {
            rejected += 1;
            if rejected > cap {
                return Err(Error::NonOverlappingGeometry { attempts: rejected });
            }
            continue;
        };
        let t: f64 = rng.random_range(0.0..1.0);
        let mp = Point2::new(p0.u + t * (p1.u - p0.u), p0.v + t * (p1.v - p0.v));
        let (Ok(l2), Ok(l3)) = (
            Line::from_homogeneous(mat3::mul_vec(f, &m.homogeneous())),
            Line::from_homogeneous(mat3::mul_vec(&ft, &mp.homogeneous())),
        ) else {
            rejected += 1;
            if rejected > cap {
                return Err(Error::NonOverlappingGeometry { attempts: rejected });
            }
            continue;
        };
        sums.in_line_image += dist(mp, &l2);
        sums.in_sample_image += dist(m, &l3);
        count += 1;
    }
    Ok(sums)
}

fn dist(p: Point2, l: &Line) -> f64 {
    (l.a * p.u + l.b * p.v + l.c).abs()
}

/// Liang-Barsky clipping of a normalised line to the rectangle
/// `[0, w] x [0, h]`. Returns the end points of the chord, if it has
/// positive length.
pub fn clip_line(l: &Line, dims: ImageDims) -> Option<(Point2, Point2)> {
    let (w, h) = (f64::from(dims.w), f64::from(dims.h));
    // Foot of the perpendicular from the origin, direction along the line.
    let (x0, y0) = (-l.a * l.c, -l.b * l.c);
    let (dx, dy) = (-l.b, l.a);
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (p, q) in [(-dx, x0), (dx, w - x0), (-dy, y0), (dy, h - y0)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    if !(t0 < t1) {
        return None;
    }
    Some((
        Point2::new(x0 + t0 * dx, y0 + t0 * dy),
        Point2::new(x0 + t1 * dx, y0 + t1 * dy),
    ))
}

/// Normalises an SGD value with the mean of the two images' `1 / diagonal`
/// factors; exact when both images have the same size. Clamped to `[0, 1]`.
///
/// ```
/// use fmbench::{nsgd, ImageDims};
/// let d = ImageDims::new(480, 640).unwrap();
/// assert_eq!(nsgd(40.0, d, d), 0.05);
/// ```
pub fn nsgd(sgd_value: f64, dims1: ImageDims, dims2: ImageDims) -> f64 {
    let factor = 0.5 * (1.0 / dims1.diagonal() + 1.0 / dims2.diagonal());
    (sgd_value * factor).clamp(0.0, 1.0)
}

/// Percentage of values strictly below `threshold`.
pub fn recall(nsgd_values: &[f64], threshold: f64) -> Result<f64> {
    if nsgd_values.is_empty() {
        return Err(Error::InvalidInput("recall of an empty list".into()));
    }
    let hits = nsgd_values.iter().filter(|&&v| v < threshold).count();
    Ok(100.0 * hits as f64 / nsgd_values.len() as f64)
}

/// Per-image inlier threshold `alpha * diagonal` in pixels.
pub fn inlier_threshold(dims: ImageDims, alpha: f64) -> f64 {
    alpha * dims.diagonal()
}

/// Whether each correspondence is closer than `alpha * diagonal` to its
/// epipolar line in both images.
pub fn inlier_flags(
    corrs: &[Correspondence],
    f_gt: &FundamentalMatrix,
    dims1: ImageDims,
    dims2: ImageDims,
    alpha: f64,
) -> Vec<bool> {
    let t1 = inlier_threshold(dims1, alpha);
    let t2 = inlier_threshold(dims2, alpha);
    corrs
        .iter()
        .map(|c| match f_gt.epipolar_distances(c) {
            Ok((d1, d2)) => d1 < t1 && d2 < t2,
            Err(_) => false,
        })
        .collect()
}

/// Inlier percentage under the default `alpha`.
pub fn inlier_rate(
    corrs: &[Correspondence],
    f_gt: &FundamentalMatrix,
    dims1: ImageDims,
    dims2: ImageDims,
) -> Result<f64> {
    inlier_rate_with(corrs, f_gt, dims1, dims2, DEFAULT_ALPHA)
}

pub fn inlier_rate_with(
    corrs: &[Correspondence],
    f_gt: &FundamentalMatrix,
    dims1: ImageDims,
    dims2: ImageDims,
    alpha: f64,
) -> Result<f64> {
    if corrs.is_empty() {
        return Err(Error::InvalidInput("inlier rate of an empty correspondence set".into()));
    }
    let hits = inlier_flags(corrs, f_gt, dims1, dims2, alpha)
        .into_iter()
        .filter(|&b| b)
        .count();
    Ok(100.0 * hits as f64 / corrs.len() as f64)
}

/// Per-pair evaluation row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub nsgd: f64,
    /// %Inlier after robust estimation.
    pub inlier_rate_post: f64,
    /// %Inlier-m, before robust estimation.
    pub inlier_rate_pre: f64,
    pub corrs_post: usize,
    pub corrs_pre: usize,
}

/// Assembles a [`MetricReport`]. `ms_pre` are the matches handed to the
/// estimator and `ms_post` the ones it kept.
pub fn pair_report(
    ms_pre: &MatchSet,
    ms_post: &MatchSet,
    f_est: &FundamentalMatrix,
    f_gt: &FundamentalMatrix,
    sgd: &SgdConfig,
    alpha: f64,
) -> Result<MetricReport> {
    let inlier_rate_pre = inlier_rate_with(&ms_pre.correspondences, f_gt, sgd.dims1, sgd.dims2, alpha)?;
    let inlier_rate_post = inlier_rate_with(&ms_post.correspondences, f_gt, sgd.dims1, sgd.dims2, alpha)?;
    let nsgd = compute_sgd_terms(f_gt, f_est, sgd)?.nsgd();
    Ok(MetricReport {
        nsgd,
        inlier_rate_post,
        inlier_rate_pre,
        corrs_post: ms_post.len(),
        corrs_pre: ms_pre.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::canonicalize;
    use crate::numeric::Mat3;
    use crate::synth::{generate_pair, Rig, SceneConfig};
    use proptest::prelude::*;

    fn vga() -> ImageDims {
        ImageDims::new(480, 640).unwrap()
    }

    fn scene_f(seed: u64) -> FundamentalMatrix {
        generate_pair(&SceneConfig::new(Rig::Random, 20, seed)).unwrap().f_gt
    }

    fn perturbed(f: &FundamentalMatrix, eps: f64, seed: u64) -> FundamentalMatrix {
        use rand::Rng;
        let mut rng = seed::rng(seed);
        let mut m: Mat3 = *f.matrix();
        for row in m.iter_mut() {
            for x in row.iter_mut() {
                *x += eps * rng.random_range(-1.0..1.0) * x.abs().max(1e-7);
            }
        }
        canonicalize(&m).unwrap()
    }

    #[test]
    fn identical_matrices_give_zero() {
        let f = scene_f(1);
        assert_eq!(compute_sgd(&f, &f, &SgdConfig::new(vga(), vga())).unwrap(), 0.0);
    }

    #[test]
    fn constants() {
        let d = vga();
        assert_eq!(d.diagonal(), 800.0);
        assert_eq!(1.0 / d.diagonal(), 1.0 / 800.0);
        assert_eq!(inlier_threshold(d, DEFAULT_ALPHA), 2.4);
        assert_eq!(nsgd(40.0, d, d), 0.05);
        let kitti = ImageDims::new(370, 1226).unwrap();
        assert_eq!(kitti.diagonal(), 1_639_976f64.sqrt());
        assert!((kitti.diagonal() - 1280.62).abs() < 0.01);
    }

    #[test]
    fn recall_examples() {
        let mut v = vec![0.0; 574];
        v.extend(vec![0.5; 426]);
        assert!((recall(&v, 0.05).unwrap() - 57.40).abs() < 1e-9);
        assert_eq!(recall(&[0.0; 5], 0.05).unwrap(), 100.0);
        assert!(recall(&[], 0.05).is_err());
        let eps = 1e-12;
        assert_eq!(recall(&[0.05 - eps], 0.05).unwrap(), 100.0);
        assert_eq!(recall(&[0.05 + eps], 0.05).unwrap(), 0.0);
        assert_eq!(recall(&[0.05], 0.05).unwrap(), 0.0);
    }

    #[test]
    fn clipping() {
        let d = vga();
        let y5 = Line { a: 0.0, b: 1.0, c: -5.0 };
        let (p, q) = clip_line(&y5, d).unwrap();
        let mut xs = [p.u, q.u];
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, [0.0, 640.0]);
        assert_eq!((p.v, q.v), (5.0, 5.0));
        assert!(clip_line(&Line { a: 0.0, b: 1.0, c: 5.0 }, d).is_none());
        let s = 0.5f64.sqrt();
        // u + v = 2000 misses the image entirely.
        assert!(clip_line(&Line { a: s, b: s, c: -2000.0 * s }, d).is_none());
        let (p, q) = clip_line(&Line { a: s, b: s, c: -100.0 * s }, d).unwrap();
        assert!((p.u + p.v - 100.0).abs() < 1e-9 && (q.u + q.v - 100.0).abs() < 1e-9);
    }

    #[test]
    fn swap_symmetry_is_exact() {
        let f = scene_f(2);
        let g = perturbed(&f, 1e-2, 3);
        let d1 = vga();
        let d2 = ImageDims::new(370, 1226).unwrap();
        let cfg = SgdConfig::new(d1, d2).with_seed(17);
        let a = compute_sgd(&f, &g, &cfg).unwrap();
        let b = compute_sgd(&g, &f, &cfg.swapped()).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn seeded_determinism() {
        let f = scene_f(4);
        let g = perturbed(&f, 1e-2, 5);
        let cfg = SgdConfig::new(vga(), vga()).with_seed(9);
        let a = compute_sgd(&f, &g, &cfg).unwrap();
        let b = compute_sgd(&f, &g, &cfg).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_ne!(a, compute_sgd(&f, &g, &cfg.with_seed(10)).unwrap());
    }

    #[test]
    fn monte_carlo_stability() {
        // N = 1000 on a realistic estimate: 8-point on 1 px noisy matches of the same scene.
        let f = scene_f(6);
        let noisy = generate_pair(&SceneConfig::new(Rig::Random, 20, 6).with_noise(1.0)).unwrap();
        let g = crate::solvers::solve_eight_point(noisy.correspondences()).unwrap();
        let vals: Vec<f64> = (0..20)
            .map(|s| compute_sgd(&f, &g, &SgdConfig::new(vga(), vga()).with_samples(1000).with_seed(s)).unwrap())
            .collect();
        let mean = vals.iter().sum::<f64>() / 20.0;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 19.0;
        assert!(mean > 0.0);
        assert!(var.sqrt() / mean < 0.05, "cv {}", var.sqrt() / mean);
    }

    #[test]
    fn non_overlapping_geometry() {
        // Every epipolar line of image 1 points is far outside image 2.
        let m: Mat3 = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.0, 1e6]];
        let m = mat3::add(&m, &[[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]);
        let f = canonicalize(&m).unwrap();
        let g = scene_f(8);
        let cfg = SgdConfig::new(vga(), vga()).with_samples(10);
        assert!(matches!(compute_sgd(&f, &g, &cfg), Err(Error::NonOverlappingGeometry { .. })));
    }

    #[test]
    fn inlier_rate_examples() {
        let pair = generate_pair(&SceneConfig::new(Rig::Random, 100, 12)).unwrap();
        let d = pair.dims;
        let corrs = &pair.corrs.correspondences;
        assert_eq!(inlier_rate(corrs, &pair.f_gt, d, d).unwrap(), 100.0);
        let mut cfg = SceneConfig::new(Rig::Random, 100, 13);
        cfg.outlier_rate = 0.7;
        cfg.noise_sigma = 5.0;
        let planted = generate_pair(&cfg).unwrap();
        // Outliers sit at least 50 px off their epipolar line.
        let r = inlier_rate(&planted.corrs.correspondences, &planted.f_gt, d, d).unwrap();
        let expected = inlier_flags(&planted.corrs.correspondences, &planted.f_gt, d, d, DEFAULT_ALPHA);
        assert_eq!(r, 100.0 * expected.iter().filter(|&&b| b).count() as f64 / 100.0);
        let truth_in = planted.inlier_truth.iter().filter(|&&b| b).count();
        assert_eq!(truth_in, 30);
        for (flag, truth) in expected.iter().zip(&planted.inlier_truth) {
            if !truth {
                assert!(!flag);
            }
        }
    }

    #[test]
    fn planted_thirty_of_hundred() {
        let pair = generate_pair(&{
            let mut c = SceneConfig::new(Rig::Random, 100, 21);
            c.outlier_rate = 0.7;
            c
        })
        .unwrap();
        let d = pair.dims;
        assert_eq!(inlier_rate(&pair.corrs.correspondences, &pair.f_gt, d, d).unwrap(), 30.0);
    }

    #[test]
    fn report_fields() {
        let pair = generate_pair(&{
            let mut c = SceneConfig::new(Rig::Random, 100, 22);
            c.outlier_rate = 0.4;
            c
        })
        .unwrap();
        let d = pair.dims;
        let sgd = SgdConfig::new(d, d);
        let same = pair_report(&pair.corrs, &pair.corrs, &pair.f_gt, &pair.f_gt, &sgd, DEFAULT_ALPHA).unwrap();
        assert_eq!(same.inlier_rate_pre, same.inlier_rate_post);
        assert_eq!(same.nsgd, 0.0);
        assert_eq!(same.corrs_pre, 100);
        let kept: Vec<Correspondence> = pair
            .corrs
            .correspondences
            .iter()
            .zip(&pair.inlier_truth)
            .filter(|(_, &t)| t)
            .map(|(c, _)| *c)
            .collect();
        let post = MatchSet::from_correspondences(kept);
        let oracle = pair_report(&pair.corrs, &post, &pair.f_gt, &pair.f_gt, &sgd, DEFAULT_ALPHA).unwrap();
        assert_eq!(oracle.inlier_rate_post, 100.0);
        assert_eq!(oracle.corrs_post, 60);
    }

    /// The sampler with both random draws replaced by regular grids.
    fn dense_sgd(f1: &FundamentalMatrix, f2: &FundamentalMatrix, d1: ImageDims, d2: ImageDims) -> f64 {
        fn half(gen: &FundamentalMatrix, meas: &FundamentalMatrix, ds: ImageDims, dl: ImageDims) -> f64 {
            let (gu, gv, gt) = (160, 120, 64);
            let mut total = 0.0;
            let mut accepted = 0usize;
            for i in 0..gu {
                for j in 0..gv {
                    let m = [
                        (i as f64 + 0.5) * f64::from(ds.w) / gu as f64,
                        (j as f64 + 0.5) * f64::from(ds.h) / gv as f64,
                        1.0,
                    ];
                    let l = mat3::mul_vec(gen.matrix(), &m);
                    let Ok(line) = Line::from_homogeneous(l) else { continue };
                    let Some((p, q)) = clip_line(&line, dl) else { continue };
                    let lm = mat3::mul_vec(meas.matrix(), &m);
                    let mut inner = 0.0;
                    for k in 0..gt {
                        let t = (k as f64 + 0.5) / gt as f64;
                        let mp = [p.u + t * (q.u - p.u), p.v + t * (q.v - p.v), 1.0];
                        let d_line = (lm[0] * mp[0] + lm[1] * mp[1] + lm[2]).abs() / lm[0].hypot(lm[1]);
                        let lr = mat3::mul_vec(&meas.transpose(), &mp);
                        let d_pt = (lr[0] * m[0] + lr[1] * m[1] + lr[2]).abs() / lr[0].hypot(lr[1]);
                        inner += d_line + d_pt;
                    }
                    total += inner / gt as f64;
                    accepted += 1;
                }
            }
            total / accepted as f64
        }
        (half(f1, f2, d1, d2) + half(f2, f1, d2, d1)) / 4.0
    }

    #[test]
    fn agrees_with_dense_grid() {
        let d = vga();
        for k in 0..5 {
            let f = scene_f(30 + k);
            let g = perturbed(&f, 1e-2, 40 + k);
            let mc = compute_sgd(&f, &g, &SgdConfig::new(d, d).with_seed(k)).unwrap();
            let grid = dense_sgd(&f, &g, d, d);
            assert!((mc - grid).abs() / grid < 0.05, "{mc} vs {grid}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn sgd_nonnegative_and_nsgd_bounded(s in 0u64..1000, eps in 1e-4f64..0.2) {
            let f = scene_f(s);
            let g = perturbed(&f, eps, s + 1);
            let cfg = SgdConfig::new(vga(), vga()).with_seed(s).with_samples(200);
            let t = compute_sgd_terms(&f, &g, &cfg).unwrap();
            prop_assert!(t.sgd() >= 0.0);
            prop_assert!((0.0..=1.0).contains(&t.nsgd()));
            prop_assert_eq!(compute_sgd(&f, &f, &cfg).unwrap(), 0.0);
        }

        #[test]
        fn recall_monotone(vals in prop::collection::vec(0.0f64..1.0, 1..100), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(recall(&vals, lo).unwrap() <= recall(&vals, hi).unwrap());
        }

        #[test]
        fn inlier_rate_order_invariant(s in 0u64..200, rot in 0usize..100) {
            let mut cfg = SceneConfig::new(Rig::Random, 100, s);
            cfg.outlier_rate = 0.3;
            let pair = generate_pair(&cfg).unwrap();
            let d = pair.dims;
            let mut c = pair.corrs.correspondences.clone();
            let a = inlier_rate(&c, &pair.f_gt, d, d).unwrap();
            c.rotate_left(rot);
            c.reverse();
            prop_assert_eq!(a, inlier_rate(&c, &pair.f_gt, d, d).unwrap());
        }
    }
}
