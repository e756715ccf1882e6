//! Synthetic two-view scenes with exact ground truth, used as the oracle for
//! tests, examples and benchmarks.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{
    depth, fm_from_projections, project, CameraIntrinsics, Correspondence, FundamentalMatrix, ImageDims, Point2,
    ProjectionMatrix,
};
use crate::matching::{Descriptor, Keypoint, MatchSet};
use crate::numeric::{mat3, Mat3};
use crate::seed;

/// Depth range, in world units, of the points seen by camera 1.
const DEPTH_RANGE: (f64, f64) = (4.0, 12.0);
const MIN_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rig {
    /// Small rotation, translation mostly along the optical axis.
    ShortBaselineForward,
    /// Large lateral baseline with the second camera turned towards the scene.
    WideBaseline,
    /// Rotation up to 10 degrees about a random axis, translation of length
    /// 0.5 to 1.5 in a random direction.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub rig: Rig,
    pub n_points: usize,
    pub noise_sigma: f64,
    pub outlier_rate: f64,
    pub dims: ImageDims,
    pub seed: u64,
    /// Overrides the default camera of [`CameraIntrinsics::for_image`].
    pub intrinsics: Option<CameraIntrinsics>,
    /// Attach nearest-neighbour ratios: `U(0.3, 0.8)` for inliers and
    /// `U(0.5, 0.8)` for outliers, mimicking matches that passed a 0.8 ratio test.
    pub ratios: bool,
}

impl SceneConfig {
    /// Noise-free, outlier-free 480x640 scene.
    pub fn new(rig: Rig, n_points: usize, seed: u64) -> Self {
        Self {
            rig,
            n_points,
            noise_sigma: 0.0,
            outlier_rate: 0.0,
            dims: ImageDims { h: 480, w: 640 },
            seed,
            intrinsics: None,
            ratios: true,
        }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_outliers(mut self, rate: f64) -> Self {
        self.outlier_rate = rate;
        self
    }

    pub fn outlier_count(&self) -> usize {
        (self.outlier_rate * self.n_points as f64).floor() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.outlier_rate) {
            return Err(Error::InvalidInput(format!("outlier rate {} outside [0, 1)", self.outlier_rate)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("noise sigma {} must be non-negative", self.noise_sigma)));
        }
        if self.n_points < 8 || self.n_points - self.outlier_count() < 8 {
            return Err(Error::InvalidInput(format!(
                "{} points with outlier rate {} leave fewer than 8 inliers",
                self.n_points, self.outlier_rate
            )));
        }
        ImageDims::new(self.dims.h, self.dims.w)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPair {
    pub p1: ProjectionMatrix,
    pub p2: ProjectionMatrix,
    pub intrinsics: CameraIntrinsics,
    /// World-to-camera rotation and translation of camera 2 (camera 1 is `[I | 0]`).
    pub rotation: Mat3,
    pub translation: [f64; 3],
    pub f_gt: FundamentalMatrix,
    pub corrs: MatchSet,
    pub inlier_truth: Vec<bool>,
    pub dims: ImageDims,
    pub points: Vec<[f64; 3]>,
}

impl SyntheticPair {
    pub fn correspondences(&self) -> &[Correspondence] {
        &self.corrs.correspondences
    }

    pub fn inlier_count(&self) -> usize {
        self.inlier_truth.iter().filter(|&&b| b).count()
    }
}

/// Standard normal draw by Box-Muller.
pub(crate) fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(std::f64::consts::TAU * u2)
}

/// Rotation by `angle` radians about `axis` (Rodrigues).
pub fn axis_angle(axis: [f64; 3], angle: f64) -> Mat3 {
    let n = libm::sqrt(axis.iter().map(|x| x * x).sum());
    if n == 0.0 || angle == 0.0 {
        return mat3::identity();
    }
    let k = axis.map(|x| x / n);
    let kx = mat3::skew(&k);
    let kx2 = mat3::mul(&kx, &kx);
    mat3::add(
        &mat3::add(&mat3::identity(), &mat3::scale(&kx, libm::sin(angle))),
        &mat3::scale(&kx2, 1.0 - libm::cos(angle)),
    )
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [gaussian(rng), gaussian(rng), gaussian(rng)];
        let n = libm::sqrt(v.iter().map(|x| x * x).sum());
        if n > 1e-9 {
            return v.map(|x| x / n);
        }
    }
}

/// Camera 2 pose `(R, t)` with `x_cam = R X + t`.
fn sample_rig(rig: Rig, rng: &mut ChaCha8Rng) -> (Mat3, [f64; 3]) {
    match rig {
        Rig::ShortBaselineForward => {
            let r = axis_angle(random_unit(rng), rng.random_range(0.0..3f64.to_radians()));
            let tz: f64 = -rng.random_range(0.3..1.0);
            let lateral = 0.2 * tz.abs();
            let t = [
                rng.random_range(-lateral..lateral),
                rng.random_range(-lateral..lateral),
                tz,
            ];
            (r, t)
        }
        Rig::WideBaseline => {
            let scene = [0.0, 0.0, 0.5 * (DEPTH_RANGE.0 + DEPTH_RANGE.1)];
            let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let b = rng.random_range(2.0..3.5);
            let c = [
                side * b,
                rng.random_range(-0.3..0.3) * b,
                rng.random_range(-0.5..0.5),
            ];
            // Optical axis towards the scene centre, small roll.
            let z = normalize(sub(scene, c));
            let up = [0.0, 1.0, 0.0];
            let x = normalize(cross(up, z));
            let y = cross(z, x);
            let look = [x, y, z];
            let roll = axis_angle([0.0, 0.0, 1.0], rng.random_range(-0.1..0.1));
            let r = mat3::mul(&roll, &look);
            let t = mat3::mul_vec(&r, &c).map(|v| -v);
            (r, t)
        }
        Rig::Random => {
            let r = axis_angle(random_unit(rng), rng.random_range(0.0..10f64.to_radians()));
            let len = rng.random_range(0.5..1.5);
            let t = random_unit(rng).map(|x| x * len);
            (r, t)
        }
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = libm::sqrt(a.iter().map(|x| x * x).sum());
    a.map(|x| x / n)
}

/// Random two-view scene. See [`SceneConfig`] for the knobs.
///
/// Outliers keep their (noisy) first point; their second point is redrawn
/// uniformly in image 2 at least `10 max(sigma, 1)` pixels from the true
/// epipolar line.
pub fn generate_pair(cfg: &SceneConfig) -> Result<SyntheticPair> {
    cfg.validate()?;
    let mut rng = seed::rng(cfg.seed);
    let k = cfg.intrinsics.unwrap_or_else(|| CameraIntrinsics::for_image(cfg.dims));
    let kinv = mat3::inverse(&k.matrix()).ok_or_else(|| Error::InvalidInput("singular intrinsics".into()))?;
    let p1 = ProjectionMatrix::from_krt(&k, &mat3::identity(), &[0.0; 3])?;
    let (rotation, translation) = sample_rig(cfg.rig, &mut rng);
    let p2 = ProjectionMatrix::from_krt(&k, &rotation, &translation)?;
    let f_gt = fm_from_projections(&p1, &p2)?;

    let (w, h) = (f64::from(cfg.dims.w), f64::from(cfg.dims.h));
    let budget = MIN_ATTEMPTS.max(50 * cfg.n_points);
    let mut points = Vec::with_capacity(cfg.n_points);
    let mut exact = Vec::with_capacity(cfg.n_points);
    let mut attempts = 0;
    while points.len() < cfg.n_points {
        if attempts == budget {
            return Err(Error::InfeasibleScene(format!(
                "only {} of {} points visible in both views after {budget} attempts",
                points.len(),
                cfg.n_points
            )));
        }
        attempts += 1;
        let pix = [rng.random_range(0.0..w), rng.random_range(0.0..h), 1.0];
        let d = rng.random_range(DEPTH_RANGE.0..DEPTH_RANGE.1);
        let x = mat3::mul_vec(&kinv, &pix).map(|v| v * d);
        if !(depth(&p2, x) > 1e-6) {
            continue;
        }
        let (Ok(a), Ok(b)) = (project(&p1, x), project(&p2, x)) else {
            continue;
        };
        if !cfg.dims.contains(a) || !cfg.dims.contains(b) {
            continue;
        }
        points.push(x);
        exact.push((a, b));
    }

    let n_out = cfg.outlier_count();
    let mut inlier_truth = vec![true; cfg.n_points];
    for i in index::sample(&mut rng, cfg.n_points, n_out) {
        inlier_truth[i] = false;
    }
    let sigma = cfg.noise_sigma;
    let floor = 10.0 * sigma.max(1.0);
    let mut corrs = Vec::with_capacity(cfg.n_points);
    for (i, &(a, b)) in exact.iter().enumerate() {
        let jitter = |p: Point2, rng: &mut ChaCha8Rng| {
            if sigma > 0.0 {
                Point2::new(p.u + sigma * gaussian(rng), p.v + sigma * gaussian(rng))
            } else {
                p
            }
        };
        let q1 = jitter(a, &mut rng);
        let q2 = if inlier_truth[i] {
            jitter(b, &mut rng)
        } else {
            outlier_point(&f_gt, a, cfg.dims, floor, &mut rng)?
        };
        let mut c = Correspondence::new(q1, q2);
        if cfg.ratios {
            let lo = if inlier_truth[i] { 0.3 } else { 0.5 };
            c = c.with_ratio(rng.random_range(lo..0.8));
        }
        corrs.push(c);
    }

    Ok(SyntheticPair {
        p1,
        p2,
        intrinsics: k,
        rotation,
        translation,
        f_gt,
        corrs: MatchSet::from_correspondences(corrs),
        inlier_truth,
        dims: cfg.dims,
        points,
    })
}

fn outlier_point(
    f: &FundamentalMatrix,
    p1: Point2,
    dims: ImageDims,
    floor: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Point2> {
    let l = mat3::mul_vec(f.matrix(), &p1.homogeneous());
    let n = libm::hypot(l[0], l[1]);
    for _ in 0..MIN_ATTEMPTS {
        let q = Point2::new(rng.random_range(0.0..f64::from(dims.w)), rng.random_range(0.0..f64::from(dims.h)));
        let d = (l[0] * q.u + l[1] * q.v + l[2]).abs() / n;
        if d >= floor {
            return Ok(q);
        }
    }
    Err(Error::InfeasibleScene(format!(
        "image too small to place an outlier {floor} px from its epipolar line"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptorConfig {
    pub dim: usize,
    /// Norm of the random offset added to the image-2 copy of a true match.
    pub perturbation: f64,
    /// Unmatched keypoints added to image 2.
    pub distractors: usize,
    pub seed: u64,
}

impl DescriptorConfig {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            dim,
            perturbation: 0.1,
            distractors: 0,
            seed,
        }
    }
}

/// Keypoints for both images of a synthetic pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedKeypoints {
    pub image1: Vec<Keypoint>,
    /// One keypoint per correspondence (same index), then the distractors.
    pub image2: Vec<Keypoint>,
    /// Image-2 index each image-1 keypoint should match, for inliers only.
    pub planted: Vec<Option<usize>>,
}

fn random_descriptor(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
    let n = libm::sqrt(v.iter().map(|x| x * x).sum());
    v.into_iter().map(|x| x / n).collect()
}

fn to_descriptor(v: &[f64]) -> Descriptor {
    Descriptor(v.iter().map(|&x| x as f32).collect())
}

/// Gives each true correspondence one shared unit-norm Gaussian descriptor
/// (perturbed in image 2), and every outlier and distractor an independent one.
pub fn plant_descriptors(pair: &SyntheticPair, cfg: &DescriptorConfig) -> PlantedKeypoints {
    let mut rng = seed::rng(cfg.seed);
    let dim = cfg.dim.max(1);
    let mut image1 = Vec::with_capacity(pair.corrs.len());
    let mut image2 = Vec::with_capacity(pair.corrs.len() + cfg.distractors);
    let mut planted = Vec::with_capacity(pair.corrs.len());
    for (i, (c, &inlier)) in pair.corrs.correspondences.iter().zip(&pair.inlier_truth).enumerate() {
        let d1 = random_descriptor(dim, &mut rng);
        let d2 = if inlier {
            let e = random_descriptor(dim, &mut rng);
            d1.iter().zip(&e).map(|(a, b)| a + cfg.perturbation * b).collect()
        } else {
            random_descriptor(dim, &mut rng)
        };
        image1.push(Keypoint {
            location: c.p1,
            descriptor: to_descriptor(&d1),
        });
        image2.push(Keypoint {
            location: c.p2,
            descriptor: to_descriptor(&d2),
        });
        planted.push(inlier.then_some(i));
    }
    let (w, h) = (f64::from(pair.dims.w), f64::from(pair.dims.h));
    for _ in 0..cfg.distractors {
        let location = Point2::new(rng.random_range(0.0..w), rng.random_range(0.0..h));
        image2.push(Keypoint {
            location,
            descriptor: to_descriptor(&random_descriptor(dim, &mut rng)),
        });
    }
    PlantedKeypoints { image1, image2, planted }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::{match_nearest_neighbor, ratio_test};
    use proptest::prelude::*;

    #[test]
    fn noise_free_scene_is_exact() {
        for rig in [Rig::ShortBaselineForward, Rig::WideBaseline, Rig::Random] {
            for s in 0..10 {
                let pair = generate_pair(&SceneConfig::new(rig, 100, s)).unwrap();
                assert_eq!(pair.corrs.len(), 100);
                for c in pair.correspondences() {
                    assert!(pair.f_gt.residual(c) < 1e-9, "{rig:?} seed {s}");
                }
            }
        }
    }

    #[test]
    fn planted_outliers() {
        let pair = generate_pair(&SceneConfig::new(Rig::Random, 100, 3).with_outliers(0.3)).unwrap();
        assert_eq!(pair.inlier_truth.iter().filter(|&&b| !b).count(), 30);
        for (c, &t) in pair.correspondences().iter().zip(&pair.inlier_truth) {
            if !t {
                assert!(pair.f_gt.residual(c) >= 10.0);
            }
        }
    }

    #[test]
    fn forward_rig_constraint() {
        for s in 0..200 {
            let pair = generate_pair(&SceneConfig::new(Rig::ShortBaselineForward, 20, s)).unwrap();
            let t = pair.translation;
            assert!(t[2].abs() >= 5.0 * t[0].abs().max(t[1].abs()));
        }
    }

    #[test]
    fn ground_truth_single_path() {
        let pair = generate_pair(&SceneConfig::new(Rig::WideBaseline, 30, 8)).unwrap();
        let again = fm_from_projections(&pair.p1, &pair.p2).unwrap();
        assert_eq!(pair.f_gt.entries().map(f64::to_bits), again.entries().map(f64::to_bits));
    }

    #[test]
    fn deterministic() {
        let cfg = SceneConfig::new(Rig::Random, 50, 77).with_noise(0.7).with_outliers(0.4);
        assert_eq!(generate_pair(&cfg).unwrap(), generate_pair(&cfg).unwrap());
    }

    #[test]
    fn invalid_configs() {
        assert!(generate_pair(&SceneConfig::new(Rig::Random, 7, 0)).is_err());
        assert!(generate_pair(&SceneConfig::new(Rig::Random, 20, 0).with_outliers(0.7)).is_err());
        assert!(generate_pair(&SceneConfig::new(Rig::Random, 20, 0).with_outliers(1.0)).is_err());
        let mut tiny = SceneConfig::new(Rig::Random, 50, 0).with_outliers(0.2);
        tiny.dims = ImageDims { h: 4, w: 4 };
        assert!(matches!(generate_pair(&tiny), Err(Error::InfeasibleScene(_))));
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = seed::rng(1);
        let xs: Vec<f64> = (0..200_000).map(|_| gaussian(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.01 && (var - 1.0).abs() < 0.01);
    }

    #[test]
    fn exact_descriptors_recover_all_matches() {
        let pair = generate_pair(&SceneConfig::new(Rig::Random, 200, 4).with_outliers(0.2)).unwrap();
        let mut cfg = DescriptorConfig::new(128, 5);
        cfg.perturbation = 0.0;
        cfg.distractors = 100;
        let kp = plant_descriptors(&pair, &cfg);
        let ms = match_nearest_neighbor(&kp.image1, &kp.image2).unwrap();
        for (i, want) in kp.planted.iter().enumerate() {
            if let Some(j) = want {
                assert_eq!(ms.correspondences[i].p2, kp.image2[*j].location);
                assert_eq!(ms.correspondences[i].nn_ratio, Some(0.0));
            }
        }
    }

    #[test]
    fn heavy_perturbation_fails_ratio_test() {
        let pair = generate_pair(&SceneConfig::new(Rig::Random, 300, 6)).unwrap();
        let mut cfg = DescriptorConfig::new(128, 7);
        // |e| / sqrt(2 + |e|^2) = 0.9 for unit descriptors in high dimension.
        cfg.perturbation = (1.62f64 / 0.19).sqrt();
        let kp = plant_descriptors(&pair, &cfg);
        let ms = match_nearest_neighbor(&kp.image1, &kp.image2).unwrap();
        let ratios: Vec<f64> = ms.correspondences.iter().map(|c| c.nn_ratio.unwrap()).collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!(mean > 0.85, "mean ratio {mean}");
        let kept = ratio_test(&ms, 0.8).unwrap();
        assert!(kept.len() * 20 < ms.len(), "kept {}", kept.len());
    }

    #[test]
    fn distractor_free_ratios_near_zero() {
        let pair = generate_pair(&SceneConfig::new(Rig::Random, 300, 8)).unwrap();
        let kp = plant_descriptors(&pair, &DescriptorConfig::new(128, 9));
        let ms = match_nearest_neighbor(&kp.image1, &kp.image2).unwrap();
        let small = ms.correspondences.iter().filter(|c| c.nn_ratio.unwrap() < 0.2).count();
        assert!(small * 10 >= ms.len() * 9, "{small} of {}", ms.len());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn truth_consistent_with_one_pixel_rule(s in 0u64..10_000, rate in 0.0f64..0.6) {
            let pair = generate_pair(&SceneConfig::new(Rig::Random, 40, s).with_outliers(rate)).unwrap();
            for (c, &t) in pair.correspondences().iter().zip(&pair.inlier_truth) {
                prop_assert_eq!(pair.f_gt.residual(c) <= 1.0, t);
            }
        }
    }
}
