//! Epipolar geometry primitives.

use crate::error::{Error, Result};
use crate::numeric::{self, mat3, Mat, Mat3};

/// Below this norm `F * m` is treated as the zero line.
const EPIPOLE_TOL: f64 = 1e-12;
/// Relative tolerance when picking the entry that fixes the sign of F.
const SIGN_PICK_TOL: f64 = 1e-9;
/// Relative smallest singular value treated as exactly zero.
const RANK_TOL: f64 = 1e-14;

/// Image coordinates in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub u: f64,
    pub v: f64,
}

impl Point2 {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn homogeneous(&self) -> [f64; 3] {
        [self.u, self.v, 1.0]
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// Image size in pixels: `h` rows by `w` columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct ImageDims {
    pub h: u32,
    pub w: u32,
}

impl ImageDims {
    pub fn new(h: u32, w: u32) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::InvalidInput(format!("image dims {h}x{w} must be positive")));
        }
        Ok(Self { h, w })
    }

    pub fn diagonal(&self) -> f64 {
        libm::hypot(f64::from(self.h), f64::from(self.w))
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.u >= 0.0 && p.v >= 0.0 && p.u < f64::from(self.w) && p.v < f64::from(self.h)
    }
}

/// A putative match between a point in image 1 and a point in image 2.
///
/// `nn_ratio` is the first-to-second nearest-neighbour descriptor distance
/// ratio, when the match came out of descriptor matching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub p1: Point2,
    pub p2: Point2,
    pub nn_ratio: Option<f64>,
}

impl Correspondence {
    pub fn new(p1: Point2, p2: Point2) -> Self {
        Self { p1, p2, nn_ratio: None }
    }

    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.nn_ratio = Some(ratio);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.p1.is_finite() || !self.p2.is_finite() {
            return Err(Error::InvalidInput("correspondence has non-finite coordinates".into()));
        }
        if let Some(r) = self.nn_ratio {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidInput(format!("nn_ratio {r} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Line `a u + b v + c = 0` with `a^2 + b^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Line {
    /// Normalises arbitrary homogeneous line coefficients.
    pub fn from_homogeneous(l: [f64; 3]) -> Result<Self> {
        let n = libm::hypot(l[0], l[1]);
        if !(n >= EPIPOLE_TOL) {
            return Err(Error::EpipoleDegenerate);
        }
        Ok(Self {
            a: l[0] / n,
            b: l[1] / n,
            c: l[2] / n,
        })
    }
}

/// Which image the point lives in when drawing its epipolar line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Point in image 1, line in image 2 (`F m`).
    FirstToSecond,
    /// Point in image 2, line in image 1 (`F^T m'`).
    SecondToFirst,
}

/// Fundamental matrix in canonical form: rank 2, unit Frobenius norm and a
/// positive largest-magnitude entry.
///
/// The only constructors go through [`canonicalize`], so every value upholds
/// those invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrix(Mat3);

impl FundamentalMatrix {
    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Mat3 {
        mat3::transpose(&self.0)
    }

    /// Row-major entries.
    pub fn entries(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        ]
    }

    /// Keeps `m` bit-for-bit when it already satisfies the canonical
    /// invariants, otherwise canonicalises it.
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        if is_canonical(&m) {
            Ok(Self(m))
        } else {
            canonicalize(&m)
        }
    }

    /// `x2^T F x1` for a correspondence.
    pub fn algebraic_error(&self, c: &Correspondence) -> f64 {
        let l = mat3::mul_vec(&self.0, &c.p1.homogeneous());
        l[0] * c.p2.u + l[1] * c.p2.v + l[2]
    }

    /// Symmetric epipolar distance, or `+inf` when either point is an epipole.
    ///
    /// Error-free form of [`symmetric_epipolar_distance`] for scoring loops.
    #[inline]
    pub fn residual(&self, c: &Correspondence) -> f64 {
        let f = &self.0;
        let (u1, v1, u2, v2) = (c.p1.u, c.p1.v, c.p2.u, c.p2.v);
        let la = f[0][0] * u1 + f[0][1] * v1 + f[0][2];
        let lb = f[1][0] * u1 + f[1][1] * v1 + f[1][2];
        let lc = f[2][0] * u1 + f[2][1] * v1 + f[2][2];
        let ra = f[0][0] * u2 + f[1][0] * v2 + f[2][0];
        let rb = f[0][1] * u2 + f[1][1] * v2 + f[2][1];
        // sqrt is correctly rounded everywhere, so this stays portable.
        let n1 = (la * la + lb * lb).sqrt();
        let n2 = (ra * ra + rb * rb).sqrt();
        if n1 < EPIPOLE_TOL || n2 < EPIPOLE_TOL {
            return f64::INFINITY;
        }
        let num = (la * u2 + lb * v2 + lc).abs();
        (num / n1).max(num / n2)
    }

    /// Distances of a correspondence to its two epipolar lines, as
    /// `(distance in image 1, distance in image 2)`.
    pub fn epipolar_distances(&self, c: &Correspondence) -> Result<(f64, f64)> {
        let l2 = epipolar_line(self, c.p1, Direction::FirstToSecond)?;
        let l1 = epipolar_line(self, c.p2, Direction::SecondToFirst)?;
        Ok((line_distance(c.p1, &l1), line_distance(c.p2, &l2)))
    }
}

fn is_canonical(m: &Mat3) -> bool {
    if m.iter().flatten().any(|x| !x.is_finite()) {
        return false;
    }
    let norm = mat3::frobenius(m);
    (norm - 1.0).abs() <= 1e-12 && mat3::det(m).abs() <= 1e-12 && sign_entry(m) > 0.0
}

fn sign_entry(m: &Mat3) -> f64 {
    let max = m.iter().flatten().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    *m.iter()
        .flatten()
        .find(|x| x.abs() >= max * (1.0 - SIGN_PICK_TOL))
        .unwrap_or(&0.0)
}

/// Enforces the canonical form: the closest rank-2 matrix (smallest singular
/// value zeroed), scaled to unit Frobenius norm, with the sign chosen so that
/// the first entry (row-major) of maximal magnitude is positive.
pub fn canonicalize(m: &Mat3) -> Result<FundamentalMatrix> {
    if m.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite fundamental matrix".into()));
    }
    let scale = m.iter().flatten().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    if scale == 0.0 {
        return Err(Error::InvalidInput("zero matrix cannot be canonicalised".into()));
    }
    let scaled = mat3::scale(m, 1.0 / scale);
    let d = numeric::svd(&Mat::from_mat3(&scaled))?;
    // Already rank 2 to working precision: rebuilding from the SVD would only
    // add absolute rounding error to the small entries.
    let r = if d.s[2] <= RANK_TOL * d.s[0] {
        scaled
    } else {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = (0..2).map(|p| d.u[(i, p)] * d.s[p] * d.v[(j, p)]).sum();
            }
        }
        r
    };
    let norm = mat3::frobenius(&r);
    if !(norm > 0.0) {
        return Err(Error::InvalidInput("matrix has rank below 2".into()));
    }
    let mut out = mat3::scale(&r, 1.0 / norm);
    if sign_entry(&out) < 0.0 {
        out = mat3::scale(&out, -1.0);
    }
    // No negative zeros.
    for x in out.iter_mut().flatten() {
        *x += 0.0;
    }
    Ok(FundamentalMatrix(out))
}

/// Normalised epipolar line of `m`, in the image opposite to the one `m` lives in.
pub fn epipolar_line(f: &FundamentalMatrix, m: Point2, direction: Direction) -> Result<Line> {
    let mat = match direction {
        Direction::FirstToSecond => *f.matrix(),
        Direction::SecondToFirst => f.transpose(),
    };
    Line::from_homogeneous(mat3::mul_vec(&mat, &m.homogeneous()))
}

fn line_distance(p: Point2, l: &Line) -> f64 {
    (l.a * p.u + l.b * p.v + l.c).abs()
}

pub fn point_line_distance(p: Point2, line: &Line) -> Result<f64> {
    if ((line.a * line.a + line.b * line.b) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput("line coefficients are not normalised".into()));
    }
    Ok(line_distance(p, line))
}

/// Larger of the two point-to-epipolar-line distances, so that "within `t`
/// pixels in both images" is the single test `distance <= t`.
pub fn symmetric_epipolar_distance(f: &FundamentalMatrix, c: &Correspondence) -> Result<f64> {
    let r = f.residual(c);
    if r.is_finite() {
        Ok(r)
    } else {
        Err(Error::EpipoleDegenerate)
    }
}

/// Pinhole intrinsics.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default)]
    pub skew: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, skew: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || ![cx, cy, skew].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "invalid intrinsics fx={fx} fy={fy} cx={cx} cy={cy} skew={skew}"
            )));
        }
        Ok(Self { fx, fy, cx, cy, skew })
    }

    /// Default synthetic camera for an image: `fx = fy = 0.8 w`, principal
    /// point at the image centre, zero skew.
    pub fn for_image(dims: ImageDims) -> Self {
        let w = f64::from(dims.w);
        Self {
            fx: 0.8 * w,
            fy: 0.8 * w,
            cx: w / 2.0,
            cy: f64::from(dims.h) / 2.0,
            skew: 0.0,
        }
    }

    pub fn matrix(&self) -> Mat3 {
        [
            [self.fx, self.skew, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ]
    }
}

/// 3x4 camera matrix `P = K [R | t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionMatrix([[f64; 4]; 3]);

impl ProjectionMatrix {
    pub fn new(m: [[f64; 4]; 3]) -> Result<Self> {
        if m.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite projection matrix".into()));
        }
        let left = [
            [m[0][0], m[0][1], m[0][2]],
            [m[1][0], m[1][1], m[1][2]],
            [m[2][0], m[2][1], m[2][2]],
        ];
        let scale = mat3::frobenius(&left);
        if !(mat3::det(&left).abs() > 1e-12 * scale * scale * scale) {
            return Err(Error::InvalidInput("left 3x3 block of P is singular".into()));
        }
        Ok(Self(m))
    }

    pub fn from_krt(k: &CameraIntrinsics, r: &Mat3, t: &[f64; 3]) -> Result<Self> {
        let km = k.matrix();
        let kr = mat3::mul(&km, r);
        let kt = mat3::mul_vec(&km, t);
        let mut m = [[0.0; 4]; 3];
        for i in 0..3 {
            m[i][..3].copy_from_slice(&kr[i]);
            m[i][3] = kt[i];
        }
        Self::new(m)
    }

    pub fn matrix(&self) -> &[[f64; 4]; 3] {
        &self.0
    }

    pub fn to_mat(&self) -> Mat {
        Mat::from_rows(&self.0)
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.0.map(|row| row.map(|x| x * s)))
    }

    /// Homogeneous camera centre, `P C = 0`.
    pub fn centre(&self) -> Result<[f64; 4]> {
        let c = numeric::right_null_vector(&self.to_mat())?;
        Ok([c[0], c[1], c[2], c[3]])
    }

    /// Image rows 0 and 1 divided by `s`.
    fn scaled_rows(&self, s: f64) -> Self {
        let mut m = self.0;
        for row in m.iter_mut().take(2) {
            for x in row.iter_mut() {
                *x /= s;
            }
        }
        Self(m)
    }

    fn apply(&self, x: &[f64; 4]) -> [f64; 3] {
        let m = &self.0;
        std::array::from_fn(|i| (0..4).map(|j| m[i][j] * x[j]).sum())
    }
}

/// Projects a world point: `d (u, v, 1)^T = P (x, y, z, 1)^T`.
pub fn project(p: &ProjectionMatrix, x: [f64; 3]) -> Result<Point2> {
    let h = p.apply(&[x[0], x[1], x[2], 1.0]);
    if !(h[2].abs() > 1e-12) {
        return Err(Error::AtCamera { depth: h[2] });
    }
    Ok(Point2::new(h[0] / h[2], h[1] / h[2]))
}

/// Depth `d` of a world point in front of (positive) or behind a camera.
pub fn depth(p: &ProjectionMatrix, x: [f64; 3]) -> f64 {
    p.apply(&[x[0], x[1], x[2], 1.0])[2]
}

/// Ground-truth fundamental matrix `F = [P' C]_x P' P^+`.
pub fn fm_from_projections(p1: &ProjectionMatrix, p2: &ProjectionMatrix) -> Result<FundamentalMatrix> {
    let c1 = p1.centre()?;
    let c2 = p2.centre()?;
    if same_centre(&c1, &c2) {
        return Err(Error::NoBaseline);
    }
    // Work in image frames scaled so that pixel and homogeneous rows of the
    // projections have comparable size; the small entries of a pixel-frame F
    // keep their relative accuracy when mapped back.
    let s1 = row_scale(p1);
    let s2 = row_scale(p2);
    let q1 = p1.scaled_rows(s1);
    let q2 = p2.scaled_rows(s2);
    let epipole = q2.apply(&c1);
    let pinv = numeric::pseudo_inverse(&q1.to_mat())?;
    let m = q2.to_mat().matmul(&pinv).to_mat3();
    let f = mat3::mul(&mat3::skew(&epipole), &m);
    let scale = f.iter().flatten().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    if !(scale > 1e-12 * mat3::frobenius(&m) * epipole.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE)) {
        return Err(Error::NoBaseline);
    }
    let g = *canonicalize(&f)?.matrix();
    let t1 = [1.0 / s1, 1.0 / s1, 1.0];
    let t2 = [1.0 / s2, 1.0 / s2, 1.0];
    let mut back = [[0.0; 3]; 3];
    for (i, row) in back.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = t2[i] * g[i][j] * t1[j];
        }
    }
    canonicalize(&back)
}

/// Ratio of the larger pixel-row norm to the homogeneous-row norm of `p`.
fn row_scale(p: &ProjectionMatrix) -> f64 {
    let m = p.matrix();
    let norm = |r: &[f64; 4]| libm::sqrt(r.iter().map(|x| x * x).sum());
    let s = norm(&m[0]).max(norm(&m[1])) / norm(&m[2]);
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

fn same_centre(c1: &[f64; 4], c2: &[f64; 4]) -> bool {
    const FINITE: f64 = 1e-12;
    match (c1[3].abs() > FINITE, c2[3].abs() > FINITE) {
        (true, true) => {
            let d: f64 = (0..3).map(|i| { let e = c1[i] / c1[3] - c2[i] / c2[3]; e * e }).sum();
            d.sqrt() <= 1e-9
        }
        (false, false) => {
            // Both at infinity: the same point iff the directions are parallel.
            let cross = [
                c1[1] * c2[2] - c1[2] * c2[1],
                c1[2] * c2[0] - c1[0] * c2[2],
                c1[0] * c2[1] - c1[1] * c2[0],
            ];
            cross.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-9
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn translation_f() -> FundamentalMatrix {
        canonicalize(&[[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]]).unwrap()
    }

    fn rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> Mat3 {
        let axis: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = (axis[0].powi(2) + axis[1].powi(2) + axis[2].powi(2)).sqrt();
        let k = axis.map(|x| x / n);
        let theta = rng.random_range(-max_angle..max_angle);
        let kx = mat3::skew(&k);
        let kx2 = mat3::mul(&kx, &kx);
        mat3::add(
            &mat3::add(&mat3::identity(), &mat3::scale(&kx, theta.sin())),
            &mat3::scale(&kx2, 1.0 - theta.cos()),
        )
    }

    fn random_rig(rng: &mut ChaCha8Rng) -> (ProjectionMatrix, ProjectionMatrix) {
        let k = CameraIntrinsics::new(
            rng.random_range(300.0..900.0),
            rng.random_range(300.0..900.0),
            rng.random_range(200.0..400.0),
            rng.random_range(150.0..300.0),
            0.0,
        )
        .unwrap();
        let r1 = rotation(rng, 0.3);
        let r2 = rotation(rng, 0.3);
        let t1: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let t2: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        (
            ProjectionMatrix::from_krt(&k, &r1, &t1).unwrap(),
            ProjectionMatrix::from_krt(&k, &r2, &t2).unwrap(),
        )
    }

    #[test]
    fn epipolar_line_pure_translation() {
        let f = translation_f();
        let l = epipolar_line(&f, Point2::new(10.0, 5.0), Direction::FirstToSecond).unwrap();
        // y = 5
        assert!(l.a.abs() < 1e-15);
        assert!((l.c / l.b + 5.0).abs() < 1e-12);
        let l = epipolar_line(&f, Point2::new(12.0, 8.0), Direction::SecondToFirst).unwrap();
        assert!(l.a.abs() < 1e-15);
        assert!((l.c / l.b + 8.0).abs() < 1e-12);
    }

    #[test]
    fn epipolar_line_at_epipole_is_degenerate() {
        // Kernel of this F is (0, 0, 1): the image-1 origin is the epipole.
        let g = canonicalize(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(
            epipolar_line(&g, Point2::new(0.0, 0.0), Direction::FirstToSecond),
            Err(Error::EpipoleDegenerate)
        ));
        assert!(epipolar_line(&g, Point2::new(1.0, 0.0), Direction::FirstToSecond).is_ok());
    }

    #[test]
    fn epipolar_line_matches_direct_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let m: Mat3 = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
            let f = canonicalize(&m).unwrap();
            let p = Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
            let l = epipolar_line(&f, p, Direction::FirstToSecond).unwrap();
            let raw = mat3::mul_vec(f.matrix(), &p.homogeneous());
            assert!((l.a.hypot(l.b) - 1.0).abs() < 1e-12);
            let s = raw[0] / l.a;
            assert!((raw[1] - s * l.b).abs() < 1e-12 * s.abs().max(1.0));
            assert!((raw[2] - s * l.c).abs() < 1e-10 * s.abs().max(1.0));
        }
    }

    #[test]
    fn point_line_distance_examples() {
        let l = Line { a: 0.0, b: 1.0, c: -5.0 };
        assert_eq!(point_line_distance(Point2::new(12.0, 8.0), &l).unwrap(), 3.0);
        assert_eq!(point_line_distance(Point2::new(3.0, 5.0), &l).unwrap(), 0.0);
        let bad = Line { a: 0.0, b: 2.0, c: -5.0 };
        assert!(matches!(
            point_line_distance(Point2::new(0.0, 0.0), &bad),
            Err(Error::InvalidInput(_))
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let th: f64 = rng.random_range(0.0..6.28);
            let l = Line { a: th.cos(), b: th.sin(), c: rng.random_range(-100.0..100.0) };
            let p = Point2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
            let d = point_line_distance(p, &l).unwrap();
            assert_eq!(d, (l.a * p.u + l.b * p.v + l.c).abs());
        }
    }

    #[test]
    fn symmetric_distance_pure_translation() {
        let f = translation_f();
        let c = Correspondence::new(Point2::new(10.0, 5.0), Point2::new(12.0, 8.0));
        assert!((symmetric_epipolar_distance(&f, &c).unwrap() - 3.0).abs() < 1e-12);
        assert!((f.residual(&c) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fm_from_pure_translation() {
        let k = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 0.0).unwrap();
        let p1 = ProjectionMatrix::from_krt(&k, &mat3::identity(), &[0.0, 0.0, 0.0]).unwrap();
        let p2 = ProjectionMatrix::from_krt(&k, &mat3::identity(), &[-1.0, 0.0, 0.0]).unwrap();
        let f = fm_from_projections(&p1, &p2).unwrap();
        let expected = translation_f();
        for (a, b) in f.entries().iter().zip(expected.entries()) {
            assert!((a - b).abs() < 1e-12, "{:?}", f.entries());
        }
        assert!(matches!(fm_from_projections(&p1, &p1), Err(Error::NoBaseline)));
    }

    #[test]
    fn fm_from_projections_satisfies_epipolar_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let (p1, p2) = random_rig(&mut rng);
            let f = fm_from_projections(&p1, &p2).unwrap();
            for _ in 0..50 {
                let x = [
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(4.0..10.0),
                ];
                let (Ok(a), Ok(b)) = (project(&p1, x), project(&p2, x)) else { continue };
                assert!(f.residual(&Correspondence::new(a, b)) < 1e-9);
            }
        }
    }

    #[test]
    fn fm_invariant_to_projection_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let (p1, p2) = random_rig(&mut rng);
            let f = fm_from_projections(&p1, &p2).unwrap();
            let g = fm_from_projections(
                &p1.scaled(rng.random_range(0.1..10.0)).unwrap(),
                &p2.scaled(-rng.random_range(0.1..10.0)).unwrap(),
            )
            .unwrap();
            for (a, b) in f.entries().iter().zip(g.entries()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn project_examples() {
        let id = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 0.0).unwrap();
        let p = ProjectionMatrix::from_krt(&id, &mat3::identity(), &[0.0; 3]).unwrap();
        assert_eq!(project(&p, [1.0, 2.0, 4.0]).unwrap(), Point2::new(0.25, 0.5));
        let k = CameraIntrinsics::new(100.0, 100.0, 320.0, 240.0, 0.0).unwrap();
        let p = ProjectionMatrix::from_krt(&k, &mat3::identity(), &[0.0; 3]).unwrap();
        assert_eq!(project(&p, [0.0, 0.0, 10.0]).unwrap(), Point2::new(320.0, 240.0));
        assert!(matches!(project(&p, [1.0, 1.0, 0.0]), Err(Error::AtCamera { .. })));
    }

    #[test]
    fn project_matches_homogeneous_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let (p, _) = random_rig(&mut rng);
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(2.0..9.0)];
            let q = project(&p, x).unwrap();
            let m = p.matrix();
            let h: Vec<f64> = (0..3)
                .map(|i| m[i][0] * x[0] + m[i][1] * x[1] + m[i][2] * x[2] + m[i][3])
                .collect();
            assert!((q.u - h[0] / h[2]).abs() < 1e-12 * q.u.abs().max(1.0));
            assert!((q.v - h[1] / h[2]).abs() < 1e-12 * q.v.abs().max(1.0));
        }
    }

    #[test]
    fn canonicalize_examples() {
        let f = translation_f();
        let again = canonicalize(f.matrix()).unwrap();
        for (a, b) in f.entries().iter().zip(again.entries()) {
            assert!((a - b).abs() < 1e-12);
        }
        let d = canonicalize(&[[3.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let s = 13.0_f64.sqrt();
        let want = [3.0 / s, 0.0, 0.0, 0.0, 2.0 / s, 0.0, 0.0, 0.0, 0.0];
        for (a, b) in d.entries().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(canonicalize(&[[0.0; 3]; 3]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn canonicalize_random_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let m: Mat3 = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-5.0..5.0)));
            let f = canonicalize(&m).unwrap();
            assert!(mat3::det(f.matrix()).abs() < 1e-12);
            assert!((mat3::frobenius(f.matrix()) - 1.0).abs() < 1e-12);
            assert!(sign_entry(f.matrix()) > 0.0);
        }
    }

    #[test]
    fn from_matrix_keeps_canonical_bits() {
        let f = translation_f();
        assert_eq!(FundamentalMatrix::from_matrix(*f.matrix()).unwrap(), f);
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent(entries in proptest::array::uniform9(-10.0f64..10.0)) {
            let m: Mat3 = [
                [entries[0], entries[1], entries[2]],
                [entries[3], entries[4], entries[5]],
                [entries[6], entries[7], entries[8]],
            ];
            prop_assume!(mat3::frobenius(&m) > 1e-3);
            let f = canonicalize(&m).unwrap();
            let g = canonicalize(f.matrix()).unwrap();
            for (a, b) in f.entries().iter().zip(g.entries()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn distance_depends_only_on_canonical_f(
            entries in proptest::array::uniform9(-1.0f64..1.0),
            lambda in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0],
            u1 in 0.0f64..640.0, v1 in 0.0f64..480.0, u2 in 0.0f64..640.0, v2 in 0.0f64..480.0,
        ) {
            let m: Mat3 = [
                [entries[0], entries[1], entries[2]],
                [entries[3], entries[4], entries[5]],
                [entries[6], entries[7], entries[8]],
            ];
            prop_assume!(mat3::frobenius(&m) > 1e-2);
            let f = canonicalize(&m).unwrap();
            let g = canonicalize(&mat3::scale(f.matrix(), lambda)).unwrap();
            let c = Correspondence::new(Point2::new(u1, v1), Point2::new(u2, v2));
            if let (Ok(a), Ok(b)) = (symmetric_epipolar_distance(&f, &c), symmetric_epipolar_distance(&g, &c)) {
                prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
            }
        }
    }
}
