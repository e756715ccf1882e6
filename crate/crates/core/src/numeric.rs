//! Dense numerical kernels sized for two-view geometry.
//!
//! Everything here works on matrices no larger than an `N x 9` design
//! matrix, so the algorithms favour accuracy and simplicity: the SVD is a
//! one-sided (Hestenes) Jacobi iteration and the cubic solver is closed form.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Off-diagonal convergence tolerance of the Jacobi sweeps.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 80;
/// Relative gap below which the two smallest singular values are treated as equal.
pub const NULL_SPACE_GAP: f64 = 1e-8;
/// Relative discriminant cutoff for the cubic solver.
const CUBIC_DISCRIMINANT_TOL: f64 = 1e-12;

/// Row-major 3x3 matrix used throughout the geometry code.
pub type Mat3 = [[f64; 3]; 3];

/// Dynamically sized row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!("empty {rows}x{cols} matrix")));
        }
        if rows * cols != data.len() {
            return Err(Error::InvalidInput(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows<const C: usize>(rows: &[[f64; C]]) -> Self {
        Self {
            rows: rows.len(),
            cols: C,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn from_mat3(m: &Mat3) -> Self {
        Self::from_rows(m)
    }

    /// Panics unless the matrix is 3x3.
    pub fn to_mat3(&self) -> Mat3 {
        assert!(self.rows == 3 && self.cols == 3, "not a 3x3 matrix");
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            row.copy_from_slice(&self.data[i * 3..i * 3 + 3]);
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matmul");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in matvec");
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn sub(&self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Thin singular value decomposition `m = U diag(s) V[:, ..k]^T`.
///
/// With `k = min(rows, cols)`: `u` is `rows x k`, `s` holds `k` values in
/// descending order and `v` is the full `cols x cols` orthogonal factor, so
/// the trailing `cols - k` columns of `v` span the remaining null space of a
/// wide matrix.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

impl Svd {
    /// Singular spectrum padded with zeros to length `cols`, so that every
    /// column of `v` has a matching singular value.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut s = self.s.clone();
        s.resize(self.v.rows(), 0.0);
        s
    }

    pub fn reconstruct(&self) -> Mat {
        let k = self.s.len();
        let mut out = Mat::zeros(self.u.rows(), self.v.rows());
        for i in 0..out.rows {
            for j in 0..out.cols {
                out[(i, j)] = (0..k).map(|p| self.u[(i, p)] * self.s[p] * self.v[(j, p)]).sum();
            }
        }
        out
    }
}

pub fn svd(m: &Mat) -> Result<Svd> {
    if m.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("svd of a non-finite matrix".into()));
    }
    let (rows, cols) = (m.rows, m.cols);
    // Column-major working copy; each column is rotated as a unit.
    let mut w: Vec<f64> = (0..cols)
        .flat_map(|j| (0..rows).map(move |i| (i, j)))
        .map(|(i, j)| m[(i, j)])
        .collect();
    let mut v = vec![0.0; cols * cols];
    for j in 0..cols {
        v[j * cols + j] = 1.0;
    }

    // Columns below rounding level of the whole matrix have no meaningful
    // direction; rotating against them never converges.
    let total: f64 = w.iter().map(|x| x * x).sum();
    let floor = f64::EPSILON * f64::EPSILON * total;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    let a = w[p * rows + i];
                    let b = w[q * rows + i];
                    alpha += a * a;
                    beta += b * b;
                    gamma += a * b;
                }
                if alpha <= floor || beta <= floor || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, rows, p, q, c, s);
                rotate_columns(&mut v, cols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..cols)
        .map(|j| w[j * rows..(j + 1) * rows].iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));

    let k = rows.min(cols);
    let s: Vec<f64> = order[..k].iter().map(|&j| norms[j]).collect();
    let smax = s.first().copied().unwrap_or(0.0);
    let tiny = smax * f64::EPSILON * (rows.max(cols) as f64);

    let mut u = Mat::zeros(rows, k);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (p, &j) in order[..k].iter().enumerate() {
        let col: Vec<f64> = if norms[j] > tiny && norms[j] > 0.0 {
            w[j * rows..(j + 1) * rows].iter().map(|x| x / norms[j]).collect()
        } else {
            complete_basis(&basis, rows)
        };
        for i in 0..rows {
            u[(i, p)] = col[i];
        }
        basis.push(col);
    }

    let mut vm = Mat::zeros(cols, cols);
    for (p, &j) in order.iter().enumerate() {
        for i in 0..cols {
            vm[(i, p)] = v[j * cols + i];
        }
    }
    Ok(Svd { u, s, v: vm })
}

fn rotate_columns(buf: &mut [f64], len: usize, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..len {
        let a = buf[p * len + i];
        let b = buf[q * len + i];
        buf[p * len + i] = c * a - s * b;
        buf[q * len + i] = s * a + c * b;
    }
}

/// Unit vector orthogonal to every vector in `basis` (Gram-Schmidt on the
/// standard basis, keeping the best-conditioned candidate).
fn complete_basis(basis: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut best = vec![0.0; dim];
    let mut best_norm = -1.0;
    for e in 0..dim {
        let mut cand = vec![0.0; dim];
        cand[e] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let d: f64 = cand.iter().zip(b).map(|(x, y)| x * y).sum();
                cand.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let n = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > best_norm {
            best_norm = n;
            best = cand.into_iter().map(|x| x / n).collect();
        }
    }
    best
}

/// Unit vector spanning the (numerical) right null space of `m`.
///
/// The sign is fixed so that the largest-magnitude component is positive.
pub fn right_null_vector(m: &Mat) -> Result<Vec<f64>> {
    if m.cols < 2 {
        return Err(Error::InvalidInput("null vector needs at least two columns".into()));
    }
    let d = svd(m)?;
    let s = d.spectrum();
    let n = s.len();
    if s[n - 2] - s[n - 1] <= NULL_SPACE_GAP * s[0].max(f64::MIN_POSITIVE) {
        return Err(Error::AmbiguousNullSpace);
    }
    let mut v = d.v.column(n - 1);
    fix_sign(&mut v);
    Ok(v)
}

pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut idx = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[idx].abs() {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Moore-Penrose pseudo-inverse through the SVD.
pub fn pseudo_inverse(m: &Mat) -> Result<Mat> {
    let d = svd(m)?;
    let k = d.s.len();
    let smax = d.s.first().copied().unwrap_or(0.0);
    let tol = (m.rows.max(m.cols) as f64) * f64::EPSILON * smax;
    let mut out = Mat::zeros(m.cols, m.rows);
    for p in 0..k {
        if d.s[p] <= tol {
            continue;
        }
        let inv = 1.0 / d.s[p];
        for i in 0..m.cols {
            let vi = d.v[(i, p)] * inv;
            for j in 0..m.rows {
                out[(i, j)] += vi * d.u[(j, p)];
            }
        }
    }
    Ok(out)
}

/// Real roots of `c3 x^3 + c2 x^2 + c1 x + c0`, ascending.
///
/// Leading coefficients that are negligible relative to the largest one are
/// dropped, falling back to the quadratic or linear formula. Each root is
/// polished with Newton steps on the original polynomial.
pub fn cubic_real_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Result<Vec<f64>> {
    let coeffs = [c3, c2, c1, c0];
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("non-finite polynomial coefficient".into()));
    }
    let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Err(Error::DegeneratePolynomial);
    }
    let eps = 1e-12 * scale;

    let mut roots = if c3.abs() > eps {
        depressed_cubic_roots(c2 / c3, c1 / c3, c0 / c3)
    } else if c2.abs() > eps {
        quadratic_roots(c2, c1, c0)
    } else if c1.abs() > eps {
        vec![-c0 / c1]
    } else {
        Vec::new()
    };

    let eval = |x: f64| ((c3 * x + c2) * x + c1) * x + c0;
    let deriv = |x: f64| (3.0 * c3 * x + 2.0 * c2) * x + c1;
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let d = deriv(*r);
            if d == 0.0 {
                break;
            }
            let step = eval(*r) / d;
            let next = *r - step;
            if !next.is_finite() || eval(next).abs() > eval(*r).abs() {
                break;
            }
            *r = next;
        }
    }
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    let tol = CUBIC_DISCRIMINANT_TOL * (b * b).max((4.0 * a * c).abs());
    if disc < -tol {
        Vec::new()
    } else if disc <= tol {
        vec![-b / (2.0 * a)]
    } else {
        // Numerically stable pairing of the two roots.
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        if q == 0.0 {
            vec![0.0, 0.0]
        } else {
            vec![q / a, c / q]
        }
    }
}

/// Roots of the monic cubic `x^3 + a x^2 + b x + c`.
fn depressed_cubic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let half_q = q / 2.0;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;
    let scale = (half_q * half_q).max((third_p * third_p * third_p).abs());

    if scale == 0.0 {
        return vec![-shift];
    }
    if disc > CUBIC_DISCRIMINANT_TOL * scale {
        let sq = disc.sqrt();
        let t = libm::cbrt(-half_q + sq) + libm::cbrt(-half_q - sq);
        vec![t - shift]
    } else if disc < -CUBIC_DISCRIMINANT_TOL * scale {
        let r = (-third_p).sqrt();
        let cos_arg = (-half_q / (r * r * r)).clamp(-1.0, 1.0);
        let phi = libm::acos(cos_arg);
        let two_pi_3 = 2.0 * std::f64::consts::PI / 3.0;
        (0..3)
            .map(|k| 2.0 * r * libm::cos(phi / 3.0 - two_pi_3 * k as f64) - shift)
            .collect()
    } else {
        // Repeated root: t = 2 cbrt(-q/2) (simple) and t = -cbrt(-q/2) (double).
        let u = libm::cbrt(-half_q);
        vec![2.0 * u - shift, -u - shift]
    }
}

/// Similarity transform that conditions a 2D point set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizingTransform {
    pub scale: f64,
    pub tx: f64,
    pub ty: f64,
}

impl NormalizingTransform {
    pub fn matrix(&self) -> Mat3 {
        [
            [self.scale, 0.0, self.tx],
            [0.0, self.scale, self.ty],
            [0.0, 0.0, 1.0],
        ]
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        Point2::new(self.scale * p.u + self.tx, self.scale * p.v + self.ty)
    }

    pub fn invert(&self, p: Point2) -> Point2 {
        Point2::new((p.u - self.tx) / self.scale, (p.v - self.ty) / self.scale)
    }
}

/// Hartley normalisation: centroid to the origin, mean distance `sqrt(2)`.
pub fn hartley_normalize(points: &[Point2]) -> Result<(NormalizingTransform, Vec<Point2>)> {
    let t = hartley_transform(points)?;
    Ok((t, points.iter().map(|&p| t.apply(p)).collect()))
}

pub(crate) fn hartley_transform(points: &[Point2]) -> Result<NormalizingTransform> {
    if points.len() < 2 {
        return Err(Error::DegenerateConfiguration(
            "normalisation needs at least two points".into(),
        ));
    }
    let n = points.len() as f64;
    let cu = points.iter().map(|p| p.u).sum::<f64>() / n;
    let cv = points.iter().map(|p| p.v).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| libm::hypot(p.u - cu, p.v - cv))
        .sum::<f64>()
        / n;
    let extent = cu.abs().max(cv.abs()).max(1.0);
    if !(mean_dist > 1e-12 * extent) {
        return Err(Error::DegenerateConfiguration("all points coincide".into()));
    }
    let scale = std::f64::consts::SQRT_2 / mean_dist;
    Ok(NormalizingTransform {
        scale,
        tx: -scale * cu,
        ty: -scale * cv,
    })
}

pub mod mat3 {
    //! Fixed-size helpers for 3x3 matrices and 3-vectors.

    use super::Mat3;

    pub fn mul(a: &Mat3, b: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        out
    }

    pub fn transpose(a: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[j][i] = a[i][j];
            }
        }
        out
    }

    pub fn mul_vec(a: &Mat3, v: &[f64; 3]) -> [f64; 3] {
        [
            a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
            a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
            a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
        ]
    }

    pub fn det(a: &Mat3) -> f64 {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    pub fn frobenius(a: &Mat3) -> f64 {
        a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(a: &Mat3, s: f64) -> Mat3 {
        a.map(|row| row.map(|x| x * s))
    }

    pub fn add(a: &Mat3, b: &Mat3) -> Mat3 {
        let mut out = *a;
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] += b[i][j];
            }
        }
        out
    }

    /// Cross-product matrix `[v]_x`.
    pub fn skew(v: &[f64; 3]) -> Mat3 {
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    }

    pub fn identity() -> Mat3 {
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    }

    pub fn inverse(a: &Mat3) -> Option<Mat3> {
        let d = det(a);
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let inv_d = 1.0 / d;
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                out[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) * inv_d;
            }
        }
        Some(out)
    }
}
