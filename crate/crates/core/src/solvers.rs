//! Normalised 8-point and 7-point fundamental matrix solvers.

use crate::error::{Error, Result};
use crate::geometry::{canonicalize, Correspondence, FundamentalMatrix, Point2};
use crate::numeric::{self, cubic_real_roots, mat3, Mat, Mat3, NormalizingTransform};

/// Relative gap under which the design matrix null space is not one-dimensional.
const DESIGN_GAP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    EightPoint,
    SevenPoint,
}

impl SolverKind {
    pub const fn sample_size(self) -> usize {
        match self {
            SolverKind::EightPoint => 8,
            SolverKind::SevenPoint => 7,
        }
    }

    /// Runs the solver on a (minimal or larger) sample.
    pub fn solve(self, corrs: &[Correspondence]) -> Result<Vec<FundamentalMatrix>> {
        match self {
            SolverKind::EightPoint => solve_eight_point(corrs).map(|f| vec![f]),
            SolverKind::SevenPoint => solve_seven_point(corrs),
        }
    }
}

struct Normalized {
    t1: NormalizingTransform,
    t2: NormalizingTransform,
    design: Mat,
}

fn normalized_design(corrs: &[Correspondence]) -> Result<Normalized> {
    let p1: Vec<Point2> = corrs.iter().map(|c| c.p1).collect();
    let p2: Vec<Point2> = corrs.iter().map(|c| c.p2).collect();
    let degenerate = |e: Error| match e {
        Error::DegenerateConfiguration(msg) => Error::DegenerateSample(msg),
        other => other,
    };
    let t1 = numeric::hartley_transform(&p1).map_err(degenerate)?;
    let t2 = numeric::hartley_transform(&p2).map_err(degenerate)?;
    let mut data = Vec::with_capacity(corrs.len() * 9);
    for (a, b) in p1.iter().zip(&p2) {
        let a = t1.apply(*a);
        let b = t2.apply(*b);
        data.extend_from_slice(&[
            b.u * a.u,
            b.u * a.v,
            b.u,
            b.v * a.u,
            b.v * a.v,
            b.v,
            a.u,
            a.v,
            1.0,
        ]);
    }
    let design = Mat::new(corrs.len(), 9, data)?;
    Ok(Normalized { t1, t2, design })
}

fn vec_to_mat3(v: &[f64]) -> Mat3 {
    [[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]]
}

/// `F = T2^T Fn T1`.
fn denormalize(fn_: &Mat3, t1: &NormalizingTransform, t2: &NormalizingTransform) -> Mat3 {
    mat3::mul(&mat3::mul(&mat3::transpose(&t2.matrix()), fn_), &t1.matrix())
}

/// Normalised 8-point algorithm (least squares for more than 8 matches).
pub fn solve_eight_point(corrs: &[Correspondence]) -> Result<FundamentalMatrix> {
    if corrs.len() < 8 {
        return Err(Error::InsufficientData {
            needed: 8,
            got: corrs.len(),
        });
    }
    let n = normalized_design(corrs)?;
    let d = numeric::svd(&n.design)?;
    let s = d.spectrum();
    if s[7] - s[8] <= DESIGN_GAP * s[0] {
        return Err(Error::DegenerateSample("design matrix null space is not one-dimensional".into()));
    }
    let fn_raw = vec_to_mat3(&d.v.column(8));
    // Rank-2 enforcement in normalised coordinates, where it is well conditioned.
    let fn_rank2 = canonicalize(&fn_raw)?;
    canonicalize(&denormalize(fn_rank2.matrix(), &n.t1, &n.t2))
}

/// 7-point algorithm: returns every real solution of the rank constraint.
pub fn solve_seven_point(corrs: &[Correspondence]) -> Result<Vec<FundamentalMatrix>> {
    if corrs.len() != 7 {
        return Err(Error::InvalidInput(format!(
            "7-point solver needs exactly 7 correspondences, got {}",
            corrs.len()
        )));
    }
    let n = normalized_design(corrs)?;
    let d = numeric::svd(&n.design)?;
    let s = d.spectrum();
    if s[6] <= DESIGN_GAP * s[0] {
        return Err(Error::DegenerateSample("design matrix null space exceeds two dimensions".into()));
    }
    let f1 = vec_to_mat3(&d.v.column(7));
    let f2 = vec_to_mat3(&d.v.column(8));

    // det(a F1 + (1 - a) F2) is a cubic in a; recover it from four samples.
    let mix = |a: f64| mat3::add(&mat3::scale(&f1, a), &mat3::scale(&f2, 1.0 - a));
    let det_at = |a: f64| mat3::det(&mix(a));
    let (p0, p1, pm1, p2) = (det_at(0.0), det_at(1.0), det_at(-1.0), det_at(2.0));
    let c0 = p0;
    let c2 = (p1 + pm1) / 2.0 - c0;
    let odd = (p1 - pm1) / 2.0;
    let c3 = (p2 - c0 - 4.0 * c2 - 2.0 * odd) / 6.0;
    let c1 = odd - c3;
    let roots = cubic_real_roots(c3, c2, c1, c0).map_err(|e| match e {
        Error::DegeneratePolynomial => Error::DegenerateSample("rank constraint vanishes".into()),
        other => other,
    })?;

    let mut out = Vec::with_capacity(roots.len());
    for a in roots {
        let fnorm = mix(a);
        if let Ok(f) = canonicalize(&denormalize(&fnorm, &n.t1, &n.t2)) {
            out.push(f);
        }
    }
    if out.is_empty() {
        return Err(Error::DegenerateSample("no admissible real solution".into()));
    }
    Ok(out)
}
