//! Text and binary interchange formats.
//!
//! Reals are written with Rust's shortest round-trip formatting, so parsing a
//! written file and writing it again reproduces it byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Correspondence, FundamentalMatrix, ImageDims, Point2};
use crate::matching::{Descriptor, Keypoint, MatchSet};
use crate::numeric::{mat3, Mat3};

/// Rotation parametrisation as stored in the source file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rotation {
    /// `(qx, qy, qz, qw)`.
    Quaternion([f64; 4]),
    Matrix(Mat3),
}

impl Rotation {
    pub fn matrix(&self) -> Mat3 {
        match *self {
            Rotation::Matrix(m) => m,
            Rotation::Quaternion(q) => quaternion_to_matrix(q),
        }
    }
}

/// Camera-to-world pose of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseRecord {
    pub frame: usize,
    pub timestamp: Option<f64>,
    pub rotation: Rotation,
    pub translation: [f64; 3],
}

impl PoseRecord {
    /// `(R, t)` with `x_cam = R X + t`.
    pub fn world_to_camera(&self) -> (Mat3, [f64; 3]) {
        let r = mat3::transpose(&self.rotation.matrix());
        let t = mat3::mul_vec(&r, &self.translation).map(|x| -x);
        (r, t)
    }
}

fn quaternion_to_matrix(q: [f64; 4]) -> Mat3 {
    let n = libm::sqrt(q.iter().map(|x| x * x).sum());
    let [x, y, z, w] = q.map(|v| v / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn orthonormality_error(r: &Mat3) -> f64 {
    let rrt = mat3::mul(r, &mat3::transpose(r));
    let mut err: f64 = 0.0;
    for (i, row) in rrt.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            err = err.max((v - target).abs());
        }
    }
    err.max((mat3::det(r) - 1.0).abs())
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_reals(path: &Path, line_no: usize, line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, line_no, format!("'{tok}' is not a finite number")))
        })
        .collect()
}

fn join(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v}").unwrap();
    }
    s
}

/// Parses TUM trajectory text: `timestamp tx ty tz qx qy qz qw` per line.
pub fn parse_tum_trajectory(path: &Path, text: &str) -> Result<Vec<PoseRecord>> {
    let mut out = Vec::new();
    for (line_no, line) in data_lines(text) {
        let v = parse_reals(path, line_no, line)?;
        if v.len() != 8 {
            return Err(Error::parse(path, line_no, format!("expected 8 fields, found {}", v.len())));
        }
        let mut q = [v[4], v[5], v[6], v[7]];
        let norm = libm::sqrt(q.iter().map(|x| x * x).sum());
        if !(norm > 0.0) {
            return Err(Error::parse(path, line_no, "zero quaternion"));
        }
        if (norm - 1.0).abs() > 1e-3 {
            log::warn!("{}:{line_no}: quaternion norm {norm}, normalising", path.display());
            q = q.map(|x| x / norm);
        }
        out.push(PoseRecord {
            frame: out.len(),
            timestamp: Some(v[0]),
            rotation: Rotation::Quaternion(q),
            translation: [v[1], v[2], v[3]],
        });
    }
    Ok(out)
}

pub fn load_tum_trajectory(path: impl AsRef<Path>) -> Result<Vec<PoseRecord>> {
    let path = path.as_ref();
    parse_tum_trajectory(path, &fs::read_to_string(path)?)
}

/// Writes TUM trajectory text. Matrix rotations are converted to quaternions.
pub fn write_tum_trajectory(poses: &[PoseRecord]) -> String {
    let mut s = String::new();
    for p in poses {
        let q = match p.rotation {
            Rotation::Quaternion(q) => q,
            Rotation::Matrix(m) => matrix_to_quaternion(&m),
        };
        let t = p.timestamp.unwrap_or(p.frame as f64);
        let fields = [t, p.translation[0], p.translation[1], p.translation[2], q[0], q[1], q[2], q[3]];
        s.push_str(&join(&fields));
        s.push('\n');
    }
    s
}

fn matrix_to_quaternion(m: &Mat3) -> [f64; 4] {
    let tr = m[0][0] + m[1][1] + m[2][2];
    if tr > 0.0 {
        let s = libm::sqrt(tr + 1.0) * 2.0;
        [(m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s, 0.25 * s]
    } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
        let s = libm::sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]) * 2.0;
        [0.25 * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s, (m[2][1] - m[1][2]) / s]
    } else if m[1][1] > m[2][2] {
        let s = libm::sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]) * 2.0;
        [(m[0][1] + m[1][0]) / s, 0.25 * s, (m[1][2] + m[2][1]) / s, (m[0][2] - m[2][0]) / s]
    } else {
        let s = libm::sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]) * 2.0;
        [(m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, 0.25 * s, (m[1][0] - m[0][1]) / s]
    }
}

/// Parses KITTI poses: twelve reals per line, the row-major 3x4 `[R | t]`.
pub fn parse_kitti_poses(path: &Path, text: &str) -> Result<Vec<PoseRecord>> {
    let mut out = Vec::new();
    for (line_no, line) in data_lines(text) {
        let v = parse_reals(path, line_no, line)?;
        if v.len() != 12 {
            return Err(Error::parse(path, line_no, format!("expected 12 fields, found {}", v.len())));
        }
        let r = [[v[0], v[1], v[2]], [v[4], v[5], v[6]], [v[8], v[9], v[10]]];
        let err = orthonormality_error(&r);
        if err > 1e-3 {
            return Err(Error::parse(
                path,
                line_no,
                format!("rotation is not orthonormal (error {err:e})"),
            ));
        }
        out.push(PoseRecord {
            frame: out.len(),
            timestamp: None,
            rotation: Rotation::Matrix(r),
            translation: [v[3], v[7], v[11]],
        });
    }
    Ok(out)
}

pub fn load_kitti_poses(path: impl AsRef<Path>) -> Result<Vec<PoseRecord>> {
    let path = path.as_ref();
    parse_kitti_poses(path, &fs::read_to_string(path)?)
}

pub fn write_kitti_poses(poses: &[PoseRecord]) -> String {
    let mut s = String::new();
    for p in poses {
        let r = p.rotation.matrix();
        let t = p.translation;
        let fields = [
            r[0][0], r[0][1], r[0][2], t[0], r[1][0], r[1][1], r[1][2], t[1], r[2][0], r[2][1], r[2][2], t[2],
        ];
        s.push_str(&join(&fields));
        s.push('\n');
    }
    s
}

/// Parses `u1 v1 u2 v2 [ratio]` lines. When `dims` is given every point must
/// lie inside its image.
pub fn parse_correspondences(path: &Path, text: &str, dims: Option<(ImageDims, ImageDims)>) -> Result<MatchSet> {
    let mut out = Vec::new();
    for (line_no, line) in data_lines(text) {
        let v = parse_reals(path, line_no, line)?;
        let mut c = match v.len() {
            4 | 5 => Correspondence::new(Point2::new(v[0], v[1]), Point2::new(v[2], v[3])),
            n => return Err(Error::parse(path, line_no, format!("expected 4 or 5 fields, found {n}"))),
        };
        if let Some(&r) = v.get(4) {
            c = c.with_ratio(r);
        }
        c.validate().map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if let Some((d1, d2)) = dims {
            if !d1.contains(c.p1) || !d2.contains(c.p2) {
                return Err(Error::parse(path, line_no, "point outside the image"));
            }
        }
        out.push(c);
    }
    Ok(MatchSet::from_correspondences(out))
}

pub fn load_correspondences(path: impl AsRef<Path>, dims: Option<(ImageDims, ImageDims)>) -> Result<MatchSet> {
    let path = path.as_ref();
    parse_correspondences(path, &fs::read_to_string(path)?, dims)
}

pub fn write_correspondences(corrs: &[Correspondence]) -> String {
    let mut s = String::new();
    for c in corrs {
        let mut v = vec![c.p1.u, c.p1.v, c.p2.u, c.p2.v];
        v.extend(c.nn_ratio);
        s.push_str(&join(&v));
        s.push('\n');
    }
    s
}

/// Parses `u v` keypoint locations.
pub fn parse_keypoints(path: &Path, text: &str) -> Result<Vec<Point2>> {
    data_lines(text)
        .map(|(line_no, line)| {
            let v = parse_reals(path, line_no, line)?;
            if v.len() != 2 {
                return Err(Error::parse(path, line_no, format!("expected 2 fields, found {}", v.len())));
            }
            Ok(Point2::new(v[0], v[1]))
        })
        .collect()
}

pub fn write_keypoints(points: &[Point2]) -> String {
    let mut s = String::new();
    for p in points {
        s.push_str(&join(&[p.u, p.v]));
        s.push('\n');
    }
    s
}

/// Descriptor file: `u32` count, `u32` dimension (little endian), then
/// row-major little-endian `f32` values.
pub fn parse_descriptors(path: &Path, bytes: &[u8]) -> Result<Vec<Descriptor>> {
    let word = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| Error::parse(path, 0, format!("truncated header at byte {at}")))
    };
    let count = word(0)? as usize;
    let dim = word(4)? as usize;
    let expected = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(8))
        .ok_or_else(|| Error::parse(path, 0, "header sizes overflow"))?;
    if bytes.len() != expected {
        return Err(Error::parse(
            path,
            0,
            format!("header announces {count}x{dim} descriptors ({expected} bytes), file has {}", bytes.len()),
        ));
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let row: Vec<f32> = (0..dim)
            .map(|k| {
                let at = 8 + 4 * (i * dim + k);
                f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
            })
            .collect();
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::parse(path, 0, format!("descriptor {i} has a non-finite value")));
        }
        out.push(Descriptor(row));
    }
    Ok(out)
}

pub fn load_descriptors(path: impl AsRef<Path>) -> Result<Vec<Descriptor>> {
    let path = path.as_ref();
    parse_descriptors(path, &fs::read(path)?)
}

pub fn write_descriptors(descs: &[Descriptor]) -> Result<Vec<u8>> {
    let dim = descs.first().map_or(0, Descriptor::dim);
    if descs.iter().any(|d| d.dim() != dim) {
        return Err(Error::InvalidInput("descriptors must share one dimension".into()));
    }
    let too_big = |_| Error::InvalidInput("descriptor set too large for the file header".into());
    let mut out = Vec::with_capacity(8 + 4 * dim * descs.len());
    out.extend(u32::try_from(descs.len()).map_err(too_big)?.to_le_bytes());
    out.extend(u32::try_from(dim).map_err(too_big)?.to_le_bytes());
    for d in descs {
        for x in &d.0 {
            out.extend(x.to_le_bytes());
        }
    }
    Ok(out)
}

/// Keypoints from a location file and a descriptor file of equal length.
pub fn load_keypoints(locations: impl AsRef<Path>, descriptors: impl AsRef<Path>) -> Result<Vec<Keypoint>> {
    let lp = locations.as_ref();
    let pts = parse_keypoints(lp, &fs::read_to_string(lp)?)?;
    let descs = load_descriptors(descriptors.as_ref())?;
    if pts.len() != descs.len() {
        return Err(Error::parse(
            descriptors.as_ref(),
            0,
            format!("{} descriptors for {} keypoints", descs.len(), pts.len()),
        ));
    }
    Ok(pts
        .into_iter()
        .zip(descs)
        .map(|(location, descriptor)| Keypoint { location, descriptor })
        .collect())
}

/// Nine reals (row-major, whitespace separated); canonicalised on load.
pub fn parse_fundamental(path: &Path, text: &str) -> Result<FundamentalMatrix> {
    let mut v = Vec::with_capacity(9);
    for (line_no, line) in data_lines(text) {
        v.extend(parse_reals(path, line_no, line)?);
    }
    if v.len() != 9 {
        return Err(Error::parse(path, 0, format!("expected 9 reals, found {}", v.len())));
    }
    let m = [[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]];
    FundamentalMatrix::from_matrix(m).map_err(|e| Error::parse(path, 0, e.to_string()))
}

pub fn load_fundamental(path: impl AsRef<Path>) -> Result<FundamentalMatrix> {
    let path = path.as_ref();
    parse_fundamental(path, &fs::read_to_string(path)?)
}

/// Three rows of three reals.
pub fn write_fundamental(f: &FundamentalMatrix) -> String {
    let mut s = String::new();
    for row in f.matrix() {
        s.push_str(&join(row));
        s.push('\n');
    }
    s
}
