//! Brute-force descriptor matching, Lowe's ratio test and pluggable
//! correspondence pruners.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Correspondence, FundamentalMatrix, ImageDims, Point2};
use crate::metrics;

/// Lowe's ratio threshold used by the baseline pipeline.
pub const DEFAULT_RATIO: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor(pub Vec<f32>);

impl Descriptor {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Squared Euclidean distance, accumulated in `f64`.
    pub fn distance_sq(&self, other: &Descriptor) -> f64 {
        sq_dist(&self.0, &other.0)
    }
}

#[inline]
fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = f64::from(*x) - f64::from(*y);
        acc += d * d;
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub location: Point2,
    pub descriptor: Descriptor,
}

/// Putative correspondences together with the keypoint counts they came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchSet {
    pub correspondences: Vec<Correspondence>,
    pub keypoints1: usize,
    pub keypoints2: usize,
}

impl MatchSet {
    pub fn from_correspondences(correspondences: Vec<Correspondence>) -> Self {
        let n = correspondences.len();
        Self {
            correspondences,
            keypoints1: n,
            keypoints2: n,
        }
    }

    pub fn len(&self) -> usize {
        self.correspondences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.correspondences.is_empty()
    }

    fn with(&self, correspondences: Vec<Correspondence>) -> Self {
        Self {
            correspondences,
            keypoints1: self.keypoints1,
            keypoints2: self.keypoints2,
        }
    }
}

fn uniform_dim(kps: &[Keypoint], which: &str) -> Result<usize> {
    let dim = kps.first().map_or(0, |k| k.descriptor.dim());
    for (i, k) in kps.iter().enumerate() {
        if k.descriptor.dim() != dim {
            return Err(Error::InvalidInput(format!(
                "{which} keypoint {i} has descriptor dimension {}, expected {dim}",
                k.descriptor.dim()
            )));
        }
        if k.descriptor.0.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("{which} keypoint {i} has a non-finite descriptor")));
        }
    }
    Ok(dim)
}

/// Exact nearest-neighbour matching from image 1 into image 2.
///
/// Every keypoint of image 1 is matched to its nearest neighbour in image 2
/// with `nn_ratio = d1 / d2`, the ratio of the two smallest Euclidean
/// distances. Ties go to the lower index.
pub fn match_nearest_neighbor(k1: &[Keypoint], k2: &[Keypoint]) -> Result<MatchSet> {
    if k1.is_empty() {
        return Err(Error::InvalidInput("no keypoints in image 1".into()));
    }
    if k2.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: k2.len(),
        });
    }
    let d1 = uniform_dim(k1, "image 1")?;
    let d2 = uniform_dim(k2, "image 2")?;
    if d1 == 0 {
        return Err(Error::InvalidInput("descriptors are empty".into()));
    }
    if d1 != d2 {
        return Err(Error::InvalidInput(format!("descriptor dimensions differ: {d1} vs {d2}")));
    }
    let train: Vec<f32> = k2.iter().flat_map(|k| k.descriptor.0.iter().copied()).collect();
    let dim = d1;
    let correspondences = k1
        .par_iter()
        .map(|q| {
            let (best, ratio) = two_nearest(&q.descriptor.0, &train, dim);
            Correspondence::new(q.location, k2[best].location).with_ratio(ratio)
        })
        .collect();
    Ok(MatchSet {
        correspondences,
        keypoints1: k1.len(),
        keypoints2: k2.len(),
    })
}

fn two_nearest(q: &[f32], train: &[f32], dim: usize) -> (usize, f64) {
    let (mut b1, mut b2) = (f64::INFINITY, f64::INFINITY);
    let mut best = 0;
    for (j, row) in train.chunks_exact(dim).enumerate() {
        let d = sq_dist(q, row);
        if d < b1 {
            b2 = b1;
            b1 = d;
            best = j;
        } else if d < b2 {
            b2 = d;
        }
    }
    let ratio = if b2 > 0.0 { (b1 / b2).sqrt() } else { 1.0 };
    (best, ratio)
}

/// Keeps correspondences with `nn_ratio < threshold`, in order.
pub fn ratio_test(ms: &MatchSet, threshold: f64) -> Result<MatchSet> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidInput(format!("ratio threshold {threshold} outside (0, 1]")));
    }
    let mut kept = Vec::with_capacity(ms.len());
    for (i, c) in ms.correspondences.iter().enumerate() {
        let r = c
            .nn_ratio
            .ok_or_else(|| Error::InvalidInput(format!("correspondence {i} has no nn_ratio")))?;
        if r < threshold {
            kept.push(*c);
        }
    }
    Ok(ms.with(kept))
}

/// A correspondence filter. It must return a sub-multiset of its input.
pub trait Pruner {
    fn prune(&self, ms: &MatchSet) -> MatchSet;
}

impl<F: Fn(&MatchSet) -> MatchSet> Pruner for F {
    fn prune(&self, ms: &MatchSet) -> MatchSet {
        self(ms)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPruner;

impl Pruner for IdentityPruner {
    fn prune(&self, ms: &MatchSet) -> MatchSet {
        ms.clone()
    }
}

/// Keeps exactly the ground-truth inliers under the per-image `alpha * diagonal`
/// rule used by the inlier-rate metric.
#[derive(Debug, Clone, Copy)]
pub struct OraclePruner {
    pub f_gt: FundamentalMatrix,
    pub dims1: ImageDims,
    pub dims2: ImageDims,
    pub alpha: f64,
}

impl Pruner for OraclePruner {
    fn prune(&self, ms: &MatchSet) -> MatchSet {
        let flags = metrics::inlier_flags(&ms.correspondences, &self.f_gt, self.dims1, self.dims2, self.alpha);
        let kept = ms
            .correspondences
            .iter()
            .zip(flags)
            .filter(|(_, f)| *f)
            .map(|(c, _)| *c)
            .collect();
        ms.with(kept)
    }
}

/// Correspondence counts around a pruning step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PruneStats {
    pub before: usize,
    pub after: usize,
}

type Key = [u64; 5];

fn key(c: &Correspondence) -> Key {
    [
        c.p1.u.to_bits(),
        c.p1.v.to_bits(),
        c.p2.u.to_bits(),
        c.p2.v.to_bits(),
        c.nn_ratio.map_or(u64::MAX, f64::to_bits),
    ]
}

/// Runs a pruner and checks that its output is a sub-multiset of the input.
pub fn apply_pruner(ms: &MatchSet, pruner: &dyn Pruner) -> Result<(MatchSet, PruneStats)> {
    let out = pruner.prune(ms);
    let mut avail: HashMap<Key, usize> = HashMap::with_capacity(ms.len());
    for c in &ms.correspondences {
        *avail.entry(key(c)).or_default() += 1;
    }
    for (i, c) in out.correspondences.iter().enumerate() {
        match avail.get_mut(&key(c)) {
            Some(n) if *n > 0 => *n -= 1,
            _ => {
                return Err(Error::ContractViolation(format!(
                    "pruned correspondence {i} is not part of the input"
                )))
            }
        }
    }
    let stats = PruneStats {
        before: ms.len(),
        after: out.len(),
    };
    Ok((ms.with(out.correspondences), stats))
}
