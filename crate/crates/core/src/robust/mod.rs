//! Robust fundamental matrix estimation: RANSAC, MSAC, LMedS and the
//! coarse-to-fine two-stage estimator.

mod coarse;
mod sampling;

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Correspondence, FundamentalMatrix};
use crate::seed;
use crate::solvers::{solve_eight_point, SolverKind};

pub use coarse::{estimate_coarse_to_fine, CoarseStageDiagnostics};
pub use sampling::adaptive_iterations;
use sampling::Sampler;

pub const DEFAULT_MAX_ITERATIONS: usize = 2000;
pub const DEFAULT_CONFIDENCE: f64 = 0.99;
pub const DEFAULT_INLIER_THRESHOLD: f64 = 1.0;
/// LMedS inliers lie within this many robust standard deviations.
pub const LMEDS_CUTOFF_SIGMAS: f64 = 2.5;
/// Floor on the LMedS inlier cutoff, in pixels. Residuals below it are
/// rounding noise of an exact fit.
pub const LMEDS_MIN_CUTOFF: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Ransac,
    Msac,
    LMedS,
    CoarseToFine,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Ransac,
        EstimatorKind::Msac,
        EstimatorKind::LMedS,
        EstimatorKind::CoarseToFine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Ransac => "RANSAC",
            EstimatorKind::Msac => "MSAC",
            EstimatorKind::LMedS => "LMedS",
            EstimatorKind::CoarseToFine => "CF-RSC",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ransac" => Ok(EstimatorKind::Ransac),
            "msac" => Ok(EstimatorKind::Msac),
            "lmeds" => Ok(EstimatorKind::LMedS),
            "cf-rsc" | "cfrsc" | "coarse-to-fine" | "coarsetofine" => Ok(EstimatorKind::CoarseToFine),
            other => Err(Error::InvalidInput(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub max_iterations: usize,
    pub confidence: f64,
    /// Pixels, applied to the symmetric epipolar distance.
    pub inlier_threshold: f64,
    pub seed: u64,
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            confidence: DEFAULT_CONFIDENCE,
            inlier_threshold: DEFAULT_INLIER_THRESHOLD,
            seed: 0,
        }
    }

    pub fn with_threshold(mut self, px: f64) -> Self {
        self.inlier_threshold = px;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be at least 1".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidInput(format!("confidence {} outside (0, 1)", self.confidence)));
        }
        if !(self.inlier_threshold > 0.0 && self.inlier_threshold.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "inlier threshold {} must be positive",
                self.inlier_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub f: FundamentalMatrix,
    pub inlier_mask: Vec<bool>,
    pub iterations_used: usize,
    /// Inlier count for RANSAC, truncated quadratic cost for MSAC, median
    /// squared residual for LMedS and the coarse-to-fine estimator.
    pub score: f64,
    /// Residual bound defining `inlier_mask` under `f`.
    pub inlier_cutoff: f64,
    pub stage_diagnostics: Option<CoarseStageDiagnostics>,
}

impl EstimationResult {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }

    pub fn inliers<'a>(&'a self, corrs: &'a [Correspondence]) -> impl Iterator<Item = &'a Correspondence> + 'a {
        corrs.iter().zip(&self.inlier_mask).filter(|(_, &m)| m).map(|(c, _)| c)
    }
}

/// Truncated quadratic MSAC cost `sum min(r^2, t^2)`.
///
/// ```
/// assert_eq!(fmbench::robust::msac_cost(&[0.5, 1.0, 3.0], 2.0), 5.25);
/// ```
pub fn msac_cost(residuals: &[f64], threshold: f64) -> f64 {
    let t2 = threshold * threshold;
    residuals.iter().map(|r| (r * r).min(t2)).sum()
}

/// Number of residuals within `threshold`.
pub fn ransac_count(residuals: &[f64], threshold: f64) -> usize {
    residuals.iter().filter(|&&r| r <= threshold).count()
}

/// Median of squared residuals (mean of the two middle values for even counts).
///
/// ```
/// assert_eq!(fmbench::robust::lmeds_cost(&[1.0, 2.0, 3.0, 4.0, 100.0]), 9.0);
/// ```
pub fn lmeds_cost(residuals: &[f64]) -> f64 {
    let mut sq: Vec<f64> = residuals.iter().map(|r| r * r).collect();
    median_in_place(&mut sq)
}

/// Robust standard deviation from a median squared residual over `n` points.
pub fn lmeds_sigma(median_sq: f64, n: usize) -> f64 {
    let dof = n.saturating_sub(8).max(1) as f64;
    1.4826 * (1.0 + 5.0 / dof) * median_sq.sqrt()
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    let mid = n / 2;
    let (lo, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let lower = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// LMedS inlier cutoff `2.5 sigma`, floored at [`LMEDS_MIN_CUTOFF`].
pub fn lmeds_cutoff(median_sq: f64, n: usize) -> f64 {
    (LMEDS_CUTOFF_SIGMAS * lmeds_sigma(median_sq, n)).max(LMEDS_MIN_CUTOFF)
}

/// Reorders correspondences by ascending `nn_ratio`; those without a ratio go
/// last, keeping their relative order.
pub fn sort_by_ratio(corrs: &[Correspondence]) -> Vec<Correspondence> {
    ratio_order(corrs).into_iter().map(|i| corrs[i]).collect()
}

pub(crate) fn ratio_order(corrs: &[Correspondence]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..corrs.len()).collect();
    idx.sort_by(|&a, &b| match (corrs[a].nn_ratio, corrs[b].nn_ratio) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    idx
}

/// Scoring rule of a sample-consensus loop; lower cost is better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Loss {
    Count(f64),
    Truncated(f64),
    /// The threshold only feeds the termination bound.
    Median(f64),
}

/// A scored hypothesis.
#[derive(Debug, Clone)]
pub(crate) struct Hypothesis {
    pub f: FundamentalMatrix,
    pub cost: f64,
    pub inliers: usize,
    /// Correspondences within the configured threshold; drives termination.
    pub support: usize,
    pub cutoff: f64,
}

pub(crate) struct Scorer<'a> {
    corrs: &'a [Correspondence],
    loss: Loss,
    buf: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Scorer<'a> {
    pub fn new(corrs: &'a [Correspondence], loss: Loss) -> Self {
        Self {
            corrs,
            loss,
            buf: Vec::with_capacity(corrs.len()),
            scratch: Vec::with_capacity(corrs.len()),
        }
    }

    pub fn score(&mut self, f: FundamentalMatrix) -> Hypothesis {
        self.buf.clear();
        self.buf.extend(self.corrs.iter().map(|c| f.residual(c)));
        let (cost, cutoff) = match self.loss {
            Loss::Count(t) => (-(ransac_count(&self.buf, t) as f64), t),
            Loss::Truncated(t) => (msac_cost(&self.buf, t), t),
            Loss::Median(_) => {
                self.scratch.clear();
                self.scratch.extend(self.buf.iter().map(|r| r * r));
                let med = median_in_place(&mut self.scratch);
                (med, lmeds_cutoff(med, self.buf.len()))
            }
        };
        let inliers = ransac_count(&self.buf, cutoff);
        let support = match self.loss {
            Loss::Median(t) => ransac_count(&self.buf, t),
            _ => inliers,
        };
        Hypothesis {
            f,
            cost,
            inliers,
            support,
            cutoff,
        }
    }

    pub fn mask(&self, h: &Hypothesis) -> Vec<bool> {
        self.corrs.iter().map(|c| h.f.residual(c) <= h.cutoff).collect()
    }

    pub fn inlier_set(&self, h: &Hypothesis) -> Vec<Correspondence> {
        self.corrs
            .iter()
            .copied()
            .filter(|c| h.f.residual(c) <= h.cutoff)
            .collect()
    }

    /// Least-squares 8-point refit on the inliers of `h`, kept only when it
    /// does not score worse.
    pub fn refit(&mut self, h: Hypothesis) -> (Hypothesis, bool) {
        if h.inliers < 8 {
            return (h, false);
        }
        let support = self.inlier_set(&h);
        match solve_eight_point(&support) {
            Ok(f) => {
                let r = self.score(f);
                if r.cost <= h.cost {
                    (r, true)
                } else {
                    (h, false)
                }
            }
            Err(_) => (h, false),
        }
    }
}

pub(crate) struct LoopSettings {
    pub solver: SolverKind,
    pub max_iterations: usize,
    pub confidence: f64,
    pub local_rounds: usize,
}

/// Generic hypothesise-and-verify loop. Returns the best hypothesis (if any
/// sample produced a model) and the number of samples drawn.
pub(crate) fn consensus(
    scorer: &mut Scorer<'_>,
    sampler: &mut Sampler,
    rng: &mut ChaCha8Rng,
    settings: &LoopSettings,
) -> (Option<Hypothesis>, usize) {
    let n = scorer.corrs.len();
    let m = settings.solver.sample_size();
    let mut best: Option<Hypothesis> = None;
    let mut needed = settings.max_iterations;
    let mut iterations = 0;
    let mut idx = Vec::with_capacity(m);
    let mut sample = Vec::with_capacity(m);
    while iterations < needed {
        iterations += 1;
        sampler.draw(rng, m, &mut idx);
        sample.clear();
        sample.extend(idx.iter().map(|&i| scorer.corrs[i]));
        let Ok(models) = settings.solver.solve(&sample) else {
            continue;
        };
        let mut round_best: Option<Hypothesis> = None;
        for f in models {
            let h = scorer.score(f);
            if round_best.as_ref().is_none_or(|b| h.cost < b.cost) {
                round_best = Some(h);
            }
        }
        let Some(mut h) = round_best else { continue };
        if best.as_ref().is_some_and(|b| h.cost >= b.cost) {
            continue;
        }
        for _ in 0..settings.local_rounds {
            let (next, improved) = scorer.refit(h.clone());
            let strictly = improved && next.cost < h.cost;
            h = next;
            if !strictly {
                break;
            }
        }
        needed = adaptive_iterations(settings.confidence, h.support as f64 / n as f64, m, settings.max_iterations);
        best = Some(h);
    }
    (best, iterations)
}

fn check_input(corrs: &[Correspondence], cfg: &EstimatorConfig) -> Result<()> {
    cfg.validate()?;
    if corrs.len() < 8 {
        return Err(Error::InsufficientData {
            needed: 8,
            got: corrs.len(),
        });
    }
    for c in corrs {
        c.validate()?;
    }
    Ok(())
}

fn run_single_stage(corrs: &[Correspondence], cfg: &EstimatorConfig, loss: Loss) -> Result<EstimationResult> {
    check_input(corrs, cfg)?;
    let mut scorer = Scorer::new(corrs, loss);
    let mut sampler = Sampler::Uniform { n: corrs.len() };
    let mut rng = seed::rng(cfg.seed);
    let settings = LoopSettings {
        solver: SolverKind::EightPoint,
        max_iterations: cfg.max_iterations,
        confidence: cfg.confidence,
        local_rounds: 0,
    };
    let (best, iterations) = consensus(&mut scorer, &mut sampler, &mut rng, &settings);
    let best = best.ok_or_else(|| Error::EstimationFailed("every sample was degenerate".into()))?;
    if best.inliers < 8 {
        return Err(Error::EstimationFailed(format!(
            "best model has {} inliers, need at least 8",
            best.inliers
        )));
    }
    let (h, _) = scorer.refit(best);
    let inlier_mask = scorer.mask(&h);
    let score = match loss {
        Loss::Count(_) => h.inliers as f64,
        _ => h.cost,
    };
    Ok(EstimationResult {
        f: h.f,
        inlier_mask,
        iterations_used: iterations,
        score,
        inlier_cutoff: h.cutoff,
        stage_diagnostics: None,
    })
}

/// RANSAC with the 8-point solver: maximises the number of correspondences
/// within `inlier_threshold`.
pub fn estimate_ransac(corrs: &[Correspondence], cfg: &EstimatorConfig) -> Result<EstimationResult> {
    run_single_stage(corrs, cfg, Loss::Count(cfg.inlier_threshold))
}

/// MSAC: minimises the truncated quadratic loss.
pub fn estimate_msac(corrs: &[Correspondence], cfg: &EstimatorConfig) -> Result<EstimationResult> {
    run_single_stage(corrs, cfg, Loss::Truncated(cfg.inlier_threshold))
}

/// Least median of squares. Models are scored by the median squared residual
/// and the inlier mask comes from the robust scale estimate;
/// `inlier_threshold` only sets the adaptive termination bound.
pub fn estimate_lmeds(corrs: &[Correspondence], cfg: &EstimatorConfig) -> Result<EstimationResult> {
    run_single_stage(corrs, cfg, Loss::Median(cfg.inlier_threshold))
}

pub fn estimate(corrs: &[Correspondence], cfg: &EstimatorConfig) -> Result<EstimationResult> {
    match cfg.kind {
        EstimatorKind::Ransac => estimate_ransac(corrs, cfg),
        EstimatorKind::Msac => estimate_msac(corrs, cfg),
        EstimatorKind::LMedS => estimate_lmeds(corrs, cfg),
        EstimatorKind::CoarseToFine => estimate_coarse_to_fine(corrs, cfg),
    }
}
