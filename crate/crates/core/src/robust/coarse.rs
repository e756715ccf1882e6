use crate::error::{Error, Result};
use crate::geometry::Correspondence;
use crate::seed;
use crate::solvers::SolverKind;

use super::sampling::{Prosac, Sampler};
use super::{check_input, consensus, estimate_lmeds, ratio_order, EstimationResult, EstimatorConfig, LoopSettings, Loss, Scorer};

/// Local-optimisation refits after each new best coarse sample.
pub const LOCAL_OPTIMIZATION_ROUNDS: usize = 4;

/// Summary of the pruning stage of the coarse-to-fine estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseStageDiagnostics {
    pub input_count: usize,
    pub survivors: usize,
    /// `survivors / input_count`.
    pub survivor_rate: f64,
    pub iterations: usize,
    pub survivor_mask: Vec<bool>,
}

/// Two-stage estimator. The coarse stage is a locally optimised MSAC with
/// 7-point samples, drawn progressively in `nn_ratio` order when ratios are
/// available. Its inliers are handed to LMedS for the final fit.
///
/// `iterations_used` counts fine-stage samples; the coarse count is in the
/// diagnostics.
pub fn estimate_coarse_to_fine(corrs: &[Correspondence], cfg: &EstimatorConfig) -> Result<EstimationResult> {
    check_input(corrs, cfg)?;
    let n = corrs.len();
    let mut scorer = Scorer::new(corrs, Loss::Truncated(cfg.inlier_threshold));
    let mut sampler = if corrs.iter().any(|c| c.nn_ratio.is_some()) {
        Sampler::Prosac(Prosac::new(ratio_order(corrs), SolverKind::SevenPoint.sample_size()))
    } else {
        Sampler::Uniform { n }
    };
    let mut rng = seed::rng(cfg.seed);
    let settings = LoopSettings {
        solver: SolverKind::SevenPoint,
        max_iterations: cfg.max_iterations,
        confidence: cfg.confidence,
        local_rounds: LOCAL_OPTIMIZATION_ROUNDS,
    };
    let (best, iterations) = consensus(&mut scorer, &mut sampler, &mut rng, &settings);

    let survivor_mask = match &best {
        Some(h) => scorer.mask(h),
        None => vec![false; n],
    };
    let survivors: Vec<Correspondence> = corrs
        .iter()
        .zip(&survivor_mask)
        .filter(|(_, &m)| m)
        .map(|(c, _)| *c)
        .collect();
    let diagnostics = CoarseStageDiagnostics {
        input_count: n,
        survivors: survivors.len(),
        survivor_rate: survivors.len() as f64 / n as f64,
        iterations,
        survivor_mask,
    };
    if survivors.len() < 8 {
        return Err(Error::CoarseStageExhausted(Box::new(diagnostics)));
    }

    let fine_cfg = EstimatorConfig {
        seed: seed::derive(cfg.seed, &[2]),
        ..*cfg
    };
    let fine = estimate_lmeds(&survivors, &fine_cfg)?;
    let inlier_mask = corrs.iter().map(|c| fine.f.residual(c) <= fine.inlier_cutoff).collect();
    Ok(EstimationResult {
        inlier_mask,
        stage_diagnostics: Some(diagnostics),
        ..fine
    })
}
