use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::{Method, PipelineConfig, PrunerChoice};
use crate::harness::dataset::{load_dataset, Dataset, MatchSource, PairInput};
use crate::matching::{apply_pruner, match_nearest_neighbor, ratio_test, IdentityPruner, MatchSet, OraclePruner};
use crate::metrics::{inlier_flags, pair_report, recall, MetricReport, SgdConfig};
use crate::robust::estimate;
use crate::seed;

pub const SUMMARY_HEADER: &str =
    "dataset,method,pairs,recall,inlier,inlier_m,corrs,corrs_m,nsgd_mean,nsgd_median,failures";
pub const PAIRS_HEADER: &str = "pair_id,method,status,nsgd,inlier,inlier_m,corrs,corrs_m,iterations";

/// Outcome of one method on one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub pair_id: String,
    pub method: Method,
    /// `Err` holds the failure message.
    pub outcome: std::result::Result<PairSuccess, String>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSuccess {
    pub report: MetricReport,
    pub iterations: usize,
}

impl PairRecord {
    /// NSGD entering %Recall; a failed estimate counts as 1.
    pub fn nsgd(&self) -> f64 {
        self.outcome.as_ref().map_or(1.0, |s| s.report.nsgd)
    }
}

/// One aggregate row per dataset and method.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub method: Method,
    pub pairs: usize,
    pub recall: f64,
    /// Means over successful pairs; NaN when every pair failed.
    pub inlier: f64,
    pub inlier_m: f64,
    pub corrs: f64,
    pub corrs_m: f64,
    pub nsgd_mean: f64,
    pub nsgd_median: f64,
    pub failures: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub records: Vec<PairRecord>,
    pub summary: Vec<SummaryRow>,
}

fn prepare_matches(pair: &PairInput, cfg: &PipelineConfig) -> Result<MatchSet> {
    let ms = match &pair.source {
        MatchSource::Matches(ms) => ms.clone(),
        MatchSource::Keypoints(k1, k2) => match_nearest_neighbor(k1, k2)?,
    };
    let with_ratio = ms.correspondences.iter().filter(|c| c.nn_ratio.is_some()).count();
    let ms = if with_ratio == 0 {
        ms
    } else if with_ratio == ms.len() {
        ratio_test(&ms, cfg.ratio)?
    } else {
        return Err(Error::InvalidInput(format!(
            "{with_ratio} of {} matches carry a ratio; expected all or none",
            ms.len()
        )));
    };
    let (ms, _) = match cfg.pruner {
        PrunerChoice::None => apply_pruner(&ms, &IdentityPruner)?,
        PrunerChoice::Oracle => apply_pruner(
            &ms,
            &OraclePruner {
                f_gt: pair.f_gt,
                dims1: pair.dims1,
                dims2: pair.dims2,
                alpha: cfg.alpha,
            },
        )?,
    };
    Ok(ms)
}

fn run_method(pair: &PairInput, ms: &MatchSet, method: Method, pair_seed: u64, cfg: &PipelineConfig) -> Result<PairSuccess> {
    let corrs = &ms.correspondences;
    let (f_est, mask, iterations) = match method {
        Method::Estimator(kind) => {
            let ecfg = cfg.estimator_config(kind, seed::derive_str(pair_seed, kind.name()));
            let res = estimate(corrs, &ecfg)?;
            (res.f, res.inlier_mask, res.iterations_used)
        }
        Method::Oracle => (pair.f_gt, inlier_flags(corrs, &pair.f_gt, pair.dims1, pair.dims2, cfg.alpha), 0),
    };
    let kept = corrs.iter().zip(&mask).filter(|(_, &m)| m).map(|(c, _)| *c).collect();
    let post = MatchSet {
        correspondences: kept,
        keypoints1: ms.keypoints1,
        keypoints2: ms.keypoints2,
    };
    let sgd = SgdConfig::new(pair.dims1, pair.dims2)
        .with_samples(cfg.sgd_samples)
        .with_seed(seed::derive_str(pair_seed, "sgd"));
    let report = pair_report(ms, &post, &f_est, &pair.f_gt, &sgd, cfg.alpha)?;
    Ok(PairSuccess { report, iterations })
}

fn run_pair(pair: &PairInput, methods: &[Method], cfg: &PipelineConfig) -> Vec<PairRecord> {
    let pair_seed = seed::derive_str(cfg.seed, &pair.id);
    let start = Instant::now();
    let prepared = prepare_matches(pair, cfg);
    let prep_time = start.elapsed();
    methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let outcome = match &prepared {
                Ok(ms) => run_method(pair, ms, method, pair_seed, cfg),
                Err(e) => Err(Error::InvalidInput(e.to_string())),
            };
            if let Err(e) = &outcome {
                log::warn!("pair {} / {}: {e}", pair.id, method.name());
            }
            PairRecord {
                pair_id: pair.id.clone(),
                method,
                outcome: outcome.map_err(|e| e.to_string()),
                elapsed: prep_time + start.elapsed(),
            }
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => s[n / 2],
        _ => 0.5 * (s[n / 2 - 1] + s[n / 2]),
    }
}

fn summarise(dataset: &str, method: Method, records: &[&PairRecord], recall_threshold: f64) -> Result<SummaryRow> {
    let nsgds: Vec<f64> = records.iter().map(|r| r.nsgd()).collect();
    let ok: Vec<&PairSuccess> = records.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let collect = |f: fn(&MetricReport) -> f64| ok.iter().map(|s| f(&s.report)).collect::<Vec<_>>();
    Ok(SummaryRow {
        dataset: dataset.to_string(),
        method,
        pairs: records.len(),
        recall: recall(&nsgds, recall_threshold)?,
        inlier: mean(&collect(|r| r.inlier_rate_post)),
        inlier_m: mean(&collect(|r| r.inlier_rate_pre)),
        corrs: mean(&collect(|r| r.corrs_post as f64)),
        corrs_m: mean(&collect(|r| r.corrs_pre as f64)),
        nsgd_mean: mean(&nsgds),
        nsgd_median: median(&nsgds),
        failures: records.len() - ok.len(),
        wall_time: records.iter().map(|r| r.elapsed).sum(),
    })
}

/// Runs every configured method on every pair of `dataset`.
pub fn run_pipeline(dataset: &Dataset, cfg: &PipelineConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let methods = cfg.methods()?;
    if dataset.pairs.is_empty() {
        return Err(Error::InvalidInput(format!("dataset '{}' has no pairs", dataset.name)));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.thread_count()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let nested: Vec<Vec<PairRecord>> =
        pool.install(|| dataset.pairs.par_iter().map(|p| run_pair(p, &methods, cfg)).collect());
    let mut records: Vec<PairRecord> = nested.into_iter().flatten().collect();
    let rank = |m: Method| methods.iter().position(|&x| x == m).unwrap_or(usize::MAX);
    records.sort_by(|a, b| a.pair_id.cmp(&b.pair_id).then(rank(a.method).cmp(&rank(b.method))));
    let summary = methods
        .iter()
        .map(|&m| {
            let rows: Vec<&PairRecord> = records.iter().filter(|r| r.method == m).collect();
            summarise(&dataset.name, m, &rows, cfg.recall_threshold)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkReport { records, summary })
}

fn pct(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.2}")
    }
}

pub fn summary_csv(report: &BenchmarkReport) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in &report.summary {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{:.6},{:.6},{}",
            r.dataset,
            r.method.name(),
            r.pairs,
            pct(r.recall),
            pct(r.inlier),
            pct(r.inlier_m),
            pct(r.corrs),
            pct(r.corrs_m),
            r.nsgd_mean,
            r.nsgd_median,
            r.failures
        );
    }
    s
}

/// Long-format rows; `nsgd` is written at full precision so recall curves
/// can be recomputed exactly.
pub fn pairs_csv(report: &BenchmarkReport) -> String {
    let mut s = format!("{PAIRS_HEADER}\n");
    for r in &report.records {
        match &r.outcome {
            Ok(ok) => {
                let m = &ok.report;
                let _ = writeln!(
                    s,
                    "{},{},ok,{},{:.2},{:.2},{},{},{}",
                    r.pair_id,
                    r.method.name(),
                    m.nsgd,
                    m.inlier_rate_post,
                    m.inlier_rate_pre,
                    m.corrs_post,
                    m.corrs_pre,
                    ok.iterations
                );
            }
            Err(_) => {
                let _ = writeln!(s, "{},{},failed,1,,,,,", r.pair_id, r.method.name());
            }
        }
    }
    s
}

/// Wall-clock timings; kept apart from the deterministic reports.
pub fn timing_csv(report: &BenchmarkReport) -> String {
    let mut s = String::from("scope,method,seconds\n");
    for r in &report.summary {
        let _ = writeln!(s, "total,{},{:.6}", r.method.name(), r.wall_time.as_secs_f64());
    }
    for r in &report.records {
        let _ = writeln!(s, "{},{},{:.6}", r.pair_id, r.method.name(), r.elapsed.as_secs_f64());
    }
    s
}

/// Writes `summary.csv`, `pairs.csv` and `timing.csv` into `dir`.
pub fn write_report(report: &BenchmarkReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.csv"), summary_csv(report))?;
    fs::write(dir.join("pairs.csv"), pairs_csv(report))?;
    fs::write(dir.join("timing.csv"), timing_csv(report))?;
    Ok(())
}

/// Loads the configured dataset, runs it and writes the CSV reports to
/// `cfg.output`.
pub fn run_benchmark(cfg: &PipelineConfig) -> Result<BenchmarkReport> {
    if !cfg.dataset.exists() {
        return Err(Error::Config(format!("dataset {} does not exist", cfg.dataset.display())));
    }
    let dataset = load_dataset(&cfg.dataset)?;
    let report = run_pipeline(&dataset, cfg)?;
    write_report(&report, &cfg.output)?;
    Ok(report)
}
