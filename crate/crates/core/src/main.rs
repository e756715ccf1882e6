use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fmbench::harness::dataset::{write_synthetic_dataset, SynthDatasetConfig};
use fmbench::harness::formats::{load_correspondences, load_fundamental, load_kitti_poses, load_tum_trajectory};
use fmbench::harness::pairs::{select_pairs, PairSelectionConfig, SelectionMode};
use fmbench::harness::pipeline::run_benchmark;
use fmbench::harness::PipelineConfig;
use fmbench::synth::Rig;
use fmbench::{compute_sgd, nsgd, CameraIntrinsics, ImageDims, Result, SgdConfig};

#[derive(Parser)]
#[command(name = "fmbench", version, about = "Fundamental-matrix estimation benchmark")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum PoseFormat {
    Tum,
    Kitti,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset with exact ground truth.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        pairs: usize,
        #[arg(long, default_value_t = 150)]
        points: usize,
        #[arg(long, default_value_t = 0.5)]
        noise: f64,
        #[arg(long, default_value_t = 0.4)]
        outliers: f64,
    },
    /// Choose matchable frame pairs from a pose file and per-pair matches.
    SelectPairs {
        #[arg(long)]
        poses: PathBuf,
        #[arg(long, value_enum, default_value_t = PoseFormat::Tum)]
        format: PoseFormat,
        /// Directory holding `<a>_<b>.txt` correspondence files.
        #[arg(long)]
        matches: PathBuf,
        #[arg(long, default_value_t = 480)]
        height: u32,
        #[arg(long, default_value_t = 640)]
        width: u32,
        /// Intrinsics as "fx,fy,cx,cy"; defaults to the synthetic camera.
        #[arg(long)]
        intrinsics: Option<String>,
        #[arg(long)]
        wide: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        sample_count: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the benchmark described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Restrict to these methods (repeatable).
        #[arg(long)]
        estimator: Vec<String>,
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Symmetric geometry distance between two F matrix files.
    Sgd {
        f1: PathBuf,
        f2: PathBuf,
        #[arg(long, default_value_t = 480)]
        height: u32,
        #[arg(long, default_value_t = 640)]
        width: u32,
        #[arg(long, default_value_t = fmbench::metrics::DEFAULT_SGD_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_intrinsics(s: &str) -> Result<CameraIntrinsics> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| fmbench::Error::Config(format!("intrinsics '{s}': {e}")))?;
    if v.len() != 4 {
        return Err(fmbench::Error::Config(format!("intrinsics '{s}' needs 4 values")));
    }
    CameraIntrinsics::new(v[0], v[1], v[2], v[3], 0.0)
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Synth {
            out,
            seed,
            pairs,
            points,
            noise,
            outliers,
        } => {
            let cfg = SynthDatasetConfig {
                pairs,
                n_points: points,
                noise_sigma: noise,
                outlier_rate: outliers,
                rigs: vec![Rig::Random, Rig::ShortBaselineForward, Rig::WideBaseline],
                seed,
                ..Default::default()
            };
            let path = write_synthetic_dataset(&out, &cfg)?;
            println!("{}", path.display());
        }
        Cmd::SelectPairs {
            poses,
            format,
            matches,
            height,
            width,
            intrinsics,
            wide,
            seed,
            sample_count,
            out,
        } => {
            let records = match format {
                PoseFormat::Tum => load_tum_trajectory(&poses)?,
                PoseFormat::Kitti => load_kitti_poses(&poses)?,
            };
            let k = match intrinsics {
                Some(s) => parse_intrinsics(&s)?,
                None => CameraIntrinsics::for_image(ImageDims::new(height, width)?),
            };
            let provider = |a: usize, b: usize| {
                let p = matches.join(format!("{a}_{b}.txt"));
                if !p.exists() {
                    return None;
                }
                match load_correspondences(&p, None) {
                    Ok(ms) => Some(ms.correspondences),
                    Err(e) => {
                        log::warn!("{e}");
                        None
                    }
                }
            };
            let cfg = PairSelectionConfig {
                mode: if wide {
                    SelectionMode::WideBaseline
                } else {
                    SelectionMode::ShortBaseline
                },
                sample_count,
                seed,
                ..Default::default()
            };
            let text: String = select_pairs(&records, &k, &provider, &cfg)
                .into_iter()
                .map(|(a, b)| format!("{a} {b}\n"))
                .collect();
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
        }
        Cmd::Run {
            config,
            seed,
            out,
            estimator,
            ratio,
        } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output = o;
            }
            if !estimator.is_empty() {
                cfg.estimators = estimator;
            }
            if let Some(r) = ratio {
                cfg.ratio = r;
            }
            let report = run_benchmark(&cfg)?;
            print!("{}", fmbench::harness::pipeline::summary_csv(&report));
        }
        Cmd::Sgd {
            f1,
            f2,
            height,
            width,
            samples,
            seed,
        } => {
            let dims = ImageDims::new(height, width)?;
            let a = load_fundamental(&f1)?;
            let b = load_fundamental(&f2)?;
            let cfg = SgdConfig::new(dims, dims).with_samples(samples).with_seed(seed);
            let s = compute_sgd(&a, &b, &cfg)?;
            println!("sgd {s}");
            println!("nsgd {}", nsgd(s, dims, dims));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
