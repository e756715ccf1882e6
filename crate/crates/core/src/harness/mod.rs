//! Dataset ingestion, matchable pair selection and the benchmark runner.

pub mod config;
pub mod dataset;
pub mod formats;
pub mod pairs;
pub mod pipeline;

pub use config::{Method, PipelineConfig, PrunerChoice, THREADS_ENV};
pub use dataset::{load_dataset, write_synthetic_dataset, Dataset, MatchSource, PairInput, SynthDatasetConfig};
pub use formats::{
    load_correspondences, load_descriptors, load_fundamental, load_keypoints, load_kitti_poses,
    load_tum_trajectory, PoseRecord, Rotation,
};
pub use pairs::{pose_fundamental, select_pairs, PairSelectionConfig, SelectionMode};
pub use pipeline::{run_benchmark, run_pipeline, BenchmarkReport, PairRecord, SummaryRow};
