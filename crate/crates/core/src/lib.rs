//! Two-view image matching and fundamental-matrix estimation toolkit.
//!
//! The crate covers the whole evaluation loop for uncalibrated two-view
//! geometry:
//!
//! * [`numeric`]: small dense kernels (Jacobi SVD, null vectors,
//!   pseudo-inverse, cubic roots, Hartley normalisation).
//! * [`geometry`]: points, correspondences, canonical fundamental matrices,
//!   epipolar lines and ground-truth F from projection matrices.
//! * [`solvers`]: normalised 8-point and 7-point minimal solvers.
//! * [`robust`]: RANSAC, MSAC, LMedS and the two-stage coarse-to-fine
//!   estimator.
//! * [`matching`]: exact nearest-neighbour descriptor matching, Lowe's ratio
//!   test and a pluggable pruner hook.
//! * [`metrics`]: symmetric geometry distance (SGD), its normalised form,
//!   %Recall and inlier rates.
//! * [`synth`]: synthetic two-view scenes with exact ground truth.
//! * [`harness`]: file formats, matchable pair selection and the benchmark
//!   runner behind the `fmbench` binary.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod matching;
pub mod metrics;
pub mod numeric;
pub mod robust;
pub(crate) mod seed;
pub mod solvers;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{
    canonicalize, epipolar_line, fm_from_projections, point_line_distance, project,
    symmetric_epipolar_distance, CameraIntrinsics, Correspondence, Direction, FundamentalMatrix,
    ImageDims, Line, Point2, ProjectionMatrix,
};
pub use matching::{apply_pruner, match_nearest_neighbor, ratio_test, Descriptor, Keypoint, MatchSet};
pub use metrics::{compute_sgd, inlier_rate, nsgd, pair_report, recall, MetricReport, SgdConfig};
pub use robust::{
    estimate, estimate_coarse_to_fine, estimate_lmeds, estimate_msac, estimate_ransac,
    sort_by_ratio, EstimationResult, EstimatorConfig, EstimatorKind,
};
pub use solvers::{solve_eight_point, solve_seven_point, SolverKind};
