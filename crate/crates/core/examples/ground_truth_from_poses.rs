//! Ground-truth F from two camera poses, and the matches it accepts.

use fmbench::harness::formats::{parse_tum_trajectory, PoseRecord};
use fmbench::harness::pose_fundamental;
use fmbench::{project, CameraIntrinsics, Correspondence, ImageDims, ProjectionMatrix};
use std::path::Path;

const TRAJECTORY: &str = "\
# timestamp tx ty tz qx qy qz qw
1305031102.175304 0.0 0.0 0.0 0.0 0.0 0.0 1.0
1305031102.711508 0.30 0.02 0.05 0.0 0.0499792 0.0 0.9987503
";

fn camera(k: &CameraIntrinsics, p: &PoseRecord) -> fmbench::Result<ProjectionMatrix> {
    let (r, t) = p.world_to_camera();
    ProjectionMatrix::from_krt(k, &r, &t)
}

fn main() -> fmbench::Result<()> {
    let poses = parse_tum_trajectory(Path::new("inline"), TRAJECTORY)?;
    let k = CameraIntrinsics::new(525.0, 525.0, 319.5, 239.5, 0.0)?;
    let dims = ImageDims::new(480, 640)?;
    let f = pose_fundamental(&k, &poses[0], &poses[1])?;
    println!("F =");
    for row in f.matrix() {
        println!("  {:>13.6e} {:>13.6e} {:>13.6e}", row[0], row[1], row[2]);
    }

    let (p0, p1) = (camera(&k, &poses[0])?, camera(&k, &poses[1])?);
    let mut accepted = 0;
    for i in 0..50 {
        let x = [-1.0 + 0.04 * i as f64, 0.5 - 0.02 * i as f64, 3.0 + 0.05 * i as f64];
        let mut c = Correspondence::new(project(&p0, x)?, project(&p1, x)?);
        if i % 5 == 0 {
            c.p2.v += 8.0;
        }
        if dims.contains(c.p1) && dims.contains(c.p2) && f.residual(&c) <= 1.0 {
            accepted += 1;
        }
    }
    println!("{accepted}/50 matches within 1 px of the epipolar lines");
    Ok(())
}
