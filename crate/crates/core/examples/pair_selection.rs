//! Pick matchable frame pairs from a trajectory.

use fmbench::harness::formats::{PoseRecord, Rotation};
use fmbench::harness::{pose_fundamental, select_pairs, PairSelectionConfig, SelectionMode};
use fmbench::synth::axis_angle;
use fmbench::{project, CameraIntrinsics, Correspondence, ImageDims, ProjectionMatrix};

fn main() -> fmbench::Result<()> {
    let k = CameraIntrinsics::for_image(ImageDims::new(480, 640)?);
    let poses: Vec<PoseRecord> = (0..12)
        .map(|i| PoseRecord {
            frame: i,
            timestamp: Some(0.25 * i as f64),
            rotation: Rotation::Matrix(axis_angle([0.0, 1.0, 0.0], 0.03 * i as f64)),
            translation: [0.1 * i as f64, 0.0, 0.05 * i as f64],
        })
        .collect();
    // Matches come from a fixed point cloud; nearby frames share more of it.
    let cloud: Vec<[f64; 3]> = (0..200)
        .map(|i| {
            let a = i as f64;
            [(a * 0.37).sin() * 3.0, (a * 0.71).cos() * 2.0, 6.0 + (a * 0.13).sin() * 2.0]
        })
        .collect();
    let camera = |p: &PoseRecord| {
        let (r, t) = p.world_to_camera();
        ProjectionMatrix::from_krt(&k, &r, &t).unwrap()
    };
    let dims = ImageDims::new(480, 640)?;
    let matches = |a: usize, b: usize| -> Option<Vec<Correspondence>> {
        let (pa, pb) = (camera(&poses[a]), camera(&poses[b]));
        let keep = 200usize.saturating_sub(35 * (b - a));
        let v: Vec<Correspondence> = cloud[..keep]
            .iter()
            .filter_map(|&x| Some(Correspondence::new(project(&pa, x).ok()?, project(&pb, x).ok()?)))
            .filter(|c| dims.contains(c.p1) && dims.contains(c.p2))
            .collect();
        (!v.is_empty()).then_some(v)
    };

    for mode in [SelectionMode::ShortBaseline, SelectionMode::WideBaseline] {
        let cfg = PairSelectionConfig {
            mode,
            sample_count: 10,
            seed: 1,
            ..Default::default()
        };
        let chosen = select_pairs(&poses, &k, &matches, &cfg);
        println!("{mode:?}: {chosen:?}");
    }
    let f = pose_fundamental(&k, &poses[0], &poses[1])?;
    println!("F(0, 1) row 0: {:?}", f.matrix()[0]);
    Ok(())
}
