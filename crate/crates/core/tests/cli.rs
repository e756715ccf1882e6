use std::path::Path;
use std::process::{Command, Output};

use fmbench::harness::formats::{write_correspondences, write_fundamental, write_tum_trajectory, PoseRecord, Rotation};
use fmbench::synth::{generate_pair, Rig, SceneConfig};
use fmbench::{project, CameraIntrinsics, Correspondence, ImageDims, ProjectionMatrix};

fn fmbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmbench")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_then_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let manifest = stdout(&fmbench(&["synth", "--out", path(&data), "--pairs", "4", "--points", "80", "--seed", "5"]));
    assert!(manifest.trim().ends_with("dataset.toml"));

    let cfg = dir.path().join("bench.toml");
    std::fs::write(&cfg, "dataset = \"data/dataset.toml\"\ninlier_threshold = 1.5\nsgd_samples = 500\n").unwrap();
    let out = dir.path().join("out");
    let text = stdout(&fmbench(&[
        "run", "--config", path(&cfg), "--out", path(&out), "--seed", "9", "--estimator", "MSAC", "--estimator", "Oracle",
        "--ratio", "0.9",
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("dataset,method,pairs,recall"));
    assert!(lines[1].starts_with("synthetic,MSAC,4,"));
    assert!(lines[2].starts_with("synthetic,Oracle,4,100.00,"));
    for f in ["summary.csv", "pairs.csv", "timing.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(std::fs::read_to_string(out.join("summary.csv")).unwrap(), text);
}

#[test]
fn run_rejects_unknown_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.toml");
    std::fs::write(&cfg, "dataset = \"missing.toml\"\n").unwrap();
    let o = fmbench(&["run", "--config", path(&cfg), "--estimator", "GC-RANSAC"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn sgd_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate_pair(&SceneConfig::new(Rig::Random, 10, 1)).unwrap().f_gt;
    let b = generate_pair(&SceneConfig::new(Rig::Random, 10, 2)).unwrap().f_gt;
    let (fa, fb) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
    std::fs::write(&fa, write_fundamental(&a)).unwrap();
    std::fs::write(&fb, write_fundamental(&b)).unwrap();

    let same = stdout(&fmbench(&["sgd", path(&fa), path(&fa)]));
    assert_eq!(same, "sgd 0\nnsgd 0\n");
    let diff = stdout(&fmbench(&["sgd", path(&fa), path(&fb), "--samples", "200", "--seed", "4"]));
    let v: Vec<f64> = diff.lines().map(|l| l.split(' ').nth(1).unwrap().parse().unwrap()).collect();
    assert!(v[0] > 0.0);
    assert_eq!(v[1], (v[0] / 800.0).min(1.0));
}

#[test]
fn select_pairs_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let dims = ImageDims::new(480, 640).unwrap();
    let k = CameraIntrinsics::for_image(dims);
    let identity = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let poses: Vec<PoseRecord> = (0..4)
        .map(|i| PoseRecord {
            frame: i,
            timestamp: Some(0.4 * i as f64),
            rotation: Rotation::Matrix(identity),
            translation: [0.2 * i as f64, 0.0, 0.0],
        })
        .collect();
    let traj = dir.path().join("traj.txt");
    std::fs::write(&traj, write_tum_trajectory(&poses)).unwrap();
    let matches = dir.path().join("matches");
    std::fs::create_dir(&matches).unwrap();
    let cam = |p: &PoseRecord| {
        let t = [-p.translation[0], 0.0, 0.0];
        ProjectionMatrix::from_krt(&k, &identity, &t).unwrap()
    };
    // 30 exact matches for 0-1 and 1-2; 10 for 0-2.
    for (a, b, n) in [(0, 1, 30), (1, 2, 30), (0, 2, 10)] {
        let corrs: Vec<Correspondence> = (0..n)
            .map(|j| {
                let x = [-1.0 + 0.07 * j as f64, -0.5 + 0.03 * j as f64, 5.0];
                Correspondence::new(project(&cam(&poses[a]), x).unwrap(), project(&cam(&poses[b]), x).unwrap())
            })
            .collect();
        std::fs::write(matches.join(format!("{a}_{b}.txt")), write_correspondences(&corrs)).unwrap();
    }
    let text = stdout(&fmbench(&["select-pairs", "--poses", path(&traj), "--matches", path(&matches)]));
    assert_eq!(text, "0 1\n1 2\n");
}
