use std::path::Path;
use std::process::{Command, Output};

use mscluster::ingest::{
    load_pointcloud, save_features, save_image, save_label_map, write_ply, ImageGrid, PlyEncoding,
    PointCloud,
};
use mscluster::{FeatureMatrix, Partition};
use tempfile::TempDir;

fn mscluster(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mscluster"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MSCLUSTER_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

// three vertical bands with a little deterministic texture
fn band_image(dir: &Path) {
    let img = ImageGrid::from_fn(48, 36, |x, y| {
        let base = [[200u8, 40, 40], [40, 190, 60], [50, 60, 210]][x * 3 / 48];
        let t = ((x * 7 + y * 13) % 9) as u8;
        base.map(|c| c.saturating_add(t))
    })
    .unwrap();
    save_image(&img, dir.join("bands.png")).unwrap();
}

fn blob_cloud(dir: &Path) {
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    for (b, center) in [[0.0, 0.0, 0.0], [6.0, 0.0, 0.0], [0.0, 6.0, 1.0]].iter().enumerate() {
        for i in 0..60 {
            let f = i as f64;
            positions.push([
                center[0] + (f * 0.37).sin(),
                center[1] + (f * 0.71).cos(),
                center[2] + (f * 0.13).sin() * 0.5,
            ]);
            colors.push([[220, 20, 20], [20, 220, 20], [20, 20, 220]][b]);
        }
    }
    let cloud = PointCloud::new(positions, Some(colors)).unwrap();
    std::fs::write(dir.join("blobs.ply"), write_ply(&cloud, None, PlyEncoding::Ascii)).unwrap();
}

#[test]
fn image_run_writes_every_level() {
    let tmp = TempDir::new().unwrap();
    band_image(tmp.path());
    let out = mscluster(
        &["segment-image", "--input", "bands.png", "--out", "run", "--superpixels", "60"],
        tmp.path(),
    );
    ok(&out);
    let run = tmp.path().join("run");
    // default L = 4 gives levels 0..=4
    for l in 0..=4 {
        assert!(run.join(format!("level_{l}.png")).is_file(), "level_{l}.png missing");
    }
    assert!(!run.join("level_5.png").exists());
    for f in ["hierarchy.json", "metrics.csv", "metrics.json", "manifest.json"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let csv = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.lines().last().unwrap().starts_with("4,10,"));
}

#[test]
fn cloud_run_writes_labeled_plys() {
    let tmp = TempDir::new().unwrap();
    blob_cloud(tmp.path());
    let out = mscluster(
        &[
            "segment-cloud", "--input", "blobs.ply", "--out", "run", "--initial-clusters", "40",
            "--ply-encoding", "ascii",
        ],
        tmp.path(),
    );
    ok(&out);
    let run = tmp.path().join("run");
    for l in 0..=3 {
        let cloud = load_pointcloud(run.join(format!("level_{l}.ply"))).unwrap();
        assert_eq!(cloud.len(), 180);
    }
    assert!(!run.join("level_4.ply").exists());
    let h = std::fs::read_to_string(run.join("hierarchy.json")).unwrap();
    let h = mscluster::export::hierarchy_from_json(&h).unwrap();
    assert_eq!(h.schedule.first(), Some(&40));
    assert_eq!(h.schedule.last(), Some(&10));
}

#[test]
fn rerun_and_manifest_replay_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    band_image(tmp.path());
    let args = |out: &'static str| {
        vec![
            "segment-image", "--input", "bands.png", "--out", out, "--superpixels", "40", "--levels",
            "2", "--clusters-final", "3", "--seed", "9",
        ]
    };
    ok(&mscluster(&args("a"), tmp.path()));
    ok(&mscluster(&args("b"), tmp.path()));
    ok(&mscluster(
        &["run", "--config", "a/manifest.json", "--out", "c", "--threads", "1"],
        tmp.path(),
    ));
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("hierarchy.json")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_eq!(read("a"), read("c"));
    let metrics = |d: &str| std::fs::read(tmp.path().join(d).join("metrics.csv")).unwrap();
    assert_eq!(metrics("a"), metrics("c"));
}

#[test]
fn config_file_values_and_flag_precedence() {
    let tmp = TempDir::new().unwrap();
    band_image(tmp.path());
    std::fs::write(
        tmp.path().join("cfg.toml"),
        "input = \"bands.png\"\nout = \"run\"\nsuperpixels = 40\nschedule = [12, 4]\nseed = 3\nkernel = \"binary\"\n",
    )
    .unwrap();
    ok(&mscluster(&["segment-image", "--config", "cfg.toml", "--seed", "5"], tmp.path()));
    let manifest = std::fs::read_to_string(tmp.path().join("run/manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 5"));
    assert!(manifest.contains("\"kernel\": \"binary\""));
    assert!(tmp.path().join("run/level_2.png").is_file());
    assert!(!tmp.path().join("run/level_3.png").exists());
}

#[test]
fn coarsen_and_metrics_commands() {
    let tmp = TempDir::new().unwrap();
    let n = 30;
    let labels = Partition::new((0..n).collect()).unwrap();
    let feats: Vec<[f64; 2]> = (0..n)
        .map(|i| [(i / 10) as f64 * 10.0 + (i % 10) as f64 * 0.1, (i % 3) as f64 * 0.05])
        .collect();
    save_label_map(&labels, tmp.path().join("labels.txt")).unwrap();
    save_features(&FeatureMatrix::from_rows(&feats).unwrap(), tmp.path().join("feats.txt")).unwrap();
    ok(&mscluster(
        &[
            "coarsen", "--input", "labels.txt", "--features", "feats.txt", "--schedule", "9,3",
            "--out", "run", "--colors", "feats.txt",
        ],
        tmp.path(),
    ));
    let last = mscluster::ingest::load_label_map(tmp.path().join("run/level_2.txt")).unwrap();
    let truth = Partition::new((0..n).map(|i| i / 10).collect()).unwrap();
    assert!(last.same_grouping(&truth));

    ok(&mscluster(
        &["metrics", "--input", "run/hierarchy.json", "--colors", "feats.txt", "--out", "m"],
        tmp.path(),
    ));
    assert_eq!(
        std::fs::read(tmp.path().join("m/metrics.csv")).unwrap(),
        std::fs::read(tmp.path().join("run/metrics.csv")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    band_image(tmp.path());
    std::fs::write(tmp.path().join("typo.toml"), "levles = 3\n").unwrap();
    std::fs::write(tmp.path().join("junk.png"), b"not a png").unwrap();

    let code = |args: &[&str]| mscluster(args, tmp.path()).status.code();
    assert_eq!(code(&["segment-image", "--config", "typo.toml", "--input", "bands.png", "--out", "x"]), Some(1));
    assert_eq!(code(&["segment-image", "--no-such-flag"]), Some(1));
    assert_eq!(code(&["segment-image", "--input", "bands.png"]), Some(1));
    assert_eq!(code(&["segment-image", "--input", "bands.png", "--out", "x", "--alpha-policy", "fixed-k:0"]), Some(1));
    assert_eq!(code(&["segment-image", "--input", "bands.png", "--out", "x", "--schedule", "5,9"]), Some(1));
    assert_eq!(code(&["segment-image", "--input", "junk.png", "--out", "x"]), Some(2));
    assert_eq!(code(&["segment-image", "--input", "missing.png", "--out", "x"]), Some(2));
    assert_eq!(code(&["--help"]), Some(0));

    let err = mscluster(&["segment-image", "--input", "junk.png", "--out", "x"], tmp.path());
    assert!(String::from_utf8_lossy(&err.stderr).starts_with("mscluster: error:"));
}
