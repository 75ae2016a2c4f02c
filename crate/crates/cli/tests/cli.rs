use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use camchain_core::frame_io::{save_sequence, Frame, FrameSequence};
use camchain_core::homography::{CoordinateSpace, Homography};
use camchain_core::motion::{serialize_chain, MotionChain};

fn camchain(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_camchain"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CAMCHAIN_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_pan_chain(path: &Path, frames: usize, dx: f64, dy: f64) {
    let h = Homography::translation(dx, dy, CoordinateSpace::Normalized);
    let chain = MotionChain::from_homographies(64, 64, &vec![h; frames - 1]).unwrap();
    fs::write(path, serialize_chain(&chain)).unwrap();
}

#[test]
fn score_of_hand_computed_chains() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_pan_chain(&d.join("id.json"), 16, 0.0, 0.0);
    write_pan_chain(&d.join("pan.json"), 16, 0.03, 0.03);
    let o = camchain(&["score", "id.json", "pan.json", "--report", "r.json"], d);
    assert_eq!(o.status.code(), Some(0));
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 0.0016875).abs() < 1e-9, "{v}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["compared_pairs"], 15);

    write_pan_chain(&d.join("short.json"), 15, 0.0, 0.0);
    assert_eq!(camchain(&["score", "id.json", "short.json"], d).status.code(), Some(1));
    let o = camchain(&["score", "id.json", "short.json", "--resample"], d);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "0");
}

#[test]
fn extract_reports_partial_and_missing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let flat = FrameSequence::new(vec![Frame::filled(48, 48, [90, 90, 90]).unwrap(); 4]).unwrap();
    save_sequence(&flat, &d.join("flat")).unwrap();
    let o = camchain(&["extract", "flat", "flat.json"], d);
    assert_eq!(o.status.code(), Some(2));
    let chain = fs::read_to_string(d.join("flat.json")).unwrap();
    assert_eq!(chain.matches("\"h\": null").count(), 3);

    let o = camchain(&["extract", "nowhere", "x.json"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn oracle_extract_warp_classify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "oracle", "zoom", "--motion", "zoom", "--scale", "1.02", "--frames", "6", "--seed", "2",
    ];
    assert_eq!(camchain(&args, d).status.code(), Some(0));
    assert!(d.join("zoom/frame_0006.ppm").is_file());
    assert!(d.join("zoom/ground_truth.json").is_file());

    assert_eq!(camchain(&["extract", "zoom", "c.json"], d).status.code(), Some(0));
    let o = camchain(&["classify", "c.json"], d);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines.len(), 5);
    for l in &lines {
        assert_eq!(l.split('\t').nth(1), Some("zoom"), "{l}");
    }

    let o = camchain(&["warp", "zoom/frame_0001.ppm", "c.json", "pv"], d);
    assert_eq!(o.status.code(), Some(0));
    assert!(d.join("pv/frame_0006.ppm").is_file());
    assert!(d.join("pv/mask_0006.pgm").is_file());
    let o = camchain(&["score", "zoom", "pv"], d);
    assert_eq!(o.status.code(), Some(0));
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!(v < 1e-4, "{v}");
}

#[test]
fn classify_identity_chain() {
    let dir = tempfile::tempdir().unwrap();
    write_pan_chain(&dir.path().join("id.json"), 5, 0.0, 0.0);
    let o = camchain(&["classify", "id.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().all(|l| l.split('\t').nth(1) == Some("none")));
}

#[test]
fn warp_rejects_bad_chains() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        camchain(&["oracle", "o", "--frames", "2", "--width", "48", "--height", "48"], d)
            .status
            .code(),
        Some(0)
    );
    fs::write(d.join("bad.json"), "{ not json").unwrap();
    assert_eq!(
        camchain(&["warp", "o/frame_0001.ppm", "bad.json", "w"], d)
            .status
            .code(),
        Some(1)
    );

    let flat = FrameSequence::new(vec![Frame::filled(48, 48, [0, 0, 0]).unwrap(); 3]).unwrap();
    save_sequence(&flat, &d.join("flat")).unwrap();
    assert_eq!(camchain(&["extract", "flat", "gaps.json"], d).status.code(), Some(2));
    assert_eq!(
        camchain(&["warp", "o/frame_0001.ppm", "gaps.json", "w"], d)
            .status
            .code(),
        Some(1)
    );
    let o = camchain(&["warp", "o/frame_0001.ppm", "gaps.json", "w", "--skip-gaps"], d);
    assert_eq!(o.status.code(), Some(2));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("w/metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["substituted_pairs"], serde_json::json!([1, 2]));
}

#[test]
fn adapters_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = camchain(&["adapters", "gradcheck", "--seeds", "20"], d);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).matches("PASS").count(), 20);

    fs::write(d.join("s.json"), r#"{"b": [[1], [0]], "a": [[1, 0]]}"#).unwrap();
    fs::write(d.join("t.json"), r#"{"b": [[0], [1]], "a": [[0, 1]]}"#).unwrap();
    fs::write(d.join("m.json"), r#"{"b": [[1], [2]], "a": [[3, 4]]}"#).unwrap();
    let o = camchain(&["adapters", "ortho", "--spatial", "s.json", "--temporal", "t.json"], d);
    assert_eq!(stdout(&o).trim(), "0");
    let o = camchain(
        &[
            "adapters",
            "ortho",
            "--spatial",
            "m.json",
            "--temporal",
            "m.json",
            "--grad",
            "g.json",
        ],
        d,
    );
    assert_eq!(stdout(&o).trim(), "125");
    let g: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("g.json")).unwrap()).unwrap();
    assert_eq!(g["d_b"], serde_json::json!([[25.0], [50.0]]));

    let o = camchain(&["adapters", "demo", "--delta", "1.5"], d);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_files_and_seed_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_pan_chain(&d.join("a.json"), 4, 0.0, 0.0);
    write_pan_chain(&d.join("b.json"), 4, 0.1, 0.0);

    fs::write(d.join("good.conf"), "# comment\nseed = 3\nallow-low-coverage = true\n").unwrap();
    let o = camchain(&["--config", "good.conf", "score", "a.json", "b.json"], d);
    assert_eq!(o.status.code(), Some(0));

    fs::write(d.join("bad.conf"), "seed = 3\nwarp-speed = 9\n").unwrap();
    let o = camchain(&["score", "a.json", "b.json", "--config", "bad.conf"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warp-speed"));

    assert_eq!(
        camchain(&["score", "a.json", "b.json", "--no-such-flag"], d)
            .status
            .code(),
        Some(1)
    );

    // the oracle texture seed falls back to the environment
    let run = |seed: Option<&str>, out: &str| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_camchain"));
        c.args(["oracle", out, "--frames", "2", "--width", "32", "--height", "32"])
            .current_dir(d);
        match seed {
            Some(s) => c.env("CAMCHAIN_SEED", s),
            None => c.env_remove("CAMCHAIN_SEED"),
        };
        assert!(c.status().unwrap().success());
        fs::read(d.join(out).join("frame_0001.ppm")).unwrap()
    };
    let (e5, e5b, plain) = (run(Some("5"), "e5"), run(Some("5"), "e5b"), run(None, "plain"));
    assert_eq!(e5, e5b);
    assert_ne!(e5, plain);
}
