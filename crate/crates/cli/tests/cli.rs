use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_spelaeo");
const FIXTURE_SPEC: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/corridor.toml");

fn spelaeo(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("SPELAEO_LOG").output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixtures() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    let out = spelaeo(&["synth", "--spec", FIXTURE_SPEC, "--out-dir", s(&fx)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (dir, fx)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_1() {
    let out = spelaeo(&["align", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(spelaeo(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(spelaeo(&["fuse-depth", "--trajectory", "t.csv"]).status.code(), Some(1));
}

#[test]
fn version_and_help_exit_0() {
    let out = spelaeo(&["--version"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), format!("spelaeo {}", env!("CARGO_PKG_VERSION")));
    assert!(spelaeo(&["survey", "adjust", "--help"]).status.success());
}

#[test]
fn fuse_depth_recovers_fixture_offsets() {
    let (dir, fx) = fixtures();
    let out = dir.path().join("center_corr.csv");
    let rep = dir.path().join("corr.json");
    let res = spelaeo(&[
        "fuse-depth",
        "--trajectory",
        s(&fx.join("center.csv")),
        "--depth-log",
        s(&fx.join("depth.csv")),
        "--rate",
        "100",
        "--max-shift",
        "1200",
        "--out",
        s(&out),
        "--report",
        s(&rep),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let r = json(&rep);
    assert!((r["time_shift_s"].as_f64().unwrap() - 120.0).abs() < 0.5, "{r}");
    assert!((r["offset_m"].as_f64().unwrap() - 19.36).abs() < 0.05, "{r}");
    assert!(r["scale"].as_f64().unwrap() > 0.0 && r["residual_rms_m"].as_f64().unwrap() < 0.2);
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("timestamp_s,tx,ty,tz,qx,qy,qz,qw\n"));
    assert!(String::from_utf8_lossy(&res.stderr).contains("[INFO]"));
}

#[test]
fn quiet_suppresses_info() {
    let dir = tempfile::tempdir().unwrap();
    let res = spelaeo(&["--quiet", "synth", "--seed", "3", "--out-dir", s(&dir.path().join("fx"))]);
    assert!(res.status.success());
    assert!(res.stderr.is_empty(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(res.stdout.is_empty());
}

#[test]
fn align_writes_trajectory_and_report() {
    let (dir, fx) = fixtures();
    let out = dir.path().join("right_aligned.csv");
    let rep = dir.path().join("align.json");
    let res = spelaeo(&[
        "align",
        "--ref",
        s(&fx.join("left.csv")),
        "--ref-obs",
        s(&fx.join("left_obs.csv")),
        "--mov",
        s(&fx.join("right.csv")),
        "--mov-obs",
        s(&fx.join("right_obs.csv")),
        "--out",
        s(&out),
        "--report",
        s(&rep),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let r = json(&rep);
    assert_eq!(r["from_frame"], "right");
    assert_eq!(r["to_frame"], "left");
    for side in ["reference", "moving"] {
        let n = r[side]["inliers"].as_u64().unwrap();
        assert!(n >= 1 && n <= r[side]["observations"].as_u64().unwrap());
        assert!(r[side]["distance_sigma_m"].as_f64().unwrap() > 0.0);
        assert_eq!(r[side]["angle_sigmas_deg"].as_array().unwrap().len(), 3);
    }
    assert_eq!(r["quaternion"].as_array().unwrap().len(), 4);
    let rows = std::fs::read_to_string(&out).unwrap().lines().count();
    let src = std::fs::read_to_string(fx.join("right.csv")).unwrap().lines().count();
    assert_eq!(rows, src);
}

#[test]
fn skeleton_and_select_area() {
    let (dir, fx) = fixtures();
    let skel = dir.path().join("skel");
    let rep = dir.path().join("skel.json");
    let trajs: Vec<String> = ["left", "center", "right"].iter().map(|c| s(&fx.join("truth").join(format!("{c}_world.csv"))).to_owned()).collect();
    let mut args = vec!["skeleton"];
    for t in &trajs {
        args.extend(["--traj", t.as_str()]);
    }
    let cloud = fx.join("truth/world_cloud.ply");
    args.extend(["--center-index", "1", "--cloud", s(&cloud), "--flag-radius", "1.0", "--depth-tol", "0.2"]);
    args.extend(["--out-dir", s(&skel), "--report", s(&rep)]);
    let res = spelaeo(&args);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["nodes.csv", "edges.csv", "lrud.csv"] {
        assert!(skel.join(f).is_file(), "{f}");
    }
    let r = json(&rep);
    assert_eq!(r["edges"].as_u64().unwrap() + 1, r["nodes"].as_u64().unwrap());
    let nodes = std::fs::read_to_string(skel.join("nodes.csv")).unwrap();
    assert!(nodes.starts_with("id,tx,ty,tz,qx,qy,qz,qw,source_count\n"));

    let area = dir.path().join("area1.csv");
    let mut args = vec!["select-area"];
    for t in &trajs {
        args.extend(["--traj", t.as_str()]);
    }
    args.extend(["--center-traj", trajs[1].as_str(), "--center-time", "300", "--radius", "2.5", "--out", s(&area)]);
    let res = spelaeo(&args);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&area).unwrap();
    assert!(text.starts_with("image_id,camera_id,timestamp_s,tx,ty,tz,qx,qy,qz,qw\n"));
    assert!(text.lines().count() > 1);

    let bad = dir.path().join("bad.csv");
    let n = args.len();
    args.truncate(n - 4);
    args.extend(["--radius", "-1", "--out", s(&bad)]);
    let res = spelaeo(&args);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(!bad.exists());
}

#[test]
fn survey_adjust_and_stickmap() {
    let (dir, fx) = fixtures();
    let st = dir.path().join("stations.csv");
    let svg = dir.path().join("map.svg");
    let rep = dir.path().join("survey.json");
    let res = spelaeo(&[
        "survey",
        "adjust",
        "--shots",
        s(&fx.join("shots.csv")),
        "--closures",
        s(&fx.join("loops.csv")),
        "--anchor",
        "S0",
        "--declination",
        "-5.2",
        "--out",
        s(&st),
        "--svg",
        s(&svg),
        "--report",
        s(&rep),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&st).unwrap();
    assert!(text.starts_with("station,x_m,y_m,z_m\nS0,0,0,0\n"), "{text}");
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));
    assert_eq!(json(&rep)["anchor"], "S0");

    let raw = dir.path().join("raw.svg");
    let res = spelaeo(&["survey", "stickmap", "--shots", s(&fx.join("shots.csv")), "--raw", "--svg", s(&raw)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(raw.is_file());

    let res = spelaeo(&["survey", "adjust", "--shots", s(&fx.join("shots.csv")), "--anchor", "Z9", "--out", s(&st)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("Z9"));
}

#[test]
fn pipeline_runs_and_flags_override_config() {
    let (dir, fx) = fixtures();
    let out = dir.path().join("out");
    let cfg = fx.join("pipeline.toml");
    let res = spelaeo(&["pipeline", "--config", s(&cfg), "--out-dir", s(&out), "--reference", "left"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let r = json(&out.join("report.json"));
    assert_eq!(r["reference"], "left");
    assert_eq!(r["cameras"].as_array().unwrap().len(), 3);
    assert!(out.join("survey/map.svg").is_file());

    let bad_out = dir.path().join("bad");
    let res = spelaeo(&["pipeline", "--config", s(&cfg), "--out-dir", s(&bad_out), "--rate", "-5"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!bad_out.exists());

    let broken = dir.path().join("broken.toml");
    std::fs::write(&broken, std::fs::read_to_string(&cfg).unwrap() + "\nsurprise = 1\n").unwrap();
    let res = spelaeo(&["pipeline", "--config", s(&broken), "--out-dir", s(&bad_out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("surprise"));
}

#[test]
fn synth_rejects_unknown_spec_keys() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, "seed = 1\nwobble = 2\n").unwrap();
    let res = spelaeo(&["synth", "--spec", s(&spec), "--out-dir", s(&dir.path().join("fx"))]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("wobble"));
}
