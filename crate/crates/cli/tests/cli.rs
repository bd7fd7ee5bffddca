use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use debris_twin_core::synth::{generate, occlusion_fixture, random_fixture, unit_box_fixture, SceneSpec};

const BIN: &str = env!("CARGO_BIN_EXE_debris-twin");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn scene(spec: &SceneSpec) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    generate(spec).unwrap().write_to_dir(dir.path()).unwrap();
    let config = dir.path().join("config.toml");
    (dir, config)
}

/// Relative path → bytes for every file under `dir` except timing.json.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else if path.file_name().unwrap() != "timing.json" {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn stderr_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.lines().last().expect("stderr has a line")).expect("last stderr line is JSON")
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn separate_stages_equal_all() {
    let (dir, cfg) = scene(&random_fixture(4, 600.0));
    let cfg = cfg.to_str().unwrap();
    let (a, b) = (dir.path().join("staged"), dir.path().join("whole"));
    for stage in ["depth", "fuse", "risk"] {
        ok(&run(&[stage, "--config", cfg, "--out", a.to_str().unwrap()]));
    }
    ok(&run(&["all", "--config", cfg, "--out", b.to_str().unwrap()]));
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    assert!(sa == sb, "staged and whole-pipeline outputs differ");
    assert!(b.join("timing.json").is_file() && !a.join("timing.json").exists());
}

#[test]
fn thread_count_does_not_change_outputs() {
    let (dir, cfg) = scene(&random_fixture(6, 600.0));
    let cfg = cfg.to_str().unwrap();
    let one = dir.path().join("t1");
    let eight = dir.path().join("t8");
    ok(&run(&["--threads", "1", "all", "--config", cfg, "--out", one.to_str().unwrap()]));
    ok(&run(&["all", "--threads", "8", "--config", cfg, "--out", eight.to_str().unwrap()]));
    assert!(snapshot(&one) == snapshot(&eight));
}

#[test]
fn stdout_lists_outputs_and_timing_has_three_stages() {
    let (dir, cfg) = scene(&unit_box_fixture(3));
    let out = dir.path().join("o");
    let o = run(&["all", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    ok(&o);
    let listed: Vec<PathBuf> = String::from_utf8(o.stdout).unwrap().lines().map(PathBuf::from).collect();
    assert!(listed.iter().all(|p| p.is_file()), "{listed:?}");
    assert_eq!(listed.iter().filter(|p| p.extension().is_some_and(|e| e == "depth")).count(), 8);
    let pngs: Vec<_> = (1..=5).map(|c| out.join(format!("risk_cat{c}.png"))).collect();
    assert!(pngs.iter().all(|p| listed.contains(p)));
    assert_eq!(std::fs::read_dir(&out).unwrap().filter(|e| {
        let name = e.as_ref().unwrap().file_name().into_string().unwrap();
        name.starts_with("risk_cat") && name.ends_with(".png")
    }).count(), 5);

    let timing: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("timing.json")).unwrap()).unwrap();
    let stages: Vec<&str> = timing["stages"].as_array().unwrap().iter().map(|s| s["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["depth", "fuse", "risk"]);

    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    let inst = &summary["instances"][0];
    assert_eq!(inst["class"], "plywood");
    let v = inst["volume_m3"].as_f64().unwrap();
    assert!((v - 1.0).abs() <= 0.03, "{v}");
    for e in inst["kinetic_energy_j"].as_array().unwrap() {
        let u = e["speed"].as_f64().unwrap();
        let ke = e["kinetic_energy_j"].as_f64().unwrap();
        assert!((ke - 0.5 * 600.0 * v * u * u).abs() <= 1e-9 * ke);
    }
}

#[test]
fn rerun_gives_identical_summary() {
    let (dir, cfg) = scene(&random_fixture(8, 500.0));
    let out = dir.path().join("o");
    let args = ["all", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    ok(&run(&args));
    let first = snapshot(&out);
    ok(&run(&args));
    assert!(first == snapshot(&out));
}

#[test]
fn missing_camera_file_is_an_input_error() {
    let (dir, cfg) = scene(&unit_box_fixture(1));
    std::fs::remove_file(dir.path().join("cameras.txt")).unwrap();
    let o = run(&["depth", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(o.stdout.is_empty());
    let err = stderr_json(&o);
    assert_eq!(err["error"]["stage"], "depth");
    assert_eq!(err["error"]["family"], "input");
}

#[test]
fn missing_mask_directory_is_an_input_error() {
    let (dir, cfg) = scene(&unit_box_fixture(1));
    std::fs::remove_dir_all(dir.path().join("masks")).unwrap();
    let o = run(&["fuse", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"]["stage"], "fuse");
}

#[test]
fn missing_density_names_the_class() {
    let (dir, cfg) = scene(&unit_box_fixture(1));
    let mut text = std::fs::read_to_string(&cfg).unwrap();
    text.push_str("\n[densities]\nmetal_girder = 7850.0\n");
    std::fs::write(&cfg, text).unwrap();
    let o = run(&["all", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(7));
    let err = stderr_json(&o);
    assert_eq!(err["error"]["stage"], "risk");
    assert!(err["error"]["message"].as_str().unwrap().contains("plywood"));
}

#[test]
fn config_and_usage_errors_have_their_own_codes() {
    let (dir, cfg) = scene(&unit_box_fixture(1));
    let mut text = std::fs::read_to_string(&cfg).unwrap();
    text.push_str("\n[volumetry]\ngrid_sise = 0.1\n");
    std::fs::write(&cfg, text).unwrap();
    let o = run(&["risk", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
    assert_eq!(stderr_json(&o)["error"]["family"], "config");

    assert_eq!(run(&["depth"]).status.code(), Some(2));
    assert_eq!(run(&["explode", "--config", "x"]).status.code(), Some(2));
    assert_eq!(run(&["--threads", "0", "all", "--config", "x"]).status.code(), Some(2));
    drop(dir);
}

#[test]
fn empty_site_gives_no_instances_and_blank_maps() {
    let mut spec = unit_box_fixture(1);
    spec.primitives.clear();
    let (dir, cfg) = scene(&spec);
    let out = dir.path().join("o");
    ok(&run(&["all", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["instances"].as_array().unwrap().is_empty());
    assert_eq!(summary["site_volume"], 0.0);
    for c in summary["categories"].as_array().unwrap() {
        assert_eq!(c["max_cell_energy"], 0.0);
    }
    let fuse: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("fuse_summary.json")).unwrap()).unwrap();
    let counts = fuse["class_counts"].as_array().unwrap();
    assert_eq!(counts[0]["points"], fuse["points"]);
    assert_eq!(std::fs::read_dir(&out).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".png")
    }).count(), 5);
}

#[test]
fn fuse_builds_depth_maps_itself_when_none_are_stored() {
    let (dir, cfg) = scene(&random_fixture(2, 400.0));
    let cfg = cfg.to_str().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&run(&["depth", "--config", cfg, "--out", a.to_str().unwrap()]));
    ok(&run(&["fuse", "--config", cfg, "--out", a.to_str().unwrap()]));
    ok(&run(&["fuse", "--config", cfg, "--out", b.to_str().unwrap()]));
    for f in ["labeled_cloud.ply", "fuse_summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn occluded_box_has_no_mislabelled_points_in_summary() {
    let (dir, cfg) = scene(&occlusion_fixture());
    let out = dir.path().join("o");
    ok(&run(&["fuse", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let fuse: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("fuse_summary.json")).unwrap()).unwrap();
    let girder = &fuse["truth"]["per_class"][1];
    assert_eq!(girder["class"], "metal_girder");
    assert!(girder["points"].as_u64().unwrap() > 0);
    assert_eq!(girder["mislabeled"], 0);
}

#[test]
fn synth_writes_a_runnable_scene() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, unit_box_fixture(9).to_toml()).unwrap();
    let scene_dir = dir.path().join("scene");
    let o = run(&["synth", "--spec", spec.to_str().unwrap(), "--out", scene_dir.to_str().unwrap()]);
    ok(&o);
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), scene_dir.join("config.toml").display().to_string());
    let cameras = std::fs::read_to_string(scene_dir.join("cameras.txt")).unwrap();
    assert_eq!(cameras.lines().filter(|l| !l.starts_with('#')).count(), 8);
    std::fs::write(&spec, "seed = 1\n[[primitives]]\nkind = \"pyramid\"\n").unwrap();
    assert_eq!(run(&["synth", "--spec", spec.to_str().unwrap(), "--out", scene_dir.to_str().unwrap()]).status.code(), Some(5));
}
