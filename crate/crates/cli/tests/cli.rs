//! End-to-end checks of the `rlp` binary: artifact shapes, error style,
//! and rerun stability. Heavier sweep properties live in the acceptance
//! suite; these stay cheap by using a coarse sensor spec.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rlp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rlp"))
        .args(args)
        .output()
        .expect("spawn rlp")
}

/// Runs the binary expecting success; returns the run directory from the
/// first stdout line.
fn rlp_ok(args: &[&str]) -> PathBuf {
    let out = rlp(args);
    assert!(
        out.status.success(),
        "rlp {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    PathBuf::from(stdout.lines().next().expect("run dir line"))
}

fn gen_scene(out: &Path, mounts: usize, seed: u64) -> PathBuf {
    let dir = rlp_ok(&[
        "gen-scene",
        "--seed",
        &seed.to_string(),
        "--mounts",
        &mounts.to_string(),
        "--out",
        out.to_str().unwrap(),
    ]);
    dir.join("scenario.json")
}

/// Coarse-spec and tiny-training flags shared by the cheap tests.
const FAST: &[&str] = &[
    "--channels",
    "16",
    "--azimuth-step",
    "2.0",
    "--epochs",
    "20",
    "--samples",
    "3",
];

#[test]
fn gen_scene_writes_scenario_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = rlp_ok(&["gen-scene", "--seed", "3", "--out", tmp.path().to_str().unwrap()]);
    assert!(dir.join("scenario.json").is_file());
    assert!(dir.join("config.json").is_file());
    let s = rlp_core::scene::load_scenario(&dir.join("scenario.json")).unwrap();
    assert_eq!(s.seed, 3);
    assert_eq!(s.mounts.len(), 8);
}

#[test]
fn optimize_greedy_emits_selection_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = gen_scene(tmp.path(), 6, 7);
    let mut args = vec![
        "optimize",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--m",
        "3",
        "--method",
        "greedy",
        "--scorer",
        "noisyor",
    ];
    args.extend_from_slice(FAST);
    let dir = rlp_ok(&args);

    let trace = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines[0], "step,chosen_id,k_before,k_after,gain");
    assert_eq!(lines.len(), 4);

    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("result.json")).unwrap()).unwrap();
    let obj = result.as_object().unwrap();
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(
        keys,
        ["frames_used", "method", "placement", "score", "scorer_mode", "seed"]
    );
    let placement: Vec<u64> = obj["placement"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(placement.len(), 3);
    let mut dedup = placement.clone();
    dedup.sort_unstable();
    dedup.dedup();
    assert_eq!(dedup.len(), 3);
    assert_eq!(obj["method"], "greedy");
    assert_eq!(obj["scorer_mode"], "noisyor");
    assert!(dir.join("ability_selected.pgm").is_file());
    assert!(dir.join("model.json").is_file());
}

#[test]
fn brute_force_over_budget_fails_with_budget_error() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = gen_scene(tmp.path(), 50, 1);
    let mut args = vec![
        "optimize",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--m",
        "6",
        "--method",
        "brute",
    ];
    args.extend_from_slice(FAST);
    let out = rlp(&args);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr.starts_with("error: budget: "),
        "unexpected stderr: {stderr}"
    );
    assert_eq!(stderr.lines().count(), 1);
}

#[test]
fn unknown_method_is_a_single_line_parameter_error() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = gen_scene(tmp.path(), 6, 2);
    let out = rlp(&[
        "optimize",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--m",
        "2",
        "--method",
        "simulated-annealing",
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.starts_with("error: parameter: unknown method"));
    assert!(stderr.contains("greedy, brute, random, covdens"));
}

#[test]
fn optimize_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = gen_scene(tmp.path(), 6, 9);
    let mut args = vec![
        "optimize",
        "--scenario",
        scenario.to_str().unwrap(),
        "--m",
        "2",
        "--scorer",
        "noisyor",
    ];
    args.extend_from_slice(FAST);

    let mut a = args.clone();
    let out_a = tmp.path().join("a");
    a.extend_from_slice(&["--out", out_a.to_str().unwrap()]);
    let dir_a = rlp_ok(&a);

    let mut b = args.clone();
    let out_b = tmp.path().join("b");
    b.extend_from_slice(&["--out", out_b.to_str().unwrap()]);
    let dir_b = rlp_ok(&b);

    assert_eq!(dir_a.file_name(), dir_b.file_name());
    let mut names: Vec<String> = std::fs::read_dir(&dir_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.contains(&"result.json".to_string()));
    for name in names {
        let bytes_a = std::fs::read(dir_a.join(&name)).unwrap();
        let bytes_b = std::fs::read(dir_b.join(&name)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{name} differs between reruns");
    }
}

#[test]
fn eval_report_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = gen_scene(tmp.path(), 6, 11);
    let mut args = vec![
        "eval",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--m",
        "2",
        "--scorer",
        "noisyor",
        "--frames",
        "0,5",
    ];
    args.extend_from_slice(FAST);
    let eval_dir = rlp_ok(&args);
    let csv = eval_dir.join("evaluation.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    // greedy + brute + 3 random + covdens.
    assert_eq!(text.lines().count(), 7);
    assert!(text.starts_with("method,m,seed,ap_03,ap_05,ap_07,frames,runtime_ms\n"));
    assert!(eval_dir.join("placements.json").is_file());

    let report_dir = rlp_ok(&[
        "report",
        "--results",
        csv.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    let md = std::fs::read_to_string(report_dir.join("report.md")).unwrap();
    assert!(md.contains("| Random | "));
    assert!(md.contains("±"));
    assert!(md.contains("| Ours (greedy) | "));
    assert!(report_dir.join("report.csv").is_file());
}

#[test]
fn report_of_empty_results_is_a_parameter_error() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("evaluation.csv");
    std::fs::write(&csv, "method,m,seed,ap_03,ap_05,ap_07,frames,runtime_ms\n").unwrap();
    let out = rlp(&[
        "report",
        "--results",
        csv.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.starts_with("error: parameter: no evaluation rows"));
}

#[test]
fn thread_cap_env_is_honored_and_validated() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rlp"))
        .env("RLP_THREADS", "1")
        .args(["gen-scene", "--seed", "5", "--out", tmp.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());

    let out = Command::new(env!("CARGO_BIN_EXE_rlp"))
        .env("RLP_THREADS", "0")
        .args(["gen-scene", "--seed", "5", "--out", tmp.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .starts_with("error: parameter: RLP_THREADS"));
}

#[test]
fn audit_reports_counts_in_json() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = gen_scene(tmp.path(), 6, 13);
    let mut args = vec![
        "audit",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--scorer",
        "noisyor",
        "--checks",
        "25",
    ];
    args.extend_from_slice(FAST);
    let dir = rlp_ok(&args);
    let audit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("audit.json")).unwrap()).unwrap();
    assert_eq!(audit["report"]["checks"], 25);
    assert_eq!(audit["report"]["violations"], 0);
    assert_eq!(audit["scorer_mode"], "noisyor");
}

#[test]
fn simulate_writes_cloud_files_and_index() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = gen_scene(tmp.path(), 6, 17);
    let dir = rlp_ok(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--frames",
        "0",
        "--channels",
        "16",
        "--azimuth-step",
        "3.0",
    ]);
    let index = std::fs::read_to_string(dir.join("clouds.csv")).unwrap();
    assert_eq!(index.lines().count(), 7);
    assert!(dir.join("cloud_f00_m00.rlpc").is_file());
    let cloud = rlp_core::lidar::read_cloud(
        &dir.join("cloud_f00_m05.rlpc"),
        rlp_core::lidar::FrameName::Mount(5),
    )
    .unwrap();
    assert!(!cloud.is_empty());
}
