//! End-to-end tests of the binary: flags, config files, presets, output
//! formats, and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn seqr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqr"))
        .args(args)
        .output()
        .expect("spawn seqr")
}

fn seqr_ok(args: &[&str]) -> String {
    let out = seqr(args);
    assert!(
        out.status.success(),
        "seqr {args:?} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

struct Workdir(PathBuf);

impl Workdir {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("seqr-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        Workdir(dir)
    }

    fn path(&self, name: &str) -> String {
        self.0.join(name).to_str().unwrap().to_string()
    }
}

impl Drop for Workdir {
    fn drop(&mut self) {
        std::fs::remove_dir_all(&self.0).ok();
    }
}

fn gen_small(dir: &Workdir, lib: &str, queries: &str) {
    seqr_ok(&[
        "gen",
        "--seed",
        "5",
        "--n-adapters",
        "4",
        "--m",
        "12",
        "--n",
        "24",
        "--r",
        "4",
        "--per-task",
        "8",
        "--out",
        &dir.path(lib),
        "--queries-out",
        &dir.path(queries),
    ]);
}

#[test]
fn verify_counterexample_prints_winners() {
    let stdout = seqr_ok(&["verify", "--counterexample"]);
    assert!(
        stdout.contains("arrow winner 0, naive winner 1"),
        "unexpected output: {stdout}"
    );
}

#[test]
fn full_verify_passes() {
    let stdout = seqr_ok(&["verify", "--trials", "40", "--seed", "3"]);
    assert_eq!(stdout.matches("ok - ").count(), 5, "{stdout}");
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn config_file_supplies_values_and_flags_override() {
    let dir = Workdir::new("config");
    let cfg = dir.0.join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "seed=5\nn_adapters=4\nm=12\nn=24\nr=4\nper_task=8\nout={}\nqueries_out={}\n",
            dir.path("from-config.sqrl"),
            dir.path("from-config.bin")
        ),
    )
    .unwrap();
    let stdout = seqr_ok(&["gen", "--config", cfg.to_str().unwrap()]);
    assert!(stdout.contains("from-config.sqrl"));
    assert!(Path::new(&dir.path("from-config.sqrl")).exists());

    // A flag beats the same key in the file.
    let stdout = seqr_ok(&[
        "gen",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        &dir.path("override.sqrl"),
    ]);
    assert!(stdout.contains("override.sqrl"));
    assert!(Path::new(&dir.path("override.sqrl")).exists());
}

#[test]
fn malformed_config_is_usage_error() {
    let dir = Workdir::new("badcfg");
    let cfg = dir.0.join("bad.cfg");
    std::fs::write(&cfg, "this line has no equals sign\n").unwrap();
    let out = seqr(&["gen", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("key=value"), "{err}");
}

#[test]
fn missing_library_is_io_error() {
    let dir = Workdir::new("io");
    gen_small(&dir, "lib.sqrl", "q.bin");
    let out = seqr(&[
        "route",
        "--library",
        &dir.path("nope.sqrl"),
        "--queries",
        &dir.path("q.bin"),
        "--method",
        "seqr",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn calibrated_routing_without_stats_is_usage_error() {
    let dir = Workdir::new("nostats");
    gen_small(&dir, "lib.sqrl", "q.bin");
    seqr_ok(&[
        "preprocess",
        "--library",
        &dir.path("lib.sqrl"),
        "--out",
        &dir.path("prep.sqrl"),
    ]);
    let out = seqr(&[
        "route",
        "--library",
        &dir.path("prep.sqrl"),
        "--queries",
        &dir.path("q.bin"),
        "--method",
        "seqr",
        "--calibrated",
        "on",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("calibration"));
}

#[test]
fn route_decisions_are_json_lines_with_summary() {
    let dir = Workdir::new("jsonl");
    gen_small(&dir, "lib.sqrl", "q.bin");
    seqr_ok(&[
        "preprocess",
        "--library",
        &dir.path("lib.sqrl"),
        "--out",
        &dir.path("prep.sqrl"),
    ]);
    let stdout = seqr_ok(&[
        "route",
        "--library",
        &dir.path("prep.sqrl"),
        "--queries",
        &dir.path("q.bin"),
        "--method",
        "spectr",
    ]);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 4 * 8 + 1);
    for line in &lines[..lines.len() - 1] {
        let v: serde_json::Value = serde_json::from_str(line).expect("valid json");
        assert!(v.get("selected").is_some());
        assert_eq!(v.get("method").unwrap(), "spectr");
    }
    let summary: serde_json::Value = serde_json::from_str(lines.last().unwrap()).unwrap();
    let acc = summary["summary"]["accuracy_vs_oracle"].as_f64().unwrap();
    assert!((acc - 1.0).abs() < 1e-12, "spectral raw accuracy {acc}");
}

#[test]
fn k_sweep_emits_monotone_csv() {
    let dir = Workdir::new("ksweep");
    seqr_ok(&[
        "gen",
        "--preset",
        "fig3",
        "--seed",
        "42",
        "--per-task",
        "10",
        "--out",
        &dir.path("lib.sqrl"),
        "--queries-out",
        &dir.path("q.bin"),
    ]);
    seqr_ok(&[
        "preprocess",
        "--library",
        &dir.path("lib.sqrl"),
        "--out",
        &dir.path("prep.sqrl"),
    ]);
    let stdout = seqr_ok(&[
        "route",
        "--library",
        &dir.path("prep.sqrl"),
        "--queries",
        &dir.path("q.bin"),
        "--method",
        "seqr",
        "--k-sweep",
        "1..10",
    ]);
    let mut lines = stdout.lines();
    assert_eq!(lines.next().unwrap(), "k,lag_accuracy,seqr_accuracy");
    let mut prev = -1.0f64;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let lag: f64 = fields[1].parse().unwrap();
        let seqr_acc: f64 = fields[2].parse().unwrap();
        assert!(lag + 1e-12 >= prev, "lag accuracy not monotone: {stdout}");
        assert_eq!(seqr_acc, 1.0, "raw seqr accuracy should stay 1.0");
        prev = lag;
    }
    assert_eq!(prev, 1.0, "lag accuracy should reach 1.0 at k=N");
}

#[test]
fn discard_b_keeps_seqr_decisions_identical() {
    let dir = Workdir::new("discard");
    gen_small(&dir, "lib.sqrl", "q.bin");
    seqr_ok(&[
        "preprocess",
        "--library",
        &dir.path("lib.sqrl"),
        "--forms",
        "seqr",
        "--out",
        &dir.path("full.sqrl"),
    ]);
    seqr_ok(&[
        "preprocess",
        "--library",
        &dir.path("lib.sqrl"),
        "--forms",
        "seqr",
        "--discard-b",
        "on",
        "--out",
        &dir.path("slim.sqrl"),
    ]);

    let full_len = std::fs::metadata(dir.path("full.sqrl")).unwrap().len();
    let slim_len = std::fs::metadata(dir.path("slim.sqrl")).unwrap().len();
    assert!(slim_len < full_len, "discard-b should shrink the container");

    let route = |lib: &str| {
        seqr_ok(&[
            "route",
            "--library",
            &dir.path(lib),
            "--queries",
            &dir.path("q.bin"),
            "--method",
            "seqr",
        ])
    };
    assert_eq!(route("full.sqrl"), route("slim.sqrl"));
}

#[test]
fn bench_axis_sweep_writes_csv() {
    let dir = Workdir::new("bench");
    let out = dir.path("sweep.csv");
    seqr_ok(&[
        "bench",
        "--axis",
        "rank",
        "--grid",
        "2,4",
        "--n-adapters",
        "6",
        "--m",
        "16",
        "--n",
        "16",
        "--r",
        "2",
        "--k",
        "2",
        "--out",
        &out,
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "axis,value,method,model_flops,measured_flops,storage_params,wall_ns,z_overhead_flops"
    );
    assert_eq!(lines.count(), 10, "5 methods x 2 grid points");
}

#[test]
fn bench_table1_prints_reference_numbers() {
    let stdout = seqr_ok(&["bench", "--preset", "table1"]);
    for value in ["65536000", "32768000", "4751360", "4096000", "64000"] {
        assert!(stdout.contains(value), "missing {value} in:\n{stdout}");
    }
    for label in ["66M", "33M", "5M", "4M", "64K"] {
        assert!(stdout.contains(label), "missing {label} in:\n{stdout}");
    }
}

#[test]
fn mu_routing_reports_uniform_choice() {
    let dir = Workdir::new("mu");
    gen_small(&dir, "lib.sqrl", "q.bin");
    let stdout = seqr_ok(&[
        "route",
        "--library",
        &dir.path("lib.sqrl"),
        "--queries",
        &dir.path("q.bin"),
        "--method",
        "mu",
    ]);
    let first: serde_json::Value = serde_json::from_str(stdout.lines().next().unwrap()).unwrap();
    assert_eq!(first["selected"], 0);
}

#[test]
fn diagnostics_stay_on_stderr() {
    let dir = Workdir::new("logging");
    gen_small(&dir, "lib.sqrl", "q.bin");
    let out = Command::new(env!("CARGO_BIN_EXE_seqr"))
        .args([
            "route",
            "--library",
            &dir.path("lib.sqrl"),
            "--queries",
            &dir.path("q.bin"),
            "--method",
            "naive",
        ])
        .env("SEQR_LOG", "debug")
        .output()
        .unwrap();
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("loaded library"), "stderr: {stderr}");
    // Every stdout line stays machine-parseable.
    for line in String::from_utf8(out.stdout).unwrap().lines() {
        serde_json::from_str::<serde_json::Value>(line).expect("stdout is json-lines");
    }
}

#[test]
fn unique_a_library_rejects_seqr_preprocess() {
    let dir = Workdir::new("unique");
    seqr_ok(&[
        "gen",
        "--seed",
        "5",
        "--n-adapters",
        "3",
        "--m",
        "10",
        "--n",
        "20",
        "--r",
        "3",
        "--shared-a",
        "off",
        "--per-task",
        "4",
        "--out",
        &dir.path("unique.sqrl"),
    ]);
    let out = seqr(&[
        "preprocess",
        "--library",
        &dir.path("unique.sqrl"),
        "--forms",
        "seqr",
        "--out",
        &dir.path("x.sqrl"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shared A"));
}
