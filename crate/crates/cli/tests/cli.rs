use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn hpvpinn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hpvpinn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path, name: &str, extra: &str) -> String {
    let path = dir.join(name);
    let text = format!(
        "[problem]\nname = \"approx_smooth\"\n\
         [network]\ndepth = 2\nwidth = 6\n\
         [basis]\ncount = 8\n\
         [quadrature]\npoints = 12\n\
         [optimizer]\niterations = 40\nreport_every = 10\nseeds = [7]\n\
         [output]\ngrid = 51\n{extra}"
    );
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = hpvpinn(&["run", "--config", "/definitely/not/here.toml"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn malformed_config_and_unknown_problem_have_distinct_codes() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[problem\nname = ").unwrap();
    let o = hpvpinn(&[
        "run",
        "-c",
        bad.to_str().unwrap(),
        "-o",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);

    let cfg = small_config(tmp.path(), "ok.toml", "");
    let out = tmp.path().join("out");
    let o = hpvpinn(&[
        "run",
        "-c",
        &cfg,
        "-o",
        out.to_str().unwrap(),
        "--problem",
        "nope",
    ]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope"));
}

#[test]
fn diverging_run_exits_with_non_finite_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "c.toml", "");
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("iterations = 40", "iterations = 40\nlearning_rate = 1e300");
    fs::write(&cfg, text).unwrap();
    let out = tmp.path().join("out");
    let o = hpvpinn(&["run", "-c", &cfg, "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("trace.csv").exists());
    assert!(out.join("FAILED").exists());
}

#[test]
fn run_writes_artifacts_and_manifest_reproduces_trace() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "c.toml", "");
    let out = tmp.path().join("first");
    let o = hpvpinn(&["run", "-c", &cfg, "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "run_manifest.toml",
        "trace.csv",
        "solution.csv",
        "spectrum.csv",
        "checkpoint.json",
        "summary.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(
        lines[0],
        "iteration,total,variational,boundary,initial,data"
    );
    assert_eq!(lines.len(), 1 + 5);
    assert!(lines[1].split(',').nth(1).unwrap().contains("e"));
    let solution = fs::read_to_string(out.join("solution.csv")).unwrap();
    assert_eq!(solution.lines().count(), 1 + 51);
    let spectrum = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert_eq!(spectrum.lines().count(), 1 + 513);
    let manifest = fs::read_to_string(out.join("run_manifest.toml")).unwrap();
    assert!(manifest.contains("51 uniform points"));

    let again = tmp.path().join("second");
    let o = hpvpinn(&[
        "run",
        "-c",
        out.join("run_manifest.toml").to_str().unwrap(),
        "-o",
        again.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(
        fs::read(out.join("trace.csv")).unwrap(),
        fs::read(again.join("trace.csv")).unwrap()
    );
}

#[test]
fn seed_override_changes_the_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "c.toml", "");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(hpvpinn(&["run", "-c", &cfg, "-o", a.to_str().unwrap()])
        .status
        .success());
    assert!(
        hpvpinn(&["run", "-c", &cfg, "-o", b.to_str().unwrap(), "--seed", "8"])
            .status
            .success()
    );
    assert_ne!(
        fs::read(a.join("trace.csv")).unwrap(),
        fs::read(b.join("trace.csv")).unwrap()
    );
    assert!(fs::read_to_string(b.join("run_manifest.toml"))
        .unwrap()
        .contains("seeds = [8]"));
}

#[test]
fn multi_seed_run_writes_one_directory_per_seed() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "c.toml", "");
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("seeds = [7]", "seeds = [1, 2, 3]");
    fs::write(&cfg, text).unwrap();
    let out = tmp.path().join("out");
    assert!(hpvpinn(&["run", "-c", &cfg, "-o", out.to_str().unwrap()])
        .status
        .success());
    for s in 1..=3 {
        assert!(out.join(format!("seed_{s}/trace.csv")).exists());
    }
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("seeds,failed,mean_linf"));
    assert!(summary.lines().nth(1).unwrap().starts_with("3,0,"));
}

#[test]
fn sweep_runs_the_cross_product() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "c.toml", "");
    let out = tmp.path().join("sweep");
    let o = hpvpinn(&[
        "sweep",
        "-c",
        &cfg,
        "-o",
        out.to_str().unwrap(),
        "--axis",
        "network.depth=1,2,3",
        "--axis",
        "network.activation=sine,tanh",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 1 + 6);
    assert!(lines[0].starts_with("network.depth,network.activation,seeds"));
    assert!(lines[6].starts_with("3,tanh,1,0,"));
}

#[test]
fn single_cell_sweep_matches_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "c.toml", "");
    let run = tmp.path().join("run");
    let sweep = tmp.path().join("sweep");
    assert!(hpvpinn(&["run", "-c", &cfg, "-o", run.to_str().unwrap()])
        .status
        .success());
    let o = hpvpinn(&[
        "sweep",
        "-c",
        &cfg,
        "-o",
        sweep.to_str().unwrap(),
        "--axis",
        "network.depth=2",
    ]);
    assert!(o.status.success());
    assert_eq!(
        fs::read(run.join("trace.csv")).unwrap(),
        fs::read(sweep.join("cell_000/seed_7/trace.csv")).unwrap()
    );
}
