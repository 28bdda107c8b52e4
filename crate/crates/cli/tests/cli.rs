use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fogplace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fogplace")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_workload_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = fogplace(&["gen-workload", "--vms", "7", "--seed", "3", "--out-dir", path(dir.path())]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let name = "workload_n7_s3.toml";
    let text = fs::read_to_string(a.path().join(name)).unwrap();
    assert_eq!(text, fs::read_to_string(b.path().join(name)).unwrap());
    let w = fogplace::Workload::from_toml(&text).unwrap();
    assert_eq!(w.vms.len(), 7);
}

#[test]
fn export_lp_reads_a_workload_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    assert!(fogplace(&["gen-workload", "--vms", "3", "--seed", "1", "--out-dir", d]).status.success());
    let wl = dir.path().join("workload_n3_s1.toml");
    let out = fogplace(&["export-lp", "--workload", path(&wl), "--alpha", "1000", "--out-dir", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lp = fs::read_to_string(dir.path().join("workload_n3_s1.lp")).unwrap();
    assert!(lp.starts_with("\\"));
    for section in ["Minimize", "Subject To", "Bounds", "Binaries", "End"] {
        assert!(lp.contains(section), "missing {section}");
    }
}

#[test]
fn run_writes_reports_and_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.toml");
    fs::write(&cfg, "vm_counts = [3, 4]\nseeds = [1, 2]\nthreads = 1\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = fogplace(&["run", path(&cfg), "--out-dir", path(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("8 runs, 8 optimal"));
    for f in ["runs.csv", "reductions.csv", "summary.json", "status.txt", "total_power_equal.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }

    // every VM too large for any server
    fs::write(&cfg, "vm_counts = [1]\nseeds = [1]\n[workload]\ncpu_range = [3.0, 3.0]\n").unwrap();
    let out = fogplace(&["run", path(&cfg), "--out-dir", path(&out_dir)]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn infeasible_scenario_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.toml");
    fs::write(&cfg, "vm_counts = [16]\nseeds = [1]\n[workload]\ncpu_range = [2.6, 2.6]\n").unwrap();
    let out = fogplace(&["run", path(&cfg), "--out-dir", path(&dir.path().join("out"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.toml");
    fs::write(&cfg, "vm_counts = []\n").unwrap();
    assert_eq!(fogplace(&["run", path(&cfg)]).status.code(), Some(1));
    assert_eq!(fogplace(&["run", path(&dir.path().join("missing.toml"))]).status.code(), Some(1));
}

#[test]
fn oracle_check_agrees() {
    let out = fogplace(&["oracle-check", "--instances", "20", "--max-vms", "4"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("20 instances, 0 mismatches"));
}
