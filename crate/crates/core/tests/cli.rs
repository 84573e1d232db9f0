use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gaussian_qmc::cli::{EXIT_CONFIG, EXIT_OK};
use gaussian_qmc::output::{DISSOCIATION_HEADER, HUBBARD_HEADER, KERNEL_HEADER};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gaussian-qmc"));
    cmd.args(args).env_remove("GQMC_THREADS");
    if let Some(n) = threads {
        cmd.env("GQMC_THREADS", n);
    }
    cmd.output().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest(csv: &Path) -> String {
    fs::read_to_string(csv.with_extension("manifest")).unwrap()
}

#[test]
fn kernel_check_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/kernel.csv");
    let o = run(&["kernel-check", "--set", "states=6", "--seed", "11", "--output", path_str(&out)], None);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some(KERNEL_HEADER));
    assert_eq!(text.lines().count(), 7);
    let m = manifest(&out);
    assert!(m.starts_with("version = "));
    for line in ["seed = 11", "states = 6", "result.passed = true"] {
        assert!(m.lines().any(|l| l == line), "missing {line:?} in\n{m}");
    }
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let missing = run(&["hubbard", "--set", "lx=2", "--output", path_str(&out)], None);
    assert_eq!(missing.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("ly"));

    let ed = configs().join("ed_2x2_mu0.conf");
    let wrong_mode = run(&["hubbard", "--config", path_str(&ed), "--output", path_str(&out)], None);
    assert_eq!(wrong_mode.status.code(), Some(EXIT_CONFIG));

    let unknown = run(&["kernel-check", "--set", "colour=red", "--output", path_str(&out)], None);
    assert_eq!(unknown.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("colour"));

    let bad_threads = run(&["kernel-check", "--set", "states=1", "--output", path_str(&out)], Some("0"));
    assert_eq!(bad_threads.status.code(), Some(EXIT_CONFIG));

    assert_eq!(run(&["frobnicate"], None).status.code(), Some(EXIT_CONFIG));
    assert!(!out.exists());
}

#[test]
fn hubbard_output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let conf = configs().join("hubbard_2x2_mu2.conf");
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("h{threads}.csv"));
        let o = run(
            &[
                "hubbard",
                "--config",
                path_str(&conf),
                "--set",
                "trajectories=40",
                "--set",
                "branch_target=40",
                "--set",
                "tau_max=0.5",
                "--set",
                "batches=4",
                "--output",
                path_str(&out),
            ],
            Some(threads),
        );
        assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
        files.push(fs::read(&out).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files.remove(0)).unwrap();
    assert_eq!(text.lines().next(), Some(HUBBARD_HEADER));
    assert_eq!(text.lines().count(), 4);
    let m = manifest(&dir.path().join("h1.csv"));
    assert!(m.lines().any(|l| l == "result.weight_violations = 0"));
    assert!(m.lines().any(|l| l == "trajectories = 40"));
}

#[test]
fn dissociation_run_reports_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let conf = configs().join("dissociation_fermi.conf");
    let o = run(
        &[
            "dissociation",
            "--config",
            path_str(&conf),
            "--set",
            "trajectories=200",
            "--set",
            "time_max=0.1",
            "--output",
            path_str(&out),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some(DISSOCIATION_HEADER));
    assert_eq!(text.lines().count(), 12);
    assert!(manifest(&out).lines().any(|l| l.starts_with("result.truncated_at = ")));
}

#[test]
fn ed_table_matches_fixture() {
    let dir = tempfile::tempdir().unwrap();
    for mu in ["0", "2"] {
        let out = dir.path().join(format!("ed{mu}.txt"));
        let conf = configs().join(format!("ed_2x2_mu{mu}.conf"));
        let o = run(&["ed", "--config", path_str(&conf), "--output", path_str(&out)], None);
        assert_eq!(o.status.code(), Some(EXIT_OK));
        let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("tests/fixtures/ed_2x2_mu{mu}.txt"));
        assert_eq!(fs::read_to_string(&out).unwrap(), fs::read_to_string(fixture).unwrap());
    }
}
