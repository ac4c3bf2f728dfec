//! End-to-end tests of the command-line interface, exercising exit codes,
//! file outputs and determinism through the real binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rootpcp::io::{load_matrix_csv, save_pgm};
use rootpcp::linalg::{frobenius_norm, DenseMatrix};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rootpcp"))
}

struct TestDir(PathBuf);

impl TestDir {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("rootpcp-cli-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        Self(dir)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}

impl Drop for TestDir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

fn assert_exit(output: &Output, expected: i32) {
    assert_eq!(
        output.status.code(),
        Some(expected),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

/// The run summary minus timing lines, for determinism comparisons.
fn summary_without_timing(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|line| !line.starts_with("wall_time"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn decompose_zero_matrix_yields_zero_components() {
    let dir = TestDir::new("zero");
    let input = dir.path("d.csv");
    fs::write(&input, "0,0,0\n0,0,0\n0,0,0\n").unwrap();
    let out_dir = dir.path("out");
    let output = bin()
        .args(["decompose", "--input"])
        .arg(&input)
        .arg("--output-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_exit(&output, 0);
    let l = load_matrix_csv(&out_dir.join("l.csv")).unwrap();
    let s = load_matrix_csv(&out_dir.join("s.csv")).unwrap();
    assert!(l.entries().iter().all(|&x| x == 0.0));
    assert!(s.entries().iter().all(|&x| x == 0.0));
    let summary = fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("converged=true"), "{summary}");
    // the effective parameters are echoed
    assert!(summary.contains("lambda="), "{summary}");
    assert!(summary.contains("mu="), "{summary}");
    assert!(summary.contains("rho_init="), "{summary}");
}

#[test]
fn simulate_then_decompose_recovers_noiseless_truth() {
    let dir = TestDir::new("roundtrip");
    let sim_dir = dir.path("sim");
    let output = bin()
        .args([
            "simulate",
            "--n1",
            "80",
            "--n2",
            "80",
            "--rank",
            "3",
            "--rho-s",
            "0.05",
            "--sigma",
            "0",
            "--seed",
            "4242",
            "--output-dir",
        ])
        .arg(&sim_dir)
        .output()
        .unwrap();
    assert_exit(&output, 0);

    let out_dir = dir.path("out");
    let output = bin()
        .args(["decompose", "--input"])
        .arg(sim_dir.join("d.csv"))
        .arg("--output-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_exit(&output, 0);

    let l_hat = load_matrix_csv(&out_dir.join("l.csv")).unwrap();
    let l0 = load_matrix_csv(&sim_dir.join("l0.csv")).unwrap();
    let rel = frobenius_norm(&l_hat.sub(&l0)) / frobenius_norm(&l0);
    assert!(rel <= 1e-3, "relative error {rel}");
}

#[test]
fn identical_arguments_give_identical_outputs() {
    let dir = TestDir::new("determinism");
    let sim_dir = dir.path("sim");
    bin()
        .args([
            "simulate",
            "--n1",
            "30",
            "--n2",
            "30",
            "--rank",
            "2",
            "--sigma",
            "0.01",
            "--seed",
            "7",
            "--output-dir",
        ])
        .arg(&sim_dir)
        .output()
        .unwrap();

    let mut results = Vec::new();
    for run in 0..2 {
        let out_dir = dir.path(&format!("out{run}"));
        let output = bin()
            .args(["decompose", "--input"])
            .arg(sim_dir.join("d.csv"))
            .arg("--output-dir")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_exit(&output, 0);
        results.push((
            fs::read(out_dir.join("l.csv")).unwrap(),
            fs::read(out_dir.join("s.csv")).unwrap(),
            summary_without_timing(&out_dir.join("summary.txt")),
        ));
    }
    assert_eq!(results[0].0, results[1].0);
    assert_eq!(results[0].1, results[1].1);
    assert_eq!(results[0].2, results[1].2);
}

#[test]
fn config_file_applies_and_flags_override_it() {
    let dir = TestDir::new("config");
    let input = dir.path("d.csv");
    fs::write(&input, "1,0\n0,1\n").unwrap();
    let config = dir.path("solver.conf");
    fs::write(&config, "# sample config\neps_abs = 1e-3\nmax_iters = 7\n").unwrap();

    let out_a = dir.path("a");
    let output = bin()
        .args(["decompose", "--input"])
        .arg(&input)
        .arg("--config")
        .arg(&config)
        .arg("--output-dir")
        .arg(&out_a)
        .output()
        .unwrap();
    assert_exit(&output, 0);
    let summary = fs::read_to_string(out_a.join("summary.txt")).unwrap();
    assert!(summary.contains("eps_abs=1.000000000000e-3"), "{summary}");
    assert!(summary.contains("max_iters=7"), "{summary}");

    let out_b = dir.path("b");
    let output = bin()
        .args(["decompose", "--input"])
        .arg(&input)
        .arg("--config")
        .arg(&config)
        .args(["--eps-abs", "1e-7", "--output-dir"])
        .arg(&out_b)
        .output()
        .unwrap();
    assert_exit(&output, 0);
    let summary = fs::read_to_string(out_b.join("summary.txt")).unwrap();
    assert!(summary.contains("eps_abs=1.000000000000e-7"), "{summary}");
    assert!(summary.contains("max_iters=7"), "{summary}");

    // unknown config keys are usage errors
    fs::write(&config, "bogus=1\n").unwrap();
    let output = bin()
        .args(["decompose", "--input"])
        .arg(&input)
        .arg("--config")
        .arg(&config)
        .arg("--output-dir")
        .arg(dir.path("c"))
        .output()
        .unwrap();
    assert_exit(&output, 1);
}

#[test]
fn usage_errors_exit_one() {
    // missing required --coefficients grid
    let output = bin()
        .args([
            "sweep-mu",
            "--n",
            "20",
            "--rank",
            "2",
            "--out",
            "/tmp/x.csv",
        ])
        .output()
        .unwrap();
    assert_exit(&output, 1);

    let output = bin().arg("no-such-subcommand").output().unwrap();
    assert_exit(&output, 1);

    let output = bin()
        .args(["decompose", "--no-such-flag"])
        .output()
        .unwrap();
    assert_exit(&output, 1);

    // unknown noise model kind
    let dir = TestDir::new("badnoise");
    let output = bin()
        .args([
            "sweep-noise",
            "--n",
            "20",
            "--rank",
            "2",
            "--models",
            "banana",
            "--sigmas",
            "0.01",
            "--trials",
            "1",
            "--out",
        ])
        .arg(dir.path("x.csv"))
        .output()
        .unwrap();
    assert_exit(&output, 1);
}

#[test]
fn strict_flag_reports_non_convergence() {
    let dir = TestDir::new("strict");
    let input = dir.path("d.csv");
    fs::write(&input, "1,2,3\n4,5,6\n7,8,10\n").unwrap();
    let output = bin()
        .args(["decompose", "--input"])
        .arg(&input)
        .args(["--max-iters", "2", "--strict", "--output-dir"])
        .arg(dir.path("out"))
        .output()
        .unwrap();
    assert_exit(&output, 3);
    // without --strict the same run exits 0 and reports converged=false
    let output = bin()
        .args(["decompose", "--input"])
        .arg(&input)
        .args(["--max-iters", "2", "--output-dir"])
        .arg(dir.path("out2"))
        .output()
        .unwrap();
    assert_exit(&output, 0);
    let summary = fs::read_to_string(dir.path("out2").join("summary.txt")).unwrap();
    assert!(summary.contains("converged=false"), "{summary}");
}

#[test]
fn sweep_sigma_writes_csv_deterministically() {
    let dir = TestDir::new("sweepcsv");
    let run = |name: &str| {
        let out = dir.path(name);
        let output = bin()
            .args([
                "sweep-sigma",
                "--n",
                "25",
                "--rank",
                "2",
                "--sigmas",
                "0.005,0.01",
                "--trials",
                "2",
                "--seed-base",
                "11",
                "--out",
            ])
            .arg(&out)
            .output()
            .unwrap();
        assert_exit(&output, 0);
        fs::read_to_string(&out).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert!(a.starts_with("param,value,formulation,noise,"), "{a}");
    assert_eq!(a.lines().count(), 3);
    // identical bytes after dropping the wall-time column
    let strip = |csv: &str| {
        csv.lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn check_reports_optimality_fields() {
    let dir = TestDir::new("check");
    let sim_dir = dir.path("sim");
    bin()
        .args([
            "simulate",
            "--n1",
            "25",
            "--n2",
            "25",
            "--rank",
            "2",
            "--sigma",
            "0.02",
            "--seed",
            "99",
            "--output-dir",
        ])
        .arg(&sim_dir)
        .output()
        .unwrap();
    let out_dir = dir.path("out");
    bin()
        .args(["decompose", "--input"])
        .arg(sim_dir.join("d.csv"))
        .arg("--output-dir")
        .arg(&out_dir)
        .output()
        .unwrap();

    let output = bin()
        .args(["check", "--l"])
        .arg(out_dir.join("l.csv"))
        .arg("--s")
        .arg(out_dir.join("s.csv"))
        .arg("--d")
        .arg(sim_dir.join("d.csv"))
        .output()
        .unwrap();
    assert_exit(&output, 0);
    let stdout = String::from_utf8(output.stdout).unwrap();
    for key in [
        "residual_norm=",
        "spectral_ratio=",
        "linf_ratio=",
        "nuclear_gap=",
        "l1_gap=",
    ] {
        assert!(stdout.contains(key), "missing {key} in {stdout}");
    }
}

#[test]
fn frame_stacks_decompose_to_frame_outputs() {
    let dir = TestDir::new("frames");
    let frames_dir = dir.path("frames");
    fs::create_dir_all(&frames_dir).unwrap();
    // a static background with a moving bright block
    for f in 0..4 {
        let frame = DenseMatrix::from_fn(6, 8, |y, x| {
            let background = 40.0 + 10.0 * ((y + x) % 3) as f64;
            if x == f && y < 2 {
                220.0
            } else {
                background
            }
        });
        save_pgm(&frames_dir.join(format!("hall_{f:02}.pgm")), &frame).unwrap();
    }
    let out_dir = dir.path("out");
    let output = bin()
        .args(["decompose", "--frames-dir"])
        .arg(&frames_dir)
        .arg("--output-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_exit(&output, 0);
    for component in ["L", "S", "Z"] {
        let count = fs::read_dir(out_dir.join(component)).unwrap().count();
        assert_eq!(count, 4, "{component} frame count");
    }
    assert!(out_dir.join("summary.txt").exists());
}
