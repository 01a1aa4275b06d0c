use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn relwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relwave")).args(args).output().expect("binary runs")
}

fn setup(config: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, config).unwrap();
    (dir, path)
}

fn run_ok(cmd: &str, cfg: &Path, overrides: &[&str]) -> Output {
    let mut args = vec![cmd, cfg.to_str().unwrap()];
    args.extend_from_slice(overrides);
    let out = relwave(&args);
    assert!(
        out.status.success(),
        "{cmd} failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

/// Matrix Market triplets as `(row, col, re, im)`, zero-based.
fn triplets(path: &Path) -> Vec<(usize, usize, f64, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[0].parse::<usize>().unwrap() - 1, f[1].parse::<usize>().unwrap() - 1, f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn evolve_free_dirac_conserves_the_norm_column() {
    let (dir, cfg) = setup("");
    run_ok("evolve", &cfg, &[]);
    let data = rows(&dir.path().join("out/run_trajectory.csv"));
    assert_eq!(data.len(), 1001);
    let n0 = data[0][1];
    assert!((n0 - 1.0).abs() <= 1e-12);
    assert!(data.iter().all(|r| (r[1] - n0).abs() <= 1e-12));
    assert!(dir.path().join("out/run_final.snap").is_file());
}

#[test]
fn snapshot_reloads_bitwise() {
    let (dir, cfg) = setup("[grid]\npoints = 16\n[evolution]\nsteps = 20\nt1 = 0.1\n[output]\ncolumns = \"components\"\n");
    run_ok("evolve", &cfg, &[]);
    let last = rows(&dir.path().join("out/run_trajectory.csv")).pop().unwrap();
    // the first row of a run started from the snapshot is the snapshot itself
    run_ok(
        "evolve",
        &cfg,
        &["initial.kind=snapshot", "initial.path=out/run_final.snap", "evolution.steps=1", "output.prefix=reload"],
    );
    let first = rows(&dir.path().join("out/reload_trajectory.csv")).remove(0);
    assert_eq!(last[1..], first[1..]);
    let snap = fs::read(dir.path().join("out/run_final.snap")).unwrap();
    assert_eq!(&snap[..6], b"RWSNAP");
}

#[test]
fn outputs_are_deterministic() {
    let (dir, cfg) = setup("[grid]\npoints = 16\n[evolution]\nsteps = 50\n[bundle]\nframes = \"smooth_random\"\nepsilon = 0.02\nsamples = 3\nresidual_tolerance = 1.0\n");
    let read = |name: &str| fs::read(dir.path().join("out").join(name)).unwrap();
    run_ok("evolve", &cfg, &[]);
    run_ok("transport", &cfg, &[]);
    let first = [read("run_trajectory.csv"), read("run_gamma.csv"), read("run_transport.json"), read("run_lifting_residual.csv")];
    run_ok("evolve", &cfg, &[]);
    run_ok("transport", &cfg, &[]);
    let second = [read("run_trajectory.csv"), read("run_gamma.csv"), read("run_transport.json"), read("run_lifting_residual.csv")];
    assert_eq!(first, second);
}

#[test]
fn verify_default_config_passes() {
    let (dir, cfg) = setup("");
    let out = run_ok("verify", &cfg, &[]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 failed"));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("out/run_verify.json")).unwrap()).unwrap();
    assert_eq!(json["pass"], true);
    assert!(json["checks"].as_array().unwrap().len() >= 20);
    assert!(dir.path().join("out/run_verify.txt").is_file());
}

#[test]
fn failing_checks_exit_with_one() {
    let (_dir, cfg) = setup("[verify]\ntolerance = 0.0\nonly = [\"dirac.unitarity\"]\n");
    let out = relwave(&["verify", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn identity_frames_give_gamma_equal_to_minus_i_h() {
    let (dir, cfg) = setup("[grid]\npoints = 8\n[evolution]\nsteps = 10\nt1 = 0.1\n[bundle]\nepsilon = 0.01\nsamples = 2\nresidual_tolerance = 1.0\n[model]\nhbar = 0.5\nc = 1.5\n");
    run_ok("reduce", &cfg, &[]);
    run_ok("transport", &cfg, &[]);
    let h = triplets(&dir.path().join("out/run_hamiltonian.mtx"));
    let gamma: Vec<Vec<String>> = fs::read_to_string(dir.path().join("out/run_gamma.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    let at_zero: Vec<_> = gamma.iter().filter(|r| r[0].parse::<f64>().unwrap() == 0.0).collect();
    assert_eq!(at_zero.len(), h.iter().filter(|t| t.2 != 0.0 || t.3 != 0.0).count());
    let hbar = 0.5;
    for (r, c, re, im) in h {
        if re == 0.0 && im == 0.0 {
            continue;
        }
        let row = at_zero.iter().find(|g| g[1] == r.to_string() && g[2] == c.to_string()).expect("entry present");
        // Γ = -(i/ħ) H
        assert!((row[3].parse::<f64>().unwrap() - im / hbar).abs() <= 1e-14);
        assert!((row[4].parse::<f64>().unwrap() + re / hbar).abs() <= 1e-14);
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("out/run_transport.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
}

#[test]
fn free_klein_gordon_reduces_to_an_anti_diagonal_block_pattern() {
    let (dir, cfg) = setup("[model]\nname = \"kg_canonical\"\n[grid]\npoints = 8\n");
    run_ok("reduce", &cfg, &[]);
    let t = triplets(&dir.path().join("out/run_hamiltonian.mtx"));
    assert!(!t.is_empty());
    // site-major layout: component = index % 2
    assert!(t.iter().all(|(r, c, _, _)| r % 2 != c % 2));
    let desc: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("out/run_system.json")).unwrap()).unwrap();
    assert_eq!(desc["order"], 2);
    assert_eq!(desc["companion"], "block");
    assert_eq!(desc["coefficients"], serde_json::json!(["kg_f0", "kg_f1"]));
}

#[test]
fn first_order_system_has_no_companion() {
    let (dir, cfg) = setup("[grid]\npoints = 8\n");
    run_ok("reduce", &cfg, &[]);
    let desc: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("out/run_system.json")).unwrap()).unwrap();
    assert_eq!(desc["order"], 1);
    assert_eq!(desc["companion"], "none");
}

#[test]
fn equation_section_drives_the_reduction() {
    let (dir, cfg) = setup("[grid]\npoints = 8\n[equation]\ncoefficients = [\"laplacian - 2 * identity\", \"0\"]\nnames = [\"stiffness\", \"damping\"]\n");
    run_ok("reduce", &cfg, &[]);
    let desc: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("out/run_system.json")).unwrap()).unwrap();
    assert_eq!(desc["source"], "equation");
    assert_eq!(desc["coefficients"], serde_json::json!(["stiffness", "damping"]));
    let (_d, bad) = setup("[equation]\ncoefficients = [\"lapl\"]\n");
    let out = relwave(&["reduce", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lapl"));
}

#[test]
fn malformed_keys_exit_with_two_and_name_the_key() {
    let (_dir, cfg) = setup("[evolution]\nstepz = 10\n");
    let out = relwave(&["evolve", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stepz"));
    let (_dir, cfg) = setup("");
    let out = relwave(&["evolve", cfg.to_str().unwrap(), "grid.pointz=8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pointz"));
    assert_eq!(relwave(&["evolve"]).status.code(), Some(2));
    assert_eq!(relwave(&["evolve", "/nonexistent/run.toml"]).status.code(), Some(2));
}

#[test]
fn oracle_writes_every_mode() {
    let (dir, cfg) = setup("[grid]\npoints = 8\n");
    run_ok("oracle", &cfg, &[]);
    let text = fs::read_to_string(dir.path().join("out/run_spectra.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("mode_x,mode_y,mode_z,k_tilde2,index,re,im,analytic,defective"));
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 8 * 4);
    for l in body {
        let f: Vec<&str> = l.split(',').collect();
        let (re, ex): (f64, f64) = (f[5].parse().unwrap(), f[7].parse().unwrap());
        assert!((re - ex).abs() <= 1e-12);
    }
}

#[test]
fn convergence_reports_second_order() {
    let (dir, cfg) = setup("");
    run_ok("convergence", &cfg, &[]);
    let study: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/run_convergence_study.json")).unwrap()).unwrap();
    let p = study["order"].as_f64().unwrap();
    assert!((1.9..=2.1).contains(&p), "{p}");
    assert_eq!(rows(&dir.path().join("out/run_convergence.csv")).len(), 4);
}

#[test]
fn shipped_example_config_reduces() {
    let example = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/dirac_transport.toml");
    let (dir, cfg) = setup(&fs::read_to_string(example).unwrap());
    run_ok("reduce", &cfg, &[]);
    assert!(dir.path().join("out/dirac_system.json").is_file());
}
