use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

// Small dictionary so a recovery finishes in seconds.
const SMALL_GRID: &[&str] = &[
    "--gamma-max",
    "30",
    "--omega-max",
    "300",
    "--max-iters",
    "300",
];

fn bathspec(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bathspec"))
        .arg("--out-dir")
        .arg(out_dir)
        .args(args)
        .env_remove("BATHSPEC_LOG")
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(
        &fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())),
    )
    .unwrap()
}

fn synth_small(dir: &Path) {
    ok(bathspec(
        dir,
        &[
            "synth",
            "--atom",
            "12,100,1",
            "--atom",
            "6,220,0.5",
            "--n-samples",
            "400",
            "--gap-steps",
            "20000",
        ],
    ));
}

fn fmo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/fmo_adolphs_renger.csv")
}

#[test]
fn synth_autocorr_recover_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_small(d);
    assert!(d.join("gaps.csv").exists());
    let gaps = d.join("gaps.csv");
    ok(bathspec(
        d,
        &[
            "autocorr",
            "--input",
            gaps.to_str().unwrap(),
            "--dt-fs",
            "4",
            "--max-lag",
            "200",
        ],
    ));
    let corr = d.join("correlation.csv");
    let mut args = vec!["recover", "--input", corr.to_str().unwrap()];
    args.extend_from_slice(SMALL_GRID);
    ok(bathspec(d, &args));

    let atoms = json(d.join("atoms.json"));
    assert!(atoms["atoms"].as_array().is_some_and(|a| !a.is_empty()));
    assert_eq!(atoms["n_lags"], 200);

    let manifest = json(d.join("manifest_recover.json"));
    assert_eq!(manifest["subcommand"], "recover");
    assert_eq!(manifest["parameters"]["grid"]["gamma_max"], 30.0);
    let inputs = manifest["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 1);
    assert_eq!(inputs[0]["sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .any(|o| o.as_str().unwrap().ends_with("atoms.json")));
    for name in ["manifest_synth.json", "manifest_autocorr.json"] {
        assert!(d.join(name).exists(), "{name}");
    }
}

#[test]
fn model_kernel_and_propagate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let atoms = d.join("in_atoms.json");
    fs::write(
        &atoms,
        r#"{"atoms": [{"gamma_cm1": 50, "omega_cm1": 0, "amplitude": 2500}, {"gamma_cm1": 30, "omega_cm1": 180, "amplitude": 800}]}"#,
    )
    .unwrap();
    ok(bathspec(
        d,
        &[
            "model",
            "--atoms",
            atoms.to_str().unwrap(),
            "--temperature",
            "77",
        ],
    ));
    let model = json(d.join("model.json"));
    assert_eq!(model["temperature_k"], 77.0);
    assert!(model["reorganization_energy_cm1"].as_f64().unwrap() > 0.0);

    let model_path = d.join("model.json");
    ok(bathspec(
        d,
        &[
            "kernel",
            "--model",
            model_path.to_str().unwrap(),
            "--t-max",
            "100",
        ],
    ));
    let kernel = fs::read_to_string(d.join("kernel.csv")).unwrap();
    assert!(kernel.starts_with("t_fs,re_D,im_D"));
    assert_eq!(kernel.lines().count(), 102);

    ok(bathspec(
        d,
        &[
            "propagate",
            "--hamiltonian",
            fmo().to_str().unwrap(),
            "--model",
            model_path.to_str().unwrap(),
            "--t-max",
            "200",
            "--observables",
            "site:1,site:2,exciton:1-3",
        ],
    ));
    let dynamics = fs::read_to_string(d.join("dynamics.csv")).unwrap();
    let mut lines = dynamics.lines();
    assert_eq!(
        lines.next().unwrap(),
        "time_fs,pop_site_1,pop_site_2,re_exciton_1-3,im_exciton_1-3,min_eigenvalue"
    );
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(first[0], 0.0);
    assert!((first[1] - 1.0).abs() < 1e-12);
    assert_eq!(dynamics.lines().count(), 202);
}

#[test]
fn compare_writes_three_curves() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(bathspec(
        d,
        &["synth", "--atom", "12,100,1", "--n-samples", "800"],
    ));
    let corr = d.join("correlation.csv");
    let mut args = vec![
        "compare",
        "--input",
        corr.to_str().unwrap(),
        "--freq-max",
        "300",
        "--freq-step",
        "1",
    ];
    args.extend_from_slice(SMALL_GRID);
    ok(bathspec(d, &args));
    let text = fs::read_to_string(d.join("compare.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "frequency_cm1,J_fft_full,J_fft_truncated,J_recovered"
    );
    assert_eq!(lines.count(), 301);
    let record = json(d.join("atoms_compare.json"));
    assert_eq!(record["n_lags"], 200);
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let names = [
        "correlation.csv",
        "gaps.csv",
        "atoms.json",
        "synth_spec.json",
    ];
    let mut runs = Vec::new();
    for _ in 0..2 {
        ok(bathspec(
            d,
            &[
                "--seed",
                "11",
                "synth",
                "--atom",
                "12,100,1",
                "--n-samples",
                "300",
                "--noise",
                "0.01",
                "--gap-steps",
                "5000",
            ],
        ));
        let corr = d.join("correlation.csv");
        let mut args = vec![
            "recover",
            "--input",
            corr.to_str().unwrap(),
            "--output",
            "atoms.json",
        ];
        args.extend_from_slice(SMALL_GRID);
        ok(bathspec(d, &args));
        runs.push(names.map(|n| fs::read(d.join(n)).unwrap()));
    }
    for (k, name) in names.iter().enumerate() {
        assert!(runs[0][k] == runs[1][k], "{name} differs between runs");
    }
}

#[test]
fn seed_changes_the_noise() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (d, seed) in [(a.path(), "1"), (b.path(), "2")] {
        ok(bathspec(
            d,
            &[
                "--seed",
                seed,
                "synth",
                "--atom",
                "12,100,1",
                "--n-samples",
                "50",
                "--noise",
                "0.1",
            ],
        ));
    }
    assert_ne!(
        fs::read(a.path().join("correlation.csv")).unwrap(),
        fs::read(b.path().join("correlation.csv")).unwrap()
    );
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bathspec(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(bathspec(dir.path(), &["fft"]).status.code(), Some(2));
    assert_eq!(
        bathspec(dir.path(), &["synth", "--n-samples", "many"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn runtime_errors_exit_1_and_remove_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = d.join("nope.csv");
    let out = bathspec(
        d,
        &["fft", "--input", missing.to_str().unwrap(), "--dt-fs", "4"],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.starts_with("error:") && stderr.contains("nope.csv"),
        "{stderr}"
    );

    // synth writes its spec and correlation before the gap trajectory fails
    let out = bathspec(
        d,
        &[
            "synth",
            "--atom",
            "12,100,1",
            "--n-samples",
            "50",
            "--gap-steps",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let left: Vec<_> = fs::read_dir(d)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert!(left.is_empty(), "left behind: {left:?}");
}

#[test]
fn environment_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bathspec"))
        .args(["synth", "--atom", "12,100,1"])
        .env("BATHSPEC_OUT_DIR", dir.path())
        .env("BATHSPEC_N_SAMPLES", "37")
        .output()
        .unwrap();
    ok(out);
    let text = fs::read_to_string(dir.path().join("correlation.csv")).unwrap();
    assert_eq!(text.lines().count(), 38);
    let manifest = json(dir.path().join("manifest_synth.json"));
    assert_eq!(manifest["parameters"]["n_samples"], 37);
}

#[test]
fn fft_of_synthetic_correlation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(bathspec(
        d,
        &[
            "synth",
            "--atom",
            "30,200,1",
            "--n-samples",
            "4000",
            "--dt-fs",
            "1",
        ],
    ));
    let corr = d.join("correlation.csv");
    ok(bathspec(
        d,
        &[
            "fft",
            "--input",
            corr.to_str().unwrap(),
            "--freq-max",
            "400",
            "--freq-step",
            "1",
        ],
    ));
    let text = fs::read_to_string(d.join("spectral_density_fft.csv")).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    let peak = rows.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert!((peak.0 - 200.0).abs() <= 5.0, "peak at {}", peak.0);
}
