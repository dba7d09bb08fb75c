use std::path::Path;
use std::process::Command;

use qbmlab::io::read_columns;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_qbmlab"));
    c.env("RUST_LOG", "error");
    c
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = bin().env("QBMLAB_OUT_DIR", dir).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn columns(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    read_columns(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_matches_golden(produced: &Path, golden: &str, rel: f64) {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(golden);
    let (h1, c1) = columns(produced);
    let (h2, c2) = columns(&golden);
    assert_eq!(h1, h2);
    for (name, (a, b)) in h1.iter().zip(c1.iter().zip(&c2)) {
        assert_eq!(a.len(), b.len(), "{name}");
        for (x, y) in a.iter().zip(b) {
            if x.is_nan() || y.is_nan() {
                assert!(x.is_nan() && y.is_nan(), "{name}: {x} vs {y}");
                continue;
            }
            assert!((x - y).abs() <= rel * y.abs().max(1e-300), "{name}: {x} vs {y}");
        }
    }
}

#[test]
fn coeffs_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    run_ok(dir.path(), &["coeffs", "--alpha", "0.1", "--r", "1", "--theta", "1", "--tmax", "2", "--n", "21", "--out", out.to_str().unwrap()]);
    assert_matches_golden(&out, "coeffs_small.csv", 1e-12);
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.json")).unwrap()).unwrap();
    assert_eq!(record["reservoir"]["theta"], 1.0);
    assert_eq!(record["grid"]["n"], 21);
}

#[test]
fn observables_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    run_ok(dir.path(), &["observables", "--alpha", "0.1", "--r", "0.1", "--theta", "10", "--tmax", "20", "--n", "11", "--state", "coherent:1,0.5", "--out", out.to_str().unwrap()]);
    assert_matches_golden(&out, "observables_small.csv", 1e-12);
}

#[test]
fn mc_golden_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["mc", "--alpha", "0.1", "--r", "1", "--theta", "1", "--tmax", "5", "--n", "201", "--ntraj", "300", "--samples", "6", "--seed", "3", "--beta", "4"];
    run_ok(dir.path(), &args);
    let first = std::fs::read(dir.path().join("mc.csv")).unwrap();
    assert_matches_golden(&dir.path().join("mc.csv"), "mc_small.csv", 1e-9);

    let mut single = args.to_vec();
    single.extend(["--workers", "1"]);
    run_ok(dir.path(), &single);
    assert_eq!(std::fs::read(dir.path().join("mc.csv")).unwrap(), first);

    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("mc.json")).unwrap()).unwrap();
    assert_eq!(record["seed"], 3);
    assert!(record["multi_jump_fraction"].as_f64().unwrap() >= 0.0);
    assert!(record["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn fig1_convention_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(dir.path(), &["coeffs", "--alpha", "0.1", "--r", "0.1", "--convention", "fig1", "--r0", "0.1", "--n", "50"]);
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("coeffs.json")).unwrap()).unwrap();
    assert!((record["reservoir"]["theta"].as_f64().unwrap() - 10.0).abs() < 1e-12);
    assert_eq!(record["reservoir"]["temperature_input"]["convention"], "fig1");
}

#[test]
fn resonant_cutoff_falls_back_to_quadrature() {
    let dir = tempfile::tempdir().unwrap();
    // rc = 1 exactly
    let out = bin()
        .env("QBMLAB_OUT_DIR", dir.path())
        .env("RUST_LOG", "warn")
        .args(["coeffs", "--alpha", "0.1", "--r", "1", "--rc-over-2pi", "1", "--tmax", "3", "--n", "61"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("quadrature"));
    let (_, c) = columns(&dir.path().join("coeffs.csv"));
    assert!(c[1].iter().all(|x| x.is_finite()));
}

#[test]
fn zero_coupling_observables_are_free() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(dir.path(), &["observables", "--alpha", "0", "--r", "1", "--theta", "1", "--tmax", "5", "--n", "51", "--state", "fock:3"]);
    let (h, c) = columns(&dir.path().join("observables.csv"));
    let n = h.iter().position(|x| x == "n_mean").unwrap();
    let q = h.iter().position(|x| x == "mandel_q").unwrap();
    assert!(c[n].iter().all(|&x| x == 3.0));
    assert!(c[q].iter().all(|&x| (x + 1.0).abs() < 1e-15));
}

#[test]
fn border_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let r: f64 = run_ok(dir.path(), &["border", "critical-r"]).trim().parse().unwrap();
    assert!((0.26..=0.28).contains(&r));
    assert_eq!(run_ok(dir.path(), &["border", "classify", "--alpha", "0.1", "--r", "20", "--theta", "10"]).trim(), "lindblad-type");
    assert_eq!(run_ok(dir.path(), &["border", "classify", "--alpha", "0.1", "--r", "1", "--theta", "0.01"]).trim(), "non-lindblad-type");

    run_ok(dir.path(), &["border", "contour", "--regime", "general", "--rc-times-2pi", "10", "--nr", "8", "--nt", "41"]);
    let text = std::fs::read_to_string(dir.path().join("contour.csv")).unwrap();
    assert_eq!(text.lines().count(), 9);
    let (_, b) = columns(&dir.path().join("contour_border.csv"));
    assert!(b[0].iter().zip(&b[1]).any(|(r, t)| *r > 1.0 && t.is_finite()));

    run_ok(dir.path(), &["border", "profile", "--alpha", "0.1", "--r", "0.1", "--theta", "10"]);
    let profile = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(profile.lines().any(|l| l.starts_with("delta,")));
}

#[test]
fn wigner_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(dir.path(), &["wigner", "--alpha", "0.01", "--r", "0.05", "--rc-over-2pi", "1e-7", "--alpha0", "1,0", "--tmax", "50", "--times", "0,10", "--resolution", "5"]);
    let (_, c) = columns(&dir.path().join("wigner.csv"));
    assert_eq!((c[1][0], c[2][0], c[3][0]), (1.0, 0.0, 0.5));
    let (_, f) = columns(&dir.path().join("wigner_field.csv"));
    assert_eq!(f[0].len(), 50);
    let peak = f[3].iter().copied().fold(0.0, f64::max);
    assert!((peak - 1.0 / (std::f64::consts::PI * 0.5)).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| {
        bin().env("QBMLAB_OUT_DIR", dir.path()).args(args).output().unwrap().status.code()
    };
    assert_eq!(code(&["coeffs", "--alpha", "0.1", "--r", "1"]), Some(2));
    assert_eq!(code(&["coeffs", "--alpha=-0.1", "--r", "1", "--theta", "1"]), Some(2));
    assert_eq!(code(&["mc", "--alpha", "0.1", "--r", "1", "--theta", "1", "--state", "squeezed:0.5"]), Some(2));
    assert_eq!(code(&["mc", "--alpha", "0.1", "--r", "1", "--theta", "1", "--state", "fock:3", "--n-max", "5"]), Some(2));
    assert_eq!(code(&["nonsense"]), Some(2));
    // a jump pushes the cutoff past its tolerance: numerical failure
    assert_eq!(
        code(&["mc", "--alpha", "0.1", "--r", "1", "--theta", "1", "--tmax", "5", "--n", "101", "--state", "fock:2", "--n-max", "6", "--beta", "200", "--ntraj", "10"]),
        Some(3)
    );
}
