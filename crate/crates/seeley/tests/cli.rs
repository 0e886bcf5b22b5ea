use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seeley"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn flat_coefficients_alternate_over_factorials() {
    let cfg = config("flat_massive.toml");
    let o = run(&[
        "coefficients",
        "--config",
        cfg.to_str().unwrap(),
        "--order",
        "3",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v = json(&o);
    assert_eq!(v["config_resolved"]["order"], 3);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    for r in results {
        let f = r["f"].as_array().unwrap();
        assert_eq!(f.len(), 4);
        let mut want = 1.0;
        for (n, m) in f.iter().enumerate() {
            if n > 0 {
                want *= -1.0 / n as f64;
            }
            assert_eq!((m["rows"].as_u64(), m["cols"].as_u64()), (Some(1), Some(1)));
            let re = m["re"][0].as_f64().unwrap();
            assert!((re - want).abs() < 1e-10, "n={n}: {re}");
        }
    }
}

#[test]
fn audit_passes_and_flags_exceedance() {
    let cfg = config("sphere_pair.toml");
    let path = cfg.to_str().unwrap();
    let o = run(&[
        "audit-symmetry",
        "--config",
        path,
        "--order",
        "2",
        "--tol",
        "1e-6",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v = json(&o);
    for r in v["results"].as_array().unwrap() {
        let s = r["residuals"]["symmetry"].as_array().unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|x| x.as_f64().unwrap() <= 1e-6));
    }
    let o = run(&[
        "audit-symmetry",
        "--config",
        path,
        "--order",
        "2",
        "--tol",
        "1e-300",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn antipodal_geodesic_is_a_numerical_failure() {
    let cfg = config("sphere_antipodal.toml");
    let o = run(&["geodesic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("conjugate") && err.contains("pair 0"), "{err}");
}

#[test]
fn long_arc_reports_the_conjugate_pair() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("long.toml");
    let text = "[manifold]\ndim = 2\nmetric = \"sphere2\"\n[bundle]\nk = 1\n\
                [[points]]\nxp = [1.5707963267948966, 0.0]\nx = [1.5707963267948966, 3.7699111843077517]\n\
                v_guess = [0.0, 3.7699111843077517]\n";
    std::fs::write(&p, text).unwrap();
    let o = run(&["geodesic", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("conjugate points at parameters"), "{err}");
}

#[test]
fn geodesic_report_for_a_short_arc() {
    let cfg = config("sphere_pair.toml");
    let o = run(&["geodesic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let r = &v["results"][0];
    assert_eq!(r["conjugate_report"]["pass"], true);
    let sigma = r["sigma"].as_f64().unwrap();
    let arc = r["arc_length"].as_f64().unwrap();
    assert!((sigma - 0.5 * arc * arc).abs() < 1e-10);
}

#[test]
fn config_errors_exit_two() {
    let o = run(&["coefficients", "--config", "/nonexistent/file.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "[manifold]\ndim = 2\nmetric = \"sphere2\"\n[bundle]\nk = 1\nB = [[{ re = \"x0\", im = \"1\" }]]\n").unwrap();
    let o = run(&["coefficients", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hermiticity"));
    let o = run(&["coefficients", "--scenario", "no_such_scenario"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical() {
    let cfg = config("desitter_split.toml");
    let path = cfg.to_str().unwrap();
    let a = run(&[
        "coefficients",
        "--config",
        path,
        "--seed",
        "9",
        "--order",
        "1",
    ]);
    let b = run(&[
        "coefficients",
        "--config",
        path,
        "--seed",
        "9",
        "--order",
        "1",
    ]);
    let c = run(&[
        "coefficients",
        "--config",
        path,
        "--seed",
        "10",
        "--order",
        "1",
    ]);
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let v = json(&a);
    assert_eq!(v["results"].as_array().unwrap().len(), 4);
    assert_eq!(v["config_resolved"]["scenario"]["numerics"]["steps"], 200);
    assert_eq!(v["config_resolved"]["seed"], 9);
}

#[test]
fn csv_has_one_row_per_pair_and_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.csv");
    let cfg = config("flat_massive.toml");
    let o = run(&[
        "coefficients",
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "csv",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers[0], "pair");
    assert_eq!(rdr.records().count(), 2 * 4);
}

#[test]
fn verify_identities_on_a_gauge_scenario() {
    let cfg = config("sphere_pair.toml");
    let o = run(&[
        "verify-identities",
        "--config",
        cfg.to_str().unwrap(),
        "--order",
        "1",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v = json(&o);
    for r in v["results"].as_array().unwrap() {
        let ids = r["residuals"]["identities"].as_object().unwrap();
        assert!(ids.len() >= 10);
        assert!(ids.values().all(|x| x["pass"] == true), "{ids:?}");
    }
}

#[test]
fn fd_crosscheck_agrees_with_jets() {
    let cfg = config("sphere_pair.toml");
    let o = run(&[
        "coefficients",
        "--config",
        cfg.to_str().unwrap(),
        "--order",
        "1",
        "--fd-crosscheck",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v = json(&o);
    for r in v["results"].as_array().unwrap() {
        let fd = r["residuals"]["fd_crosscheck"].as_array().unwrap();
        assert_eq!(fd.len(), 2);
        assert!(fd.iter().all(|x| x.as_f64().unwrap() < 1e-6), "{fd:?}");
    }
}

#[test]
fn borel_demo_without_config() {
    let o = run(&["borel-demo", "--order", "5"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v = json(&o);
    let rows = v["borel"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert!(v["borel"]["taylor_defect"].as_f64().unwrap().is_finite());
}
