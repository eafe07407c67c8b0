use mems_cli::emit::{curve_from_csv, curve_from_json, curve_to_csv, curve_to_json, sha256_file, CURVE_HEADER};
use mems_core::{BifurcationCurve, CurvePoint, TermCause};
use proptest::prelude::*;
use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn mems(args: &[&str], out: &Path, env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mems"));
    c.args(args).arg("--out").arg(out).env_remove("MEMS_NUM_THREADS");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().expect("binary runs")
}

fn summary(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("summary json on stdout")
}

fn outputs(dir: &Path) -> Vec<(String, String)> {
    let m: Value = serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    m["outputs"].as_array().unwrap().iter().map(|o| (o["file"].as_str().unwrap().to_string(), o["sha256"].as_str().unwrap().to_string())).collect()
}

fn cause() -> impl Strategy<Value = TermCause> {
    prop_oneof![Just(TermCause::None), Just(TermCause::EndOfGrid), Just(TermCause::DeadEnd), Just(TermCause::NoConvergence), Just(TermCause::Gap)]
}

fn point() -> impl Strategy<Value = CurvePoint> {
    (-1.0f64..0.0, any::<f64>().prop_filter("finite", |x| x.is_finite()), 0u32..5, any::<bool>(), cause())
        .prop_map(|(alpha, lambda, branch_id, fold_flag, term_cause)| CurvePoint { alpha, abs_u0: -alpha, lambda, branch_id, fold_flag, term_cause })
}

proptest! {
    #[test]
    fn csv_and_json_round_trip(eps in 0.0f64..5.0, points in prop::collection::vec(point(), 1..40)) {
        let c = BifurcationCurve { eps, points };
        prop_assert_eq!(&curve_from_csv(&curve_to_csv(&c).unwrap(), eps).unwrap(), &c);
        prop_assert_eq!(&curve_from_json(&curve_to_json(&c).unwrap()).unwrap(), &c);
    }
}

#[test]
fn csv_header_is_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let o = mems(&["bifurcation2d", "--eps", "0.5", "--points", "20"], dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("bifurcation2d_eps0.5.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "alpha,abs_u0,lambda,branch_id,fold_flag,term_cause");
    assert_eq!(CURVE_HEADER.join(","), "alpha,abs_u0,lambda,branch_id,fold_flag,term_cause");
    let curve = curve_from_csv(text.as_bytes(), 0.5).unwrap();
    assert_eq!(curve.last_cause(), Some(TermCause::DeadEnd));
    // 17 significant digits in every float column.
    let row = text.lines().nth(1).unwrap();
    assert_eq!(row.split(',').next().unwrap().split('e').next().unwrap().trim_start_matches('-').len(), 18);
}

#[test]
fn delta0star_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = mems(&["delta0star", "--bracket", "10", "30", "--tol", "1e-3"], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let d = summary(&o)["result"]["delta0_star"].as_f64().unwrap();
    assert!((18.13..=18.16).contains(&d), "{d}");
}

#[test]
fn coeffs1d_reports_fields_and_identities() {
    let dir = tempfile::tempdir().unwrap();
    let o = mems(&["coeffs1d", "--eps", "0.5"], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let r = &summary(&o)["result"];
    for k in ["eps", "lambda1", "lambda32", "lambda2", "b1", "a_half", "a_fivequarters"] {
        assert!(r["coeffs"][k].is_number(), "missing {k}");
    }
    assert_eq!(r["all_identities_hold"], Value::Bool(true));
}

#[test]
fn config_errors_exit_two_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 4] = [
        (&["coeffs1d", "--eps", "-1"], "eps"),
        (&["coeffs1d", "--eps", "1", "--tol", "1e-3"], "tol"),
        (&["bifurcation2d", "--alpha-start", "-0.5", "--alpha-end", "-0.2"], "alpha_end"),
        (&["outer-appc", "--eps", "0.1"], "delta"),
    ];
    for (args, key) in cases {
        let o = mems(args, dir.path(), &[]);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(key), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "command = \"coeffs1d\"\n[params]\nepsilon = 0.5\n").unwrap();
    let o = mems(&["--config", cfg.to_str().unwrap()], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilon"));
    let o = mems(&["coeffs1d", "--eps", "1"], dir.path(), &[("MEMS_NUM_THREADS", "zero")]);
    assert_eq!(o.status.code(), Some(2));
    let o = mems(&[], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // A 1e6 window is too short to resolve one far-field period.
    let o = mems(&["innerfit2d", "--delta0", "5", "--rho-max", "1e6"], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("numerical failure"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "command = \"bifurcation1d\"\n[params]\neps = 0.5\npoints = 40\nalpha_end = -0.9\n").unwrap();
    let out = dir.path().join("o");
    let o = mems(&["--config", cfg.to_str().unwrap(), "--points", "12"], &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["params"]["points"], 12);
    assert_eq!(m["config"]["params"]["alpha_end"], -0.9);
    let c = curve_from_csv(&std::fs::read(out.join("bifurcation1d_eps0.5.csv")).unwrap(), 0.5).unwrap();
    assert_eq!(c.len(), 12);
}

#[test]
fn outputs_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = ["bifurcation2d", "--eps", "0.1,0.5,1", "--points", "40"];
    assert!(mems(&args, &a, &[("MEMS_NUM_THREADS", "1")]).status.success());
    assert!(mems(&args, &b, &[("MEMS_NUM_THREADS", "4")]).status.success());
    let (oa, ob) = (outputs(&a), outputs(&b));
    assert_eq!(oa, ob);
    for (f, h) in &oa {
        assert_eq!(&sha256_file(&a.join(f)).unwrap(), h);
    }
}

#[test]
fn default_bifurcation2d_bundle_has_one_file_per_eps() {
    let dir = tempfile::tempdir().unwrap();
    let o = mems(&["bifurcation2d", "--format", "csv"], dir.path(), &[]);
    assert!(o.status.success());
    let mut files: Vec<String> = outputs(dir.path()).into_iter().map(|(f, _)| f).filter(|f| f.ends_with(".csv")).collect();
    files.sort();
    assert_eq!(files, ["bifurcation2d_eps0.05.csv", "bifurcation2d_eps0.1.csv", "bifurcation2d_eps0.5.csv", "bifurcation2d_eps1.csv", "bifurcation2d_eps2.csv"]);
}

#[test]
fn verify_bounds_example_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let o = mems(&["verify-bounds", "--samples", "200", "--seed", "7"], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let r = &summary(&o)["result"];
    assert_eq!(r["violations"], 0);
    assert_eq!(r["rescaled_violations"], 0);
}
