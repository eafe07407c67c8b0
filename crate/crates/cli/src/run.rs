use crate::config::{CoefficientSource, Command, ConfigError, Format, Model, Params, RunConfig, Spacing};
use crate::emit::{curve_table, sha256_hex, Cell, Table};
use mems_core::mems1d::{coeffs_1d, lambda1_closed, lambda_three_term, sweep_bifurcation_1d};
use mems_core::mems2d_arclength::{asymptotic_branch_parametric, outer_solution_appc, solve_parametric_inner, tabulate_parametric, trace_branch, OuterCoeffs2D, TraceOptions};
use mems_core::mems2d_radial::{
    asymptotic_branch_2d, delta0_bar, find_delta0_star, lambda_for_alpha, locate_dead_end_2d, predict_dead_end, solve_bvp_2d, solve_inner_2d,
    sweep_bifurcation_2d, verify_nonexistence_bounds, verify_rescaled_sample, BoundSampleSpec, DeadEndCoefficients, FarFieldTable, InnerOutcome,
};
use mems_core::BifurcationCurve;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::time::Instant;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) | RunError::Io(_) => 1,
        }
    }
}

fn num<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Numerical(e.to_string())
}

fn bad(key: &str, msg: impl Into<String>) -> RunError {
    RunError::Config(ConfigError::key(key, msg))
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";

struct Outputs {
    dir: PathBuf,
    format: Format,
    files: Vec<OutputRecord>,
}

impl Outputs {
    fn bytes(&mut self, name: &str, data: &[u8]) -> Result<(), RunError> {
        std::fs::write(self.dir.join(name), data)?;
        self.files.push(OutputRecord { file: name.to_string(), sha256: sha256_hex(data) });
        Ok(())
    }

    fn json(&mut self, name: &str, v: &impl Serialize) -> Result<(), RunError> {
        let mut data = serde_json::to_vec_pretty(v).map_err(num)?;
        data.push(b'\n');
        self.bytes(name, &data)
    }

    fn table(&mut self, stem: &str, t: &Table) -> Result<(), RunError> {
        if self.format != Format::Json {
            self.bytes(&format!("{stem}.csv"), &t.to_csv()?)?;
        }
        if self.format != Format::Csv {
            self.json(&format!("{stem}.json"), &t.to_json())?;
        }
        Ok(())
    }

    fn curve(&mut self, stem: &str, c: &BifurcationCurve) -> Result<(), RunError> {
        if self.format != Format::Json {
            self.bytes(&format!("{stem}.csv"), &curve_table(c).to_csv()?)?;
        }
        if self.format != Format::Csv {
            self.json(&format!("{stem}.json"), c)?;
        }
        Ok(())
    }
}

/// Runs the command, writes its artifacts and `manifest.json` into the output
/// directory and returns the manifest together with the summary document.
pub fn run(cfg: &RunConfig) -> Result<(RunManifest, Value), RunError> {
    cfg.check_keys()?;
    let start = Instant::now();
    let dir = cfg.params.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    let mut out = Outputs { dir: dir.clone(), format: cfg.params.format.unwrap_or(Format::Both), files: Vec::new() };
    let p = &cfg.params;
    let result = match cfg.command {
        Command::Coeffs1d => coeffs1d(p, &mut out),
        Command::Bifurcation1d => bifurcation1d(p, &mut out),
        Command::Innerfit2d => innerfit2d(p, &mut out),
        Command::Delta0star => delta0star(p, &mut out),
        Command::Deadend => deadend(p, &mut out),
        Command::Bifurcation2d => bifurcation2d(p, &mut out),
        Command::ArclengthTrace => arclength_trace(p, &mut out),
        Command::AsymCompare => asym_compare(p, &mut out),
        Command::VerifyBounds => verify_bounds(p, cfg.seed, &mut out),
        Command::OuterAppc => outer_appc(p, &mut out),
    };
    // The summary is written even when a check inside it failed.
    let (summary, failure) = match result {
        Ok(s) => (s, None),
        Err(RunError::Numerical(msg)) => (json!({ "error": msg }), Some(RunError::Numerical(msg))),
        Err(e) => return Err(e),
    };
    let summary = json!({ "command": cfg.command.name(), "result": summary });
    out.json(SUMMARY_FILE, &summary)?;
    let manifest = RunManifest {
        tool: "mems".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs: out.files,
    };
    let mut data = serde_json::to_vec_pretty(&manifest).map_err(num)?;
    data.push(b'\n');
    std::fs::write(dir.join(MANIFEST_FILE), data)?;
    match failure {
        Some(e) => Err(e),
        None => Ok((manifest, summary)),
    }
}

fn single_eps(p: &Params, pred: impl Fn(f64) -> bool, what: &str) -> Result<f64, RunError> {
    match p.eps.as_deref() {
        Some([e]) if pred(*e) => Ok(*e),
        Some([e]) => Err(bad("eps", format!("must be {what}, got {e}"))),
        Some(v) => Err(bad("eps", format!("expects a single value, got {}", v.len()))),
        None => Err(bad("eps", "required")),
    }
}

fn eps_list(p: &Params, default: Option<&[f64]>, pred: impl Fn(f64) -> bool, what: &str) -> Result<Vec<f64>, RunError> {
    let v = match (&p.eps, default) {
        (Some(v), _) => v.clone(),
        (None, Some(d)) => d.to_vec(),
        (None, None) => return Err(bad("eps", "required")),
    };
    if v.is_empty() {
        return Err(bad("eps", "empty list"));
    }
    if let Some(e) = v.iter().find(|e| !pred(**e)) {
        return Err(bad("eps", format!("every value must be {what}, got {e}")));
    }
    Ok(v)
}

fn pair(v: &Option<Vec<f64>>, key: &str, default: (f64, f64)) -> Result<(f64, f64), RunError> {
    match v.as_deref() {
        None => Ok(default),
        Some([a, b]) => Ok((*a, *b)),
        Some(_) => Err(bad(key, "expects two values")),
    }
}

fn positive(key: &str, x: f64) -> Result<f64, RunError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(bad(key, format!("must be positive and finite, got {x}")))
    }
}

fn alpha_grid(p: &Params, start: f64, end: f64, n: usize, spacing: Spacing) -> Result<Vec<f64>, RunError> {
    let a0 = p.alpha_start.unwrap_or(start);
    let a1 = p.alpha_end.unwrap_or(end);
    let n = p.points.unwrap_or(n);
    if !(a0 < 0.0 && a0 > -1.0) {
        return Err(bad("alpha_start", format!("must lie in (-1, 0), got {a0}")));
    }
    if !(a1 > -1.0 && a1 < a0) {
        return Err(bad("alpha_end", format!("must lie in (-1, alpha_start), got {a1}")));
    }
    if n < 2 {
        return Err(bad("points", format!("need at least 2, got {n}")));
    }
    let step = |i: usize| i as f64 / (n - 1) as f64;
    Ok(match spacing {
        Spacing::Linear => (0..n).map(|i| a0 + (a1 - a0) * step(i)).collect(),
        Spacing::LogDelta => {
            let (d0, d1) = (1.0 + a0, 1.0 + a1);
            (0..n).map(|i| d0 * (d1 / d0).powf(step(i)) - 1.0).collect()
        }
    })
}

fn eps_label(eps: f64) -> String {
    format!("eps{eps}")
}

fn coeffs1d(p: &Params, out: &mut Outputs) -> Result<Value, RunError> {
    let eps = single_eps(p, |e| e > 0.0 && e.is_finite(), "positive")?;
    let c = coeffs_1d(eps).map_err(num)?;
    let e2 = eps * eps;
    let p32 = (1.0 + e2).powf(1.5);
    let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    let direct = ((1.0 + e2).sqrt() - 1.0) / (e2 * (1.0 + e2).sqrt());
    let tight = 8.0 * f64::EPSILON;
    let identities = json!({
        "lambda1_closed_form": close(c.lambda1, direct, tight * (1.0 + 1.0 / e2)),
        "lambda32_eq_minus_lambda1": c.lambda32 == -c.lambda1,
        "lambda2_eq_minus_b1_over_p32": close(c.lambda2, -c.b1 / p32, tight),
        "a_half_eq_minus_lambda1_p32": close(c.a_half, -lambda1_closed(eps) * p32, tight),
        "b1_closed_form": close(c.b1, -c.lambda1 * p32 * ((4.0 - 2.0 * e2 * c.lambda1).ln() - 1.0 / (1.0 + e2)), tight),
    });
    let all = identities.as_object().expect("object").values().all(|v| v == &Value::Bool(true));
    let doc = json!({ "coeffs": c, "identities": identities, "all_identities_hold": all });
    out.json("coeffs1d.json", &doc)?;
    Ok(doc)
}

fn bifurcation1d(p: &Params, out: &mut Outputs) -> Result<Value, RunError> {
    let eps = eps_list(p, None, |e| e >= 0.0 && e.is_finite(), "nonnegative")?;
    let grid = alpha_grid(p, -0.005, -0.995, 199, Spacing::Linear)?;
    let curves = eps.par_iter().map(|&e| sweep_bifurcation_1d(e, &grid)).collect::<Result<Vec<_>, _>>().map_err(num)?;
    let mut summary = Vec::new();
    for c in &curves {
        out.curve(&format!("bifurcation1d_{}", eps_label(c.eps)), c)?;
        summary.push(curve_summary(c));
    }
    Ok(Value::Array(summary))
}

fn curve_summary(c: &BifurcationCurve) -> Value {
    let lmax = c.points.iter().map(|q| q.lambda).fold(f64::NEG_INFINITY, f64::max);
    json!({
        "eps": c.eps,
        "points": c.len(),
        "folds": c.folds().count(),
        "lambda_max": lmax,
        "end": c.points.last().map(|q| json!({ "alpha": q.alpha, "lambda": q.lambda, "term_cause": q.term_cause })),
    })
}

fn innerfit2d(p: &Params, out: &mut Outputs) -> Result<Value, RunError> {
    let d0s = p.delta0.clone().unwrap_or_else(|| vec![1.0, 2.0, 5.0, 10.0, 15.0]);
    if d0s.is_empty() {
        return Err(bad("delta0", "empty list"));
    }
    if let Some(d) = d0s.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(bad("delta0", format!("must be nonnegative, got {d}")));
    }
    let rho_max = p.rho_max.unwrap_or(1e16);
    if !(rho_max >= 1e6 && rho_max.is_finite()) {
        return Err(bad("rho_max", format!("must be at least 1e6, got {rho_max}")));
    }
    let parametric = p.parametric.unwrap_or(false);
    let rows = d0s
        .par_iter()
        .map(|&d0| -> Result<Vec<Cell>, RunError> {
            if parametric {
                let s = solve_parametric_inner(d0, rho_max).map_err(num)?;
                let f = &s.fit;
                Ok(vec![Cell::F(d0), Cell::S("global".into()), Cell::F(f.a_tilde), Cell::F(f.phi_tilde), Cell::F(f.const_term), Cell::F(f.residual_norm), Cell::F(s.r0_linear_deficit), Cell::F(f64::NAN)])
            } else {
                Ok(match solve_inner_2d(d0, rho_max).map_err(num)? {
                    InnerOutcome::Global(_, f) => {
                        vec![Cell::F(d0), Cell::S("global".into()), Cell::F(f.a_tilde), Cell::F(f.phi_tilde), Cell::F(f.const_term), Cell::F(f.residual_norm), Cell::F(f64::NAN), Cell::F(f64::NAN)]
                    }
                    InnerOutcome::BlowUp(b) => {
                        let nan = Cell::F(f64::NAN);
                        vec![Cell::F(d0), Cell::S("blow_up".into()), nan.clone(), nan.clone(), nan.clone(), nan.clone(), nan, Cell::F(b.rho)]
                    }
                })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(&["delta0", "status", "a_tilde", "phi_tilde", "const_term", "residual_norm", "r0_deficit", "blowup_rho"]);
    for r in rows {
        t.push(r);
    }
    out.table("innerfit2d", &t)?;
    Ok(json!({ "system": if parametric { "parametric" } else { "scalar" }, "rho_max": rho_max, "fits": t.to_json() }))
}

fn delta0_star_value(p: &Params) -> Result<(f64, (f64, f64), f64), RunError> {
    let br = pair(&p.bracket, "bracket", (10.0, 30.0))?;
    if !(br.0 >= 0.0 && br.1 > br.0 && br.1.is_finite()) {
        return Err(bad("bracket", format!("need 0 <= lo < hi, got {br:?}")));
    }
    let tol = positive("tol", p.tol.unwrap_or(1e-10))?;
    Ok((find_delta0_star(br, tol).map_err(num)?, br, tol))
}

fn delta0star(p: &Params, out: &mut Outputs) -> Result<Value, RunError> {
    let (d, br, tol) = delta0_star_value(p)?;
    let bar = delta0_bar();
    let doc = json!({ "delta0_star": d, "bracket": [br.0, br.1], "tol": tol, "delta0_bar": bar, "below_delta0_bar": d <= bar });
    out.json("delta0star.json", &doc)?;
    Ok(doc)
}

fn deadend(p: &Params, out: &mut Outputs) -> Result<Value, RunError> {
    let eps = eps_list(p, Some(&[0.2f64.sqrt(), 0.1f64.sqrt(), 0.05f64.sqrt()]), |e| e > 0.0 && e <= 0.5, "in (0, 0.5]")?;
    let tol = positive("tol", p.tol.unwrap_or(1e-12))?;
    let d0 = find_delta0_star((10.0, 30.0), 1e-10).map_err(num)?;
    let coeffs = match p.coefficients.unwrap_or(CoefficientSource::Parametric) {
        CoefficientSource::Parametric => DeadEndCoefficients::parametric(d0),
        CoefficientSource::Scalar => DeadEndCoefficients::scalar_proxy(d0, 1e-2),
    }
    .map_err(num)?;
    let rows = eps
        .par_iter()
        .map(|&e| -> Result<Vec<Cell>, RunError> {
            let n = locate_dead_end_2d(e, tol).map_err(num)?;
            let q = predict_dead_end(e, &coeffs).map_err(num)?;
            let dp = e * e / d0;
            Ok(vec![Cell::F(e), Cell::F(n.alpha_star), Cell::F(n.lambda_star), Cell::F(n.delta_star), Cell::F(-q.alpha_star_abs), Cell::F(q.lambda_star), Cell::F(dp), Cell::F(n.delta_star - dp), Cell::F(n.lambda_star - q.lambda_star)])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(&["eps", "alpha_star_num", "lambda_star_num", "delta_star_num", "alpha_star_pred", "lambda_star_pred", "delta_star_pred", "delta_error", "lambda_error"]);
    for r in rows {
        t.push(r);
    }
    out.table("deadend", &t)?;
    Ok(json!({ "delta0_star": d0, "coefficients": coeffs, "points": t.to_json() }))
}

fn bifurcation2d(p: &Params, out: &mut Outputs) -> Result<Value, RunError> {
    let eps = eps_list(p, Some(&[0.05, 0.1, 0.5, 1.0, 2.0]), |e| e >= 0.0 && e.is_finite(), "nonnegative")?;
    let grid = alpha_grid(p, -0.01, -0.9999, 200, p.spacing.unwrap_or(Spacing::LogDelta))?;
    let tol = positive("tol", p.tol.unwrap_or(1e-10))?;
    let curves = eps.par_iter().map(|&e| sweep_bifurcation_2d(e, &grid, tol)).collect::<Result<Vec<_>, _>>().map_err(num)?;
    let mut summary = Vec::new();
    for c in &curves {
        out.curve(&format!("bifurcation2d_{}", eps_label(c.eps)), c)?;
        summary.push(curve_summary(c));
    }
    Ok(Value::Array(summary))
}

/// (λ, ℓ) on the graph branch at α, with ℓ the arc length of the profile.
pub fn graph_seed(eps: f64, alpha: f64) -> Result<(f64, f64), RunError> {
    let s = solve_bvp_2d(eps, alpha, None).map_err(num)?;
    let q = &s.profile;
    let f = |k: usize| (1.0 + eps * eps * q.u_prime[k] * q.u_prime[k]).sqrt();
    let ell = (1..q.r.len()).map(|i| 0.5 * (f(i) + f(i - 1)) * (q.r[i] - q.r[i - 1])).sum();
    Ok((s.lambda, ell))
}

fn arclength_trace(p: &Params, out: &mut Outputs) -> Result<Value, RunError> {
    let eps = single_eps(p, |e| e > 0.0 && e.is_finite(), "positive")?;
    let a0 = p.alpha_start.unwrap_or(-0.5);
    let a1 = p.alpha_end.unwrap_or(-1.0 + eps * eps / 30.0);
    if !(a0 < 0.0 && a0 > -1.0) {
        return Err(bad("alpha_start", format!("must lie in (-1, 0), got {a0}")));
    }
    if !(a1 > -1.0 && a1 < a0) {
        return Err(bad("alpha_end", format!("must lie in (-1, alpha_start), got {a1}")));
    }
    let d = TraceOptions::default();
    let opts = TraceOptions {
        ds: p.ds.unwrap_or(d.ds),
        ds_min: p.ds_min.unwrap_or(d.ds_min),
        ds_max: p.ds_max.unwrap_or(d.ds_max),
        max_steps: p.max_steps.unwrap_or(d.max_steps),
    };
    for (k, v) in [("ds", opts.ds), ("ds_min", opts.ds_min), ("ds_max", opts.ds_max)] {
        positive(k, v)?;
    }
    if !(opts.ds_min <= opts.ds && opts.ds <= opts.ds_max) {
        return Err(bad("ds", "need ds_min <= ds <= ds_max"));
    }
    let seed = graph_seed(eps, a0)?;
    let tr = trace_branch(eps, a0, a1, seed, &opts).map_err(num)?;
    out.curve(&format!("arclength_trace_{}", eps_label(eps)), &tr.curve)?;
    let mut t = Table::new(&["alpha", "lambda", "ell", "min_r_prime", "multivalued", "fold"]);
    for q in &tr.points {
        t.push(vec![Cell::F(q.alpha), Cell::F(q.lambda), Cell::F(q.ell), Cell::F(q.min_r_prime), Cell::B(q.multivalued), Cell::B(q.fold)]);
    }
    out.table(&format!("arclength_points_{}", eps_label(eps)), &t)?;
    Ok(json!({
        "eps": eps,
        "options": opts,
        "points": tr.points.len(),
        "fold_count": tr.fold_count,
        "multivalued_onset": tr.multivalued_onset,
        "term_cause": tr.curve.last_cause(),
    }))
}

fn asym_compare(p: &Params, out: &mut Outputs) -> Result<Value, RunError> {
    let model = p.model.unwrap_or(Model::TwoD);
    let eps = single_eps(p, |e| e > 0.0 && e.is_finite(), "positive")?;
    let n = p.points.unwrap_or(60);
    if n < 2 {
        return Err(bad("points", format!("need at least 2, got {n}")));
    }
    match model {
        Model::OneD => {
            if p.rho_max.is_some() {
                return Err(bad("rho_max", "not used by the 1d model"));
            }
            let (hi, lo) = sorted_range(pair(&p.delta_range, "delta_range", (0.2, 0.01))?)?;
            let deltas = geometric(hi, lo, n);
            let grid: Vec<f64> = deltas.iter().map(|d| d - 1.0).collect();
            let curve = sweep_bifurcation_1d(eps, &grid).map_err(num)?;
            let mut t = Table::new(&["delta", "lambda_numeric", "one_term", "two_term", "three_term"]);
            for &d in &deltas {
                let x = lambda_three_term(eps, d).map_err(num)?;
                let l = curve.points.iter().find(|q| q.alpha == d - 1.0).map_or(f64::NAN, |q| q.lambda);
                t.push(vec![Cell::F(d), Cell::F(l), Cell::F(x.one_term), Cell::F(x.two_term), Cell::F(x.three_term)]);
            }
            out.table(&format!("asym1d_{}", eps_label(eps)), &t)?;
            Ok(json!({ "model": "1d", "eps": eps, "rows": t.rows.len() }))
        }
        Model::TwoD => {
            let rho_max = p.rho_max.unwrap_or(1e16);
            if !(rho_max >= 1e6 && rho_max.is_finite()) {
                return Err(bad("rho_max", format!("must be at least 1e6, got {rho_max}")));
            }
            let e2 = eps * eps;
            let (hi, lo) = sorted_range(pair(&p.delta_range, "delta_range", (0.1, e2 / 30.0))?)?;
            let deltas = geometric(hi, lo, n);
            let d0star = find_delta0_star((10.0, 30.0), 1e-10).map_err(num)?;
            let (d0lo, d0hi) = (e2 / hi, e2 / lo);
            let par = tabulate_parametric(d0lo, d0hi, 64, rho_max).map_err(num)?;
            let par_pts = asymptotic_branch_parametric(eps, &deltas, &par).map_err(num)?;
            let scalar = if d0lo < d0star * 0.999 {
                let table = FarFieldTable::scalar(d0lo, d0hi.min(d0star * 0.999), 64, rho_max).map_err(num)?;
                Some((table, d0star))
            } else {
                None
            };
            let mut t = Table::new(&["delta", "abs_u0", "delta0", "lambda_numeric", "lambda_scalar_asym", "lambda_parametric_asym"]);
            let mut prev: Vec<(f64, f64)> = Vec::new();
            let mut numeric_alive = true;
            for (i, &d) in deltas.iter().enumerate() {
                let alpha = d - 1.0;
                let ln = if numeric_alive {
                    let guess = match prev.as_slice() {
                        [.., (a0, l0), (a1, l1)] => Some(l1 + (l1 - l0) / (a1 - a0) * (alpha - a1)),
                        [(_, l)] => Some(*l),
                        [] => None,
                    };
                    match lambda_for_alpha(eps, alpha, guess) {
                        Ok(l) => {
                            prev.push((alpha, l));
                            l
                        }
                        Err(_) => {
                            numeric_alive = false;
                            f64::NAN
                        }
                    }
                } else {
                    f64::NAN
                };
                let ls = match &scalar {
                    Some((tab, ds)) => asymptotic_branch_2d(eps, &[d], tab, *ds).ok().and_then(|v| v.first().map(|b| b.lambda)),
                    None => None,
                }
                .unwrap_or(f64::NAN);
                t.push(vec![Cell::F(d), Cell::F(1.0 - d), Cell::F(e2 / d), Cell::F(ln), Cell::F(ls), Cell::F(par_pts[i].lambda)]);
            }
            out.table(&format!("asym2d_{}", eps_label(eps)), &t)?;
            Ok(json!({ "model": "2d", "eps": eps, "delta0_star": d0star, "rows": t.rows.len() }))
        }
    }
}

fn sorted_range(r: (f64, f64)) -> Result<(f64, f64), RunError> {
    let (hi, lo) = if r.0 >= r.1 { r } else { (r.1, r.0) };
    if !(lo > 0.0 && hi < 1.0 && lo < hi) {
        return Err(bad("delta_range", format!("need two distinct values in (0, 1), got {r:?}")));
    }
    Ok((hi, lo))
}

fn geometric(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| hi * (lo / hi).powf(i as f64 / (n - 1) as f64)).collect()
}

fn verify_bounds(p: &Params, seed: u64, out: &mut Outputs) -> Result<Value, RunError> {
    let d = BoundSampleSpec::default();
    let samples = p.samples.unwrap_or(d.samples);
    if samples == 0 {
        return Err(bad("samples", "must be positive"));
    }
    let eps_range = pair(&p.eps_range, "eps_range", d.eps_range)?;
    if !(eps_range.0 > 0.0 && eps_range.1 >= eps_range.0 && eps_range.1.is_finite()) {
        return Err(bad("eps_range", format!("need 0 < lo <= hi, got {eps_range:?}")));
    }
    let k_max = p.k_max.unwrap_or(d.k_max);
    if !(k_max > mems_core::mems2d_radial::regime_split() && k_max.is_finite()) {
        return Err(bad("k_max", format!("must exceed the regime split {}, got {k_max}", mems_core::mems2d_radial::regime_split())));
    }
    let n_resc = p.rescaled_samples.unwrap_or(50);
    let delta_max = p.delta_max.unwrap_or(100.0);
    if !(delta_max > delta0_bar() && delta_max.is_finite()) {
        return Err(bad("delta_max", format!("must exceed {}, got {delta_max}", delta0_bar())));
    }
    let spec = BoundSampleSpec { samples, seed, eps_range, k_max };
    let rep = verify_nonexistence_bounds(&spec).map_err(num)?;
    let (resc, resc_viol) = verify_rescaled_sample(n_resc, seed, delta_max).map_err(num)?;
    out.json("bounds_nonexistence.json", &rep)?;
    out.json("bounds_rescaled.json", &json!({ "reports": resc, "violations": resc_viol }))?;
    let doc = json!({
        "seed": seed,
        "samples": samples,
        "violations": rep.violations.len(),
        "rescaled_samples": n_resc,
        "rescaled_violations": resc_viol.len(),
        "passed": rep.passed() && resc_viol.is_empty(),
    });
    if !(rep.passed() && resc_viol.is_empty()) {
        let mut all = rep.violations.clone();
        all.extend(resc_viol);
        return Err(RunError::Numerical(format!("{} bound violations, first: {}", all.len(), all[0])));
    }
    Ok(doc)
}

fn outer_appc(p: &Params, out: &mut Outputs) -> Result<Value, RunError> {
    let eps = single_eps(p, |e| e > 0.0 && e.is_finite(), "positive")?;
    let delta = p.delta.ok_or_else(|| bad("delta", "required"))?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(bad("delta", format!("must lie in (0, 1), got {delta}")));
    }
    let n = p.points.unwrap_or(101);
    if n < 2 {
        return Err(bad("points", format!("need at least 2, got {n}")));
    }
    let rho_max = p.rho_max.unwrap_or(1e16);
    if !(rho_max >= 1e6 && rho_max.is_finite()) {
        return Err(bad("rho_max", format!("must be at least 1e6, got {rho_max}")));
    }
    let d0 = eps * eps / delta;
    let inner = solve_parametric_inner(d0, rho_max).map_err(num)?;
    let m = OuterCoeffs2D::from_matching(eps, delta, inner.fit.a_tilde, inner.fit.phi_tilde, p.ell2.unwrap_or(0.0), p.lambda2.unwrap_or(0.0)).map_err(num)?;
    let c = OuterCoeffs2D::new(eps, m.ell1, m.ell2, m.a1, m.phi1, m.lambda2, p.hom_sin.unwrap_or(0.0));
    let mut t = Table::new(&["s", "r", "z", "r1", "z1", "r2", "z2", "r2_residual", "z2_residual"]);
    for s in geometric(1.0, 1e-4, n).into_iter().rev() {
        let q = outer_solution_appc(s, &c).map_err(num)?;
        t.push([q.s, q.r, q.z, q.r1, q.z1, q.r2, q.z2, q.r2_residual, q.z2_residual].into_iter().map(Cell::F).collect());
    }
    out.table(&format!("outer_appc_{}", eps_label(eps)), &t)?;
    Ok(json!({ "eps": eps, "delta": delta, "delta0": d0, "coeffs": c, "k2": c.k2() }))
}
