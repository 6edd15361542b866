//! Full inequality check: checkers, coupling, transport, bootstrap, verdict.

use std::time::Instant;

use ntci_core::tci::{verify_inequality, TciReport, Verdict};
use ntci_core::Executor;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Result, Stage};
use crate::io;

/// Flat CSV view of a report, one row per run, for sweep aggregation.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow<'a> {
    pub schema_version: u32,
    pub inequality: &'a str,
    pub model: &'a str,
    pub tilt: &'a str,
    pub solver: &'a str,
    pub n_paths: usize,
    pub horizon: f64,
    pub delay: f64,
    pub dt: f64,
    pub kappa: Option<f64>,
    pub k: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: f64,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub lambda: Option<f64>,
    pub alpha_variant: &'a str,
    pub estimated: String,
    pub lhs: f64,
    pub lhs_ci_low: f64,
    pub lhs_ci_high: f64,
    pub bootstrap_resamples: usize,
    pub floor: f64,
    pub adjusted_lhs: f64,
    pub entropy: f64,
    pub entropy_se: f64,
    pub entropy_coeff: f64,
    pub initial_coeff: f64,
    pub initial_w2: f64,
    pub rhs: f64,
    pub margin: f64,
    pub verdict: Verdict,
    pub pass: bool,
    pub coupling_upper_bound: f64,
    pub coupled_w2: f64,
    pub shift_bound: Option<f64>,
    pub shift_bound_holds: Option<bool>,
    pub truncation_tail: Option<f64>,
    pub clipped_steps: usize,
}

impl<'a> From<&'a TciReport> for ReportRow<'a> {
    fn from(r: &'a TciReport) -> Self {
        let p = &r.parameters;
        ReportRow {
            schema_version: r.schema_version,
            inequality: &r.inequality,
            model: &r.model,
            tilt: &r.tilt,
            solver: &r.solver,
            n_paths: r.n_paths,
            horizon: p.horizon,
            delay: p.delay,
            dt: p.dt,
            kappa: p.kappa,
            k: p.k,
            lambda1: p.lambda1,
            lambda2: p.lambda2,
            lambda3: p.lambda3,
            k1: p.k1,
            k2: p.k2,
            lambda: p.lambda,
            alpha_variant: &p.alpha_variant,
            estimated: p.estimated.join(" "),
            lhs: r.lhs.value,
            lhs_ci_low: r.lhs.ci_low,
            lhs_ci_high: r.lhs.ci_high,
            bootstrap_resamples: r.lhs.resamples,
            floor: r.floor,
            adjusted_lhs: r.adjusted_lhs,
            entropy: r.entropy,
            entropy_se: r.entropy_se,
            entropy_coeff: r.entropy_coeff,
            initial_coeff: r.initial_coeff,
            initial_w2: r.initial_w2,
            rhs: r.rhs,
            margin: r.margin,
            verdict: r.verdict,
            pass: r.pass,
            coupling_upper_bound: r.coupling_upper_bound,
            coupled_w2: r.coupled_w2,
            shift_bound: r.shift_bound,
            shift_bound_holds: r.shift_bound_holds,
            truncation_tail: r.truncation_tail,
            clipped_steps: r.clipped_steps,
        }
    }
}

pub struct VerifyOutput {
    pub report: TciReport,
    pub json: String,
    pub csv: String,
}

pub fn run<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<VerifyOutput> {
    let ex = cfg.experiment()?;
    let harness = cfg.harness(&ex.sim)?;
    let start = Instant::now();
    let clock = move || start.elapsed().as_secs_f64();
    let report = verify_inequality(&ex.coeffs, &ex.initial, &ex.tilt, &harness, exec, Some(&clock)).stage("verify")?;
    Ok(VerifyOutput {
        json: io::to_json(&report)?,
        csv: io::to_csv(&[ReportRow::from(&report)])?,
        report,
    })
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::FloorLimited => "FLOOR-LIMITED",
    }
}

/// Human-readable summary of a report.
pub fn summary(r: &TciReport) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| s.push_str(&format!("{k:<22} {v}\n"));
    kv("inequality", r.inequality.clone());
    kv("model / tilt", format!("{} / {}", r.model, r.tilt));
    kv("paths / solver", format!("{} / {}", r.n_paths, r.solver));
    if !r.parameters.estimated.is_empty() {
        kv("estimated constants", r.parameters.estimated.join(", "));
    }
    kv(
        "lhs",
        format!("{:.6} (CI {:.6} .. {:.6})", r.lhs.value, r.lhs.ci_low, r.lhs.ci_high),
    );
    kv("same-law floor", format!("{:.6}", r.floor));
    kv("lhs upper - floor", format!("{:.6}", r.adjusted_lhs));
    kv("entropy", format!("{:.6} ± {:.2e}", r.entropy, r.entropy_se));
    kv("rhs", format!("{:.6} = {:.6}·√Ent + {:.6}·{:.6}", r.rhs, r.entropy_coeff, r.initial_coeff, r.initial_w2));
    kv("margin", format!("{:.6}", r.margin));
    kv(
        "coupling",
        format!("W2 {:.6} ≤ bound {:.6}", r.coupled_w2, r.coupling_upper_bound),
    );
    if let (Some(b), Some(h)) = (r.shift_bound, r.shift_bound_holds) {
        kv("shift bound", format!("{b:.6} ({})", if h { "holds" } else { "violated" }));
    }
    if let Some(t) = r.truncation_tail {
        kv("truncation tail", format!("{t:.3e}"));
    }
    if r.clipped_steps > 0 {
        kv("clipped control steps", r.clipped_steps.to_string());
    }
    let t = r.runtimes;
    kv(
        "runtime (s)",
        format!(
            "checks {:.2}, simulate {:.2}, costs {:.2}, transport {:.2}, bootstrap {:.2}, total {:.2}",
            t.checks, t.simulate, t.costs, t.transport, t.bootstrap, t.total
        ),
    );
    kv("verdict", verdict_name(r.verdict).to_string());
    s
}

pub fn execute<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<String> {
    let out = run(cfg, exec)?;
    let mut text = summary(&out.report);
    for p in super::write_documents(cfg, "verify", "report", &out.json, &out.csv)? {
        text.push_str(&format!("wrote {p}\n"));
    }
    Ok(text)
}
