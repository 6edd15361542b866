//! Observed strong and noise-free orders of the integrator.

use ntci_core::simulate::{deterministic_order_study, strong_order_study, OrderStudy};
use ntci_core::Executor;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Result, Stage};
use crate::io::{self, OUTPUT_SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub schema_version: u32,
    pub model: String,
    pub strong: OrderStudy,
    pub deterministic: OrderStudy,
}

#[derive(Debug, Clone, Serialize)]
struct OrderLine {
    study: &'static str,
    dt: f64,
    error: f64,
    order: f64,
}

pub struct ConvergenceOutput {
    pub summary: ConvergenceSummary,
    pub json: String,
    pub csv: String,
}

pub fn run<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<ConvergenceOutput> {
    let coeffs = cfg.coefficients()?;
    cfg.initial_law()?;
    let study = cfg.study()?;
    let value = cfg.initial.value.clone().unwrap_or_else(|| vec![0.0; coeffs.dim()]);
    let initial = move |_: f64, o: &mut [f64]| o.copy_from_slice(&value);
    let strong = strong_order_study(&coeffs, &initial, &study, exec).stage("convergence")?;
    let deterministic = deterministic_order_study(&coeffs, &initial, &study).stage("convergence")?;
    let summary = ConvergenceSummary {
        schema_version: OUTPUT_SCHEMA_VERSION,
        model: coeffs.name().to_string(),
        strong,
        deterministic,
    };
    let lines: Vec<OrderLine> = [("strong", &summary.strong), ("deterministic", &summary.deterministic)]
        .into_iter()
        .flat_map(|(name, s)| {
            s.rows.iter().map(move |r| OrderLine {
                study: name,
                dt: r.dt,
                error: r.error,
                order: s.order,
            })
        })
        .collect();
    Ok(ConvergenceOutput {
        json: io::to_json(&summary)?,
        csv: io::to_csv(&lines)?,
        summary,
    })
}

fn table(name: &str, s: &OrderStudy) -> String {
    let mut t = format!("{name} (reference dt {:e}, {} paths)\n", s.reference_dt, s.n_paths);
    for r in &s.rows {
        t.push_str(&format!("  dt {:<12e} error {:.6e}\n", r.dt, r.error));
    }
    t.push_str(&format!("  observed order {:.4}\n", s.order));
    t
}

pub fn execute<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<String> {
    let out = run(cfg, exec)?;
    let mut text = table("strong", &out.summary.strong);
    text.push_str(&table("deterministic", &out.summary.deterministic));
    for p in super::write_documents(cfg, "convergence", "convergence", &out.json, &out.csv)? {
        text.push_str(&format!("wrote {p}\n"));
    }
    Ok(text)
}
