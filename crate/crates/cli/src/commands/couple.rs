//! Tilted/reference coupling: entropy, coupling bound and importance check.

use ntci_core::girsanov::{coupled_simulate, importance_check, relative_entropy, ImportanceReport, TiltKind};
use ntci_core::ot::{self, cost_matrix};
use ntci_core::paths::PathMetric;
use ntci_core::{stats, Executor};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Result, Stage};
use crate::io::{self, OUTPUT_SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupleSummary {
    pub schema_version: u32,
    pub model: String,
    pub tilt: TiltKind,
    pub n_paths: usize,
    pub horizon: f64,
    /// Mean of `½∫|h|²dt` over the tilted paths.
    pub entropy: f64,
    pub entropy_se: f64,
    /// `½|h|²T` for a constant tilt.
    pub entropy_closed_form: Option<f64>,
    /// `√(mean ρ∞ᵀ(X_i, Y_i)²)` over the synchronous pairs.
    pub coupling_upper_bound: f64,
    /// Exact `W₂(X̂, Ŷ)` under `ρ∞ᵀ`, when the ensemble fits the exact solver.
    pub coupled_w2: Option<f64>,
    pub sup_diff_mean: f64,
    pub sup_diff_max: f64,
    pub clipped_steps: usize,
    pub importance: ImportanceReport,
}

/// CSV view of the summary.
#[derive(Debug, Clone, Serialize)]
struct CoupleRow<'a> {
    schema_version: u32,
    model: &'a str,
    tilt: TiltKind,
    n_paths: usize,
    horizon: f64,
    entropy: f64,
    entropy_se: f64,
    entropy_closed_form: Option<f64>,
    coupling_upper_bound: f64,
    coupled_w2: Option<f64>,
    sup_diff_mean: f64,
    sup_diff_max: f64,
    clipped_steps: usize,
    z_score: f64,
    normalization_z: f64,
    effective_sample_size: f64,
    low_ess: bool,
}

pub struct CoupleOutput {
    pub summary: CoupleSummary,
    pub json: String,
    pub csv: String,
}

pub fn run<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<CoupleOutput> {
    let ex = cfg.experiment()?;
    let r = coupled_simulate(&ex.coeffs, &ex.initial, &ex.sim, &ex.tilt, exec).stage("couple")?;
    let (entropy, entropy_se) = relative_entropy(&r);
    let metric = PathMetric::Uniform;
    let coupling_upper_bound = ot::coupling_upper_bound(&r, metric).stage("couple")?;
    let coupled_w2 = if r.len() <= ot::EXACT_CAP {
        let c = cost_matrix(&r.x_paths, &r.y_paths, metric, exec).stage("transport")?;
        Some(ot::exact_w2(&c).stage("transport")?)
    } else {
        None
    };
    let entropy_closed_form = match cfg.tilt.kind {
        crate::config::TiltKind::Zero => Some(0.0),
        crate::config::TiltKind::Constant => cfg
            .tilt
            .h
            .as_ref()
            .map(|h| 0.5 * h.iter().map(|x| x * x).sum::<f64>() * cfg.sim.horizon),
        _ => None,
    };
    let phi = cfg.observable();
    let importance = importance_check(
        &ex.coeffs,
        &ex.initial,
        &ex.sim,
        &ex.tilt,
        &phi,
        cfg.importance.min_ess_fraction,
        exec,
    )
    .stage("importance")?;
    let summary = CoupleSummary {
        schema_version: OUTPUT_SCHEMA_VERSION,
        model: ex.coeffs.name().to_string(),
        tilt: r.tilt_kind,
        n_paths: r.len(),
        horizon: ex.sim.horizon,
        entropy,
        entropy_se,
        entropy_closed_form,
        coupling_upper_bound,
        coupled_w2,
        sup_diff_mean: stats::mean(&r.sup_diff),
        sup_diff_max: r.sup_diff.iter().copied().fold(0.0, f64::max),
        clipped_steps: r.clipped_steps,
        importance,
    };
    let row = CoupleRow {
        schema_version: summary.schema_version,
        model: &summary.model,
        tilt: summary.tilt,
        n_paths: summary.n_paths,
        horizon: summary.horizon,
        entropy,
        entropy_se,
        entropy_closed_form,
        coupling_upper_bound,
        coupled_w2,
        sup_diff_mean: summary.sup_diff_mean,
        sup_diff_max: summary.sup_diff_max,
        clipped_steps: summary.clipped_steps,
        z_score: summary.importance.z_score,
        normalization_z: summary.importance.normalization_z,
        effective_sample_size: summary.importance.effective_sample_size,
        low_ess: summary.importance.low_ess,
    };
    Ok(CoupleOutput {
        json: io::to_json(&summary)?,
        csv: io::to_csv(&[row])?,
        summary,
    })
}

pub fn execute<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<String> {
    let out = run(cfg, exec)?;
    let s = &out.summary;
    let mut text = format!(
        "entropy              {} ± {}\ncoupling bound       {}\n",
        s.entropy, s.entropy_se, s.coupling_upper_bound
    );
    if let Some(w) = s.coupled_w2 {
        text.push_str(&format!("coupled W2           {w}\n"));
    }
    text.push_str(&format!(
        "importance z-score   {}\nnormalization z      {}\nESS                  {}\n",
        s.importance.z_score, s.importance.normalization_z, s.importance.effective_sample_size
    ));
    if let Some(w) = &s.importance.warning {
        text.push_str(&format!("warning: {w}\n"));
    }
    for p in super::write_documents(cfg, "couple", "couple", &out.json, &out.csv)? {
        text.push_str(&format!("wrote {p}\n"));
    }
    Ok(text)
}
