//! Closed-form constants for given parameters, singly or over a grid.

use clap::Args;
use ntci_core::tci::{alpha, beta, c_lambda, l2_coefficients, summability, AlphaVariant, L2Case};
use serde::Serialize;

use crate::error::{CliError, Result, Stage};
use crate::io;

#[derive(Debug, Clone, Default, Args)]
pub struct ConstantsArgs {
    /// Horizon T
    #[arg(long = "T")]
    pub t: Option<f64>,
    /// Lipschitz constant of G in the uniform norm
    #[arg(long, default_value_t = 0.0)]
    pub kappa: f64,
    /// Dissipativity constant λ₁
    #[arg(long, allow_negative_numbers = true)]
    pub l1: Option<f64>,
    /// Delay constant λ₂
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    /// Bound λ₃ on ‖σ‖²
    #[arg(long, default_value_t = 1.0)]
    pub l3: f64,
    /// Time weight λ of the L² inequality
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Lipschitz constant of G in the L² segment norm
    #[arg(long, default_value_t = 0.0)]
    pub k: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub k2: Option<f64>,
    /// Delay τ (needed for the L² coefficients)
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_enum, default_value_t = Variant::Proved)]
    pub variant: Variant,
    /// Sweep a parameter: NAME=START:STOP:COUNT or NAME=V1,V2,...; repeatable,
    /// and the rows form the Cartesian product. Emits CSV.
    #[arg(long, value_name = "NAME=GRID")]
    pub sweep: Vec<String>,
    /// Print the single-point result as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Variant {
    #[default]
    Proved,
    Printed,
}

impl From<Variant> for AlphaVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Proved => AlphaVariant::Proved,
            Variant::Printed => AlphaVariant::Printed,
        }
    }
}

/// One evaluated parameter point; quantities whose inputs were not given
/// stay empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ConstantsRow {
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub kappa: f64,
    pub l1: Option<f64>,
    pub l2: f64,
    pub l3: f64,
    pub lambda: Option<f64>,
    pub k: f64,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub tau: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub c_lambda: Option<f64>,
    pub l2_case: Option<String>,
    pub l2_entropy_coeff: Option<f64>,
    pub l2_initial_coeff: Option<f64>,
    pub summable: Option<bool>,
    pub summability_threshold: Option<f64>,
    pub partial_sum_25: Option<f64>,
    pub partial_sum_50: Option<f64>,
    pub error: Option<String>,
}

const PARAMS: [&str; 10] = ["T", "kappa", "l1", "l2", "l3", "lambda", "k", "k1", "k2", "tau"];

impl ConstantsArgs {
    fn set(&mut self, name: &str, v: f64) -> Result<()> {
        match name {
            "T" => self.t = Some(v),
            "kappa" => self.kappa = v,
            "l1" => self.l1 = Some(v),
            "l2" => self.l2 = v,
            "l3" => self.l3 = v,
            "lambda" => self.lambda = Some(v),
            "k" => self.k = v,
            "k1" => self.k1 = Some(v),
            "k2" => self.k2 = Some(v),
            "tau" => self.tau = Some(v),
            _ => {
                return Err(CliError::invalid(
                    "sweep",
                    format!("unknown parameter `{name}`; use one of {}", PARAMS.join(", ")),
                ))
            }
        }
        Ok(())
    }
}

/// Evaluate every quantity whose inputs are present; errors are collected
/// into the row.
pub fn evaluate(a: &ConstantsArgs) -> ConstantsRow {
    evaluate_typed(a).0
}

fn evaluate_typed(a: &ConstantsArgs) -> (ConstantsRow, Vec<ntci_core::Error>) {
    let variant = AlphaVariant::from(a.variant);
    let mut row = ConstantsRow {
        t: a.t,
        kappa: a.kappa,
        l1: a.l1,
        l2: a.l2,
        l3: a.l3,
        lambda: a.lambda,
        k: a.k,
        k1: a.k1,
        k2: a.k2,
        tau: a.tau,
        ..Default::default()
    };
    let mut errors: Vec<ntci_core::Error> = Vec::new();
    let mut note = |e: ntci_core::Error| {
        if !errors.contains(&e) {
            errors.push(e);
        }
    };
    if let (Some(t), Some(l1)) = (a.t, a.l1) {
        match alpha(t, a.kappa, l1, a.l2, a.l3, variant) {
            Ok(v) => row.alpha = Some(v),
            Err(e) => note(e),
        }
        match beta(t, a.kappa, l1, a.l2) {
            Ok(v) => row.beta = Some(v),
            Err(e) => note(e),
        }
    }
    if let (Some(k1), Some(k2)) = (a.k1, a.k2) {
        let lambda = a.lambda.unwrap_or(0.0);
        match c_lambda(lambda, a.k, k1, k2, a.l3) {
            Ok(v) => row.c_lambda = Some(v),
            Err(e) => note(e),
        }
        if let Some(tau) = a.tau {
            let case = if lambda == 0.0 {
                L2Case::Contractive
            } else {
                L2Case::Weighted { lambda }
            };
            row.l2_case = Some(if lambda == 0.0 { "contractive" } else { "weighted" }.to_string());
            match l2_coefficients(case, a.k, k1, k2, a.l3, tau) {
                Ok(c) => {
                    row.l2_entropy_coeff = Some(c.entropy);
                    row.l2_initial_coeff = Some(c.initial);
                }
                Err(e) => note(e),
            }
        }
    }
    if let (Some(lambda), Some(l1)) = (a.lambda, a.l1) {
        if lambda > 0.0 {
            match summability(lambda, a.kappa, l1, a.l2, variant) {
                Ok(s) => {
                    row.summable = Some(s.condition);
                    row.summability_threshold = Some(s.threshold);
                    row.partial_sum_25 = s.partial_sums.get(24).copied();
                    row.partial_sum_50 = s.partial_sums.last().copied();
                }
                Err(e) => note(e),
            }
        }
    }
    if !errors.is_empty() {
        row.error = Some(errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "));
    }
    (row, errors)
}

fn nothing_requested(a: &ConstantsArgs) -> bool {
    (a.t.is_none() || a.l1.is_none()) && (a.k1.is_none() || a.k2.is_none())
}

/// Values of one `--sweep` entry.
pub fn parse_sweep(spec: &str) -> Result<(String, Vec<f64>)> {
    let bad = |rule: &str| CliError::invalid("sweep", format!("`{spec}`: {rule}"));
    let (name, grid) = spec.split_once('=').ok_or_else(|| bad("expected NAME=GRID"))?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let values = if grid.contains(':') {
        let parts: Vec<&str> = grid.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("a range is START:STOP:COUNT"));
        }
        let (lo, hi) = (num(parts[0])?, num(parts[1])?);
        let n: usize = parts[2].trim().parse().map_err(|_| bad("COUNT must be a positive integer"))?;
        match n {
            0 => return Err(bad("COUNT must be a positive integer")),
            1 => vec![lo],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        }
    } else {
        grid.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    Ok((name.trim().to_string(), values))
}

/// Rows over the Cartesian product of the sweeps; the first sweep varies
/// slowest.
pub fn sweep_rows(base: &ConstantsArgs) -> Result<Vec<ConstantsRow>> {
    let sweeps = base.sweep.iter().map(|s| parse_sweep(s)).collect::<Result<Vec<_>>>()?;
    let mut probe = base.clone();
    for (name, _) in &sweeps {
        probe.set(name, 1.0)?;
    }
    let total: usize = sweeps.iter().map(|(_, v)| v.len()).product();
    let mut rows = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut a = base.clone();
        for (name, values) in sweeps.iter().rev() {
            a.set(name, values[idx % values.len()])?;
            idx /= values.len();
        }
        rows.push(evaluate(&a));
    }
    Ok(rows)
}

fn line(out: &mut String, name: &str, v: Option<f64>) {
    if let Some(v) = v {
        out.push_str(&format!("{name:<22} {v}\n"));
    }
}

pub fn table(r: &ConstantsRow) -> String {
    let mut s = String::new();
    line(&mut s, "alpha(T)", r.alpha);
    line(&mut s, "beta(T)", r.beta);
    line(&mut s, "C(lambda)", r.c_lambda);
    if let Some(case) = &r.l2_case {
        s.push_str(&format!("{:<22} {case}\n", "l2 case"));
    }
    line(&mut s, "l2 entropy coeff", r.l2_entropy_coeff);
    line(&mut s, "l2 initial coeff", r.l2_initial_coeff);
    if let Some(b) = r.summable {
        s.push_str(&format!("{:<22} {b}\n", "summable"));
    }
    line(&mut s, "summability threshold", r.summability_threshold);
    line(&mut s, "partial sum n=25", r.partial_sum_25);
    line(&mut s, "partial sum n=50", r.partial_sum_50);
    s
}

/// Text for standard output. A single point fails on its first domain
/// error; a sweep reports errors per row.
pub fn run(a: &ConstantsArgs) -> Result<String> {
    if !a.sweep.is_empty() {
        return io::to_csv(&sweep_rows(a)?);
    }
    if nothing_requested(a) {
        return Err(CliError::invalid(
            "constants",
            "nothing to compute; give --T and --l1 for the uniform constants or --k1 and --k2 for the L² constants",
        ));
    }
    let (r, errors) = evaluate_typed(a);
    if let Some(e) = errors.into_iter().next() {
        return Err(e).stage("constants");
    }
    if a.json {
        io::to_json(&r)
    } else {
        Ok(table(&r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args() -> ConstantsArgs {
        ConstantsArgs {
            l3: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn reference_points() {
        let a = ConstantsArgs {
            t: Some(1.0),
            l1: Some(1.0),
            ..args()
        };
        let r = evaluate(&a);
        assert!((r.alpha.unwrap() - 2.0).abs() < 1e-12);
        assert!((r.beta.unwrap() - 2.0).abs() < 1e-12);
        let a = ConstantsArgs {
            lambda: Some(0.0),
            k1: Some(2.0),
            k2: Some(1.0),
            ..args()
        };
        assert!((evaluate(&a).c_lambda.unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_reports_errors_per_row() {
        let a = ConstantsArgs {
            t: Some(1.0),
            l1: Some(1.0),
            sweep: vec!["kappa=0,0.5,1".to_string()],
            ..args()
        };
        let rows = sweep_rows(&a).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].error.is_none() && rows[1].error.is_none());
        assert!(rows[2].error.as_deref().unwrap().contains("(A1)"));
        assert!(rows[2].alpha.is_none());
    }

    #[test]
    fn sweep_grid_is_a_cartesian_product() {
        let a = ConstantsArgs {
            l1: Some(1.0),
            sweep: vec!["T=1:2:3".to_string(), "l2=0,1".to_string()],
            ..args()
        };
        let rows = sweep_rows(&a).unwrap();
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.t.unwrap(), r.l2)).collect();
        assert_eq!(pts, vec![(1.0, 0.0), (1.0, 1.0), (1.5, 0.0), (1.5, 1.0), (2.0, 0.0), (2.0, 1.0)]);
    }

    #[test]
    fn bad_sweeps_are_rejected() {
        assert!(parse_sweep("T").is_err());
        assert!(parse_sweep("T=1:2").is_err());
        assert!(parse_sweep("T=1:2:0").is_err());
        let a = ConstantsArgs {
            sweep: vec!["x=1".to_string()],
            ..args()
        };
        assert!(sweep_rows(&a).is_err());
    }
}
