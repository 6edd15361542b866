//! Experiment configuration: one TOML file plus `--set key=value` overrides.
//!
//! Every block except `model` and `sim` may be omitted. Values are checked
//! against the engine's rules before any computation starts; failures name
//! the offending key.

use std::path::{Path, PathBuf};

use ntci_core::girsanov::GirsanovTilt;
use ntci_core::model::{self, uniform_delay_weights, CoefficientSet, LinearExample, SegmentSampler};
use ntci_core::ot::{SinkhornConfig, EXACT_CAP};
use ntci_core::simulate::{FixedPoint, InitialLaw, SimConfig, StudyConfig};
use ntci_core::tci::{AlphaVariant, HarnessConfig, Inequality, L2Case, OtSolver};
use ntci_core::{Grid, Segment, SegmentPath};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result, Stage, VALIDATE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Worker threads; the available cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub model: ModelConfig,
    pub sim: SimBlock,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub tilt: TiltConfig,
    #[serde(default)]
    pub inequality: InequalityConfig,
    #[serde(default)]
    pub importance: ImportanceConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// `G = b = σ = 0`.
    Zero,
    /// `σ = I`, everything else zero.
    Brownian,
    /// `b(ξ) = -decay·ξ(0) + delayed·ξ(-τ)`, `σ = sigma·I`, optional
    /// neutral term `neutral_kappa·ξ(-τ)`.
    LinearDelay,
    /// `G = (k/τ)∫ξ`, `b = c1·ξ(0) + ∫ξ dΛ₁`, `σ = diag(c3·ξ(0) + ∫ξ dΛ₂)`.
    Linear,
}

/// Delay measure: `"uniform"` (normalized Lebesgue) or point masses on the
/// segment grid, oldest point first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightsSpec {
    Named(String),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredBlock {
    pub kappa: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
    pub k: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub delay_weights: Option<WeightsSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "one")]
    pub dim: usize,
    /// Noise dimension of the zero model; other kinds fix it to `dim`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delayed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neutral_kappa: Option<f64>,
    /// Diagonal entries of the stiff linear part `A`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stiff: Option<Vec<f64>>,
    #[serde(default)]
    pub declared: DeclaredBlock,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub horizon: f64,
    pub dt: f64,
    pub delay: f64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "default_fp_max_iter")]
    pub fp_max_iter: usize,
}

fn default_paths() -> usize {
    100
}

fn default_fp_tol() -> f64 {
    SimConfig::DEFAULT_FP_TOL
}

fn default_fp_max_iter() -> usize {
    SimConfig::DEFAULT_FP_MAX_ITER
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    /// Dirac at the constant segment `value`.
    #[default]
    Constant,
    /// Random segments of size `scale` around `value`.
    Random,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: InitialKind,
    /// Constant value of the segment (zeros when absent).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiltKind {
    #[default]
    Zero,
    /// `h ≡ h`.
    Constant,
    /// `h_j = gain·tanh(ξ(0)_{j mod d})`.
    TanhFeedback,
    /// `h_j = -gain·ξ(0)_{j mod d}`, clipped at `h_bound`.
    LinearFeedback,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TiltConfig {
    pub kind: TiltKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InequalityKind {
    #[default]
    Uniform,
    L2,
    StiffUniform,
    StiffL2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    #[default]
    Exact,
    Sinkhorn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InequalityConfig {
    pub kind: InequalityKind,
    /// Time weight of the L² variants; 0 selects the unweighted case.
    pub lambda: f64,
    pub alpha_exponent_variant: AlphaVariant,
    pub solver: SolverKind,
    /// Entropic ε relative to the median cost.
    pub epsilon: f64,
    pub sinkhorn_max_iter: usize,
    pub sinkhorn_tol: f64,
    pub exact_cap: usize,
    pub bootstrap: usize,
    pub confidence: f64,
    pub checker_samples: usize,
    pub checker_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift_bound: Option<f64>,
}

impl Default for InequalityConfig {
    fn default() -> Self {
        let s = SinkhornConfig::default();
        InequalityConfig {
            kind: InequalityKind::Uniform,
            lambda: 0.0,
            alpha_exponent_variant: AlphaVariant::Proved,
            solver: SolverKind::Exact,
            epsilon: s.epsilon_rel,
            sinkhorn_max_iter: s.max_iter,
            sinkhorn_tol: s.tol,
            exact_cap: EXACT_CAP,
            bootstrap: 200,
            confidence: 0.95,
            checker_samples: 2000,
            checker_scale: 1.0,
            shift_bound: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    /// First coordinate of `X(T)`.
    #[default]
    Endpoint,
    /// `max_{0≤t≤T} |X(t)|`.
    SupNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceConfig {
    pub observable: Observable,
    pub min_ess_fraction: f64,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        ImportanceConfig {
            observable: Observable::Endpoint,
            min_ess_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub dts: Vec<f64>,
    pub reference_factor: usize,
    pub n_paths: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        let s = StudyConfig::standard(1.0, 1.0, 2000, 0);
        ConvergenceConfig {
            dts: s.dts,
            reference_factor: s.reference_factor,
            n_paths: s.n_paths,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            formats: vec![Format::Json, Format::Csv],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Engine objects built from a validated config.
pub struct Experiment {
    pub coeffs: CoefficientSet,
    pub initial: InitialLaw,
    pub sim: SimConfig,
    pub tilt: GirsanovTilt,
}

/// Parse `raw` as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Apply one `key.path=value` override to a parsed document.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key `{key}` has an empty component")));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut table = doc;
    for p in parents {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    table.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

fn require(v: Option<f64>, field: &str, kind: &str) -> Result<f64> {
    v.ok_or_else(|| CliError::invalid(field, format!("required for model kind `{kind}`")))
}

fn finite(v: f64, field: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::invalid(field, "must be finite"))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            stage: "config",
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.sim.dt, self.sim.delay, self.model.dim).stage(VALIDATE)
    }

    fn check_fields_for_kind(&self) -> Result<()> {
        let m = &self.model;
        let present = [
            ("model.noise_dim", m.noise_dim.is_some(), &[ModelKind::Zero][..]),
            ("model.k", m.k.is_some(), &[ModelKind::Linear]),
            ("model.c1", m.c1.is_some(), &[ModelKind::Linear]),
            ("model.c3", m.c3.is_some(), &[ModelKind::Linear]),
            ("model.drift_weights", m.drift_weights.is_some(), &[ModelKind::Linear]),
            ("model.diffusion_weights", m.diffusion_weights.is_some(), &[ModelKind::Linear]),
            ("model.sigma_cap", m.sigma_cap.is_some(), &[ModelKind::Linear]),
            ("model.decay", m.decay.is_some(), &[ModelKind::LinearDelay]),
            ("model.delayed", m.delayed.is_some(), &[ModelKind::LinearDelay]),
            ("model.sigma", m.sigma.is_some(), &[ModelKind::LinearDelay]),
            ("model.neutral_kappa", m.neutral_kappa.is_some(), &[ModelKind::LinearDelay]),
        ];
        for (field, set, kinds) in present {
            if set && !kinds.contains(&m.kind) {
                return Err(CliError::invalid(field, format!("not used by model kind `{}`", kind_name(m.kind))));
            }
        }
        Ok(())
    }

    fn weights(&self, spec: &WeightsSpec, grid: Grid, field: &str) -> Result<Vec<f64>> {
        match spec {
            WeightsSpec::Named(n) if n == "uniform" => Ok(uniform_delay_weights(grid)),
            WeightsSpec::Named(n) => Err(CliError::invalid(field, format!("unknown measure `{n}`; use \"uniform\" or a vector"))),
            WeightsSpec::Values(v) if v.len() != grid.segment_points() => Err(CliError::invalid(
                field,
                format!("needs {} weights (one per segment grid point)", grid.segment_points()),
            )),
            WeightsSpec::Values(v) => Ok(v.clone()),
        }
    }

    pub fn coefficients(&self) -> Result<CoefficientSet> {
        self.check_fields_for_kind()?;
        let m = &self.model;
        let grid = self.grid()?;
        let name = kind_name(m.kind);
        let mut set = match m.kind {
            ModelKind::Zero => model::zero(m.dim, m.noise_dim.unwrap_or(m.dim)).stage(VALIDATE)?,
            ModelKind::Brownian => model::brownian(m.dim).stage(VALIDATE)?,
            ModelKind::LinearDelay => {
                let decay = finite(require(m.decay, "model.decay", name)?, "model.decay")?;
                let delayed = finite(m.delayed.unwrap_or(0.0), "model.delayed")?;
                let sigma = finite(m.sigma.unwrap_or(0.0), "model.sigma")?;
                let set = model::linear_delay(m.dim, decay, delayed, sigma).stage(VALIDATE)?;
                match m.neutral_kappa {
                    None => set,
                    Some(kappa) => {
                        let kappa = finite(kappa, "model.neutral_kappa")?;
                        let mut d = set.declared().clone();
                        d.kappa = Some(kappa.abs());
                        set.with_neutral(model::delayed_neutral(kappa)).with_declared(d).stage(VALIDATE)?
                    }
                }
            }
            ModelKind::Linear => {
                let ex = LinearExample {
                    dim: m.dim,
                    k: require(m.k, "model.k", name)?,
                    c1: require(m.c1, "model.c1", name)?,
                    drift_weights: match &m.drift_weights {
                        Some(w) => self.weights(&WeightsSpec::Values(w.clone()), grid, "model.drift_weights")?,
                        None => Vec::new(),
                    },
                    c3: m.c3.unwrap_or(0.0),
                    diffusion_weights: match &m.diffusion_weights {
                        Some(w) => self.weights(&WeightsSpec::Values(w.clone()), grid, "model.diffusion_weights")?,
                        None => Vec::new(),
                    },
                    sigma_cap: m.sigma_cap,
                };
                model::linear_coefficients(&ex).stage(VALIDATE)?
            }
        };
        if let Some(diag) = &m.stiff {
            set = set.with_stiff(diag.clone()).stage(VALIDATE)?;
        }
        let given = &m.declared;
        let mut d = set.declared().clone();
        let merge = |slot: &mut Option<f64>, v: Option<f64>| {
            if v.is_some() {
                *slot = v;
            }
        };
        merge(&mut d.kappa, given.kappa);
        merge(&mut d.lambda1, given.lambda1);
        merge(&mut d.lambda2, given.lambda2);
        merge(&mut d.lambda3, given.lambda3);
        merge(&mut d.k, given.k);
        merge(&mut d.k1, given.k1);
        merge(&mut d.k2, given.k2);
        if let Some(w) = &given.delay_weights {
            d.delay_weights = Some(self.weights(w, grid, "model.declared.delay_weights")?);
        }
        set.with_declared(d).stage(VALIDATE)
    }

    pub fn sim_config(&self, coeffs: &CoefficientSet) -> Result<SimConfig> {
        let s = &self.sim;
        let mut cfg = SimConfig::new(s.horizon, s.dt, s.delay, coeffs.dim(), coeffs.noise_dim())
            .with_paths(s.n_paths)
            .with_seed(s.seed);
        cfg.fp_tol = s.fp_tol;
        cfg.fp_max_iter = s.fp_max_iter;
        cfg.validate_for(coeffs).stage(VALIDATE)?;
        Ok(cfg)
    }

    fn initial_value(&self) -> Result<Vec<f64>> {
        let d = self.model.dim;
        match &self.initial.value {
            None => Ok(vec![0.0; d]),
            Some(v) if v.len() != d => Err(CliError::invalid("initial.value", format!("needs {d} entries"))),
            Some(v) if v.iter().any(|x| !x.is_finite()) => Err(CliError::invalid("initial.value", "entries must be finite")),
            Some(v) => Ok(v.clone()),
        }
    }

    pub fn initial_law(&self) -> Result<InitialLaw> {
        let grid = self.grid()?;
        let center = Segment::constant(grid, &self.initial_value()?).stage(VALIDATE)?;
        match self.initial.kind {
            InitialKind::Constant => {
                if self.initial.scale.is_some() {
                    return Err(CliError::invalid("initial.scale", "only used by kind `random`"));
                }
                Ok(InitialLaw::Dirac(center))
            }
            InitialKind::Random => {
                let sampler = SegmentSampler::new(grid, self.initial.scale.unwrap_or(1.0))
                    .and_then(|s| s.around(center))
                    .stage(VALIDATE)?;
                Ok(InitialLaw::Random(sampler))
            }
        }
    }

    pub fn tilt(&self, noise_dim: usize) -> Result<GirsanovTilt> {
        let t = &self.tilt;
        let unused = |field: &str, set: bool| {
            if set {
                Err(CliError::invalid(field, format!("not used by tilt kind `{}`", tilt_name(t.kind))))
            } else {
                Ok(())
            }
        };
        let gain = || {
            t.gain
                .ok_or_else(|| CliError::invalid("tilt.gain", format!("required for tilt kind `{}`", tilt_name(t.kind))))
        };
        match t.kind {
            TiltKind::Zero => {
                unused("tilt.h", t.h.is_some())?;
                unused("tilt.gain", t.gain.is_some())?;
                unused("tilt.h_bound", t.h_bound.is_some())?;
                Ok(GirsanovTilt::zero(noise_dim))
            }
            TiltKind::Constant => {
                unused("tilt.gain", t.gain.is_some())?;
                unused("tilt.h_bound", t.h_bound.is_some())?;
                let h = t.h.clone().ok_or_else(|| CliError::invalid("tilt.h", "required for tilt kind `constant`"))?;
                if h.len() != noise_dim {
                    return Err(CliError::invalid("tilt.h", format!("needs {noise_dim} entries (the noise dimension)")));
                }
                GirsanovTilt::constant(h).stage(VALIDATE)
            }
            TiltKind::TanhFeedback => {
                unused("tilt.h", t.h.is_some())?;
                let c = gain()?;
                match t.h_bound {
                    None => GirsanovTilt::tanh_feedback(c, noise_dim).stage(VALIDATE),
                    Some(b) => GirsanovTilt::feedback(noise_dim, b, move |_, seg, out| {
                        let x = seg.endpoint();
                        for (j, o) in out.iter_mut().enumerate() {
                            *o = c * x[j % x.len()].tanh();
                        }
                    })
                    .stage(VALIDATE),
                }
            }
            TiltKind::LinearFeedback => {
                unused("tilt.h", t.h.is_some())?;
                let c = finite(gain()?, "tilt.gain")?;
                let b = t
                    .h_bound
                    .ok_or_else(|| CliError::invalid("tilt.h_bound", "required for tilt kind `linear-feedback`"))?;
                GirsanovTilt::feedback(noise_dim, b, move |_, seg, out| {
                    let x = seg.endpoint();
                    for (j, o) in out.iter_mut().enumerate() {
                        *o = -c * x[j % x.len()];
                    }
                })
                .stage(VALIDATE)
            }
        }
    }

    pub fn experiment(&self) -> Result<Experiment> {
        if let Some(0) = self.threads {
            return Err(CliError::invalid("threads", "must be >= 1"));
        }
        let coeffs = self.coefficients()?;
        let sim = self.sim_config(&coeffs)?;
        let initial = self.initial_law()?;
        let tilt = self.tilt(coeffs.noise_dim())?;
        Ok(Experiment {
            coeffs,
            initial,
            sim,
            tilt,
        })
    }

    pub fn inequality(&self) -> Result<Inequality> {
        let q = &self.inequality;
        let lambda = q.lambda;
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(CliError::invalid("inequality.lambda", "must be finite and >= 0"));
        }
        let case = if lambda == 0.0 {
            L2Case::Contractive
        } else {
            L2Case::Weighted { lambda }
        };
        match q.kind {
            InequalityKind::Uniform | InequalityKind::StiffUniform if lambda != 0.0 => {
                Err(CliError::invalid("inequality.lambda", "only used by the L² inequalities"))
            }
            InequalityKind::Uniform => Ok(Inequality::Uniform),
            InequalityKind::StiffUniform => Ok(Inequality::StiffUniform),
            InequalityKind::L2 => Ok(Inequality::L2(case)),
            InequalityKind::StiffL2 => Ok(Inequality::StiffL2(case)),
        }
    }

    pub fn harness(&self, sim: &SimConfig) -> Result<HarnessConfig> {
        let q = &self.inequality;
        let mut cfg = HarnessConfig::new(self.inequality()?, sim.clone());
        cfg.alpha_variant = q.alpha_exponent_variant;
        cfg.bootstrap = q.bootstrap;
        cfg.confidence = q.confidence;
        cfg.checker_samples = q.checker_samples;
        cfg.checker_scale = q.checker_scale;
        cfg.shift_bound = q.shift_bound;
        cfg.solver = match q.solver {
            SolverKind::Exact => OtSolver::Exact { cap: q.exact_cap },
            SolverKind::Sinkhorn => {
                if !(q.epsilon.is_finite() && q.epsilon > 0.0) {
                    return Err(CliError::invalid("inequality.epsilon", "must be finite and > 0"));
                }
                OtSolver::Sinkhorn(SinkhornConfig {
                    epsilon_rel: q.epsilon,
                    max_iter: q.sinkhorn_max_iter,
                    tol: q.sinkhorn_tol,
                })
            }
        };
        cfg.validate().stage(VALIDATE)?;
        Ok(cfg)
    }

    pub fn study(&self) -> Result<StudyConfig> {
        let c = &self.convergence;
        let fp = FixedPoint {
            tol: self.sim.fp_tol,
            max_iter: self.sim.fp_max_iter,
        };
        Ok(StudyConfig {
            horizon: self.sim.horizon,
            delay: self.sim.delay,
            dts: c.dts.clone(),
            reference_factor: c.reference_factor,
            n_paths: c.n_paths,
            seed: self.sim.seed,
            fp,
        })
    }

    /// Observable for the importance check.
    pub fn observable(&self) -> impl Fn(&SegmentPath) -> f64 + Sync {
        let obs = self.importance.observable;
        move |p: &SegmentPath| match obs {
            Observable::Endpoint => p.value_at_step(p.steps())[0],
            Observable::SupNorm => (0..=p.steps())
                .map(|k| p.value_at_step(k).iter().map(|x| x * x).sum::<f64>().sqrt())
                .fold(0.0, f64::max),
        }
    }
}

pub fn kind_name(k: ModelKind) -> &'static str {
    match k {
        ModelKind::Zero => "zero",
        ModelKind::Brownian => "brownian",
        ModelKind::LinearDelay => "linear-delay",
        ModelKind::Linear => "linear",
    }
}

fn tilt_name(k: TiltKind) -> &'static str {
    match k {
        TiltKind::Zero => "zero",
        TiltKind::Constant => "constant",
        TiltKind::TanhFeedback => "tanh-feedback",
        TiltKind::LinearFeedback => "linear-feedback",
    }
}
