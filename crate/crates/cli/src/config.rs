//! Run configuration: TOML schema, defaults, validation and construction of
//! the core objects.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stefan_core::coefficients::CoefficientsBuilder;
use stefan_core::expr::{Expr, Var};
use stefan_core::scenarios::{bump_state, global_existence, noisy_stefan, superlinear_front};
use stefan_core::validation::stefan_profile;
use stefan_core::{
    Grid1D, ModelCoefficients, NoiseKernel, ProbeBox, Scheme, SolverConfig, StefanSimilarity, SystemState,
};

use crate::error::CliError;
use crate::preset::{InitialPreset, KernelPreset, ModelPreset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(with = "as_string")]
    pub preset: ModelPreset,
    #[serde(default = "one")]
    pub eta_plus: f64,
    #[serde(default = "one")]
    pub eta_minus: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomExpressions>,
}

/// Coefficient expressions for the `custom` preset; `μ` in `x, y, z`, `σ` in `x, y`, `ρ` in `g1, g2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomExpressions {
    #[serde(default = "zero_expr")]
    pub mu_plus: String,
    #[serde(default = "zero_expr")]
    pub mu_minus: String,
    #[serde(default = "zero_expr")]
    pub sigma_plus: String,
    #[serde(default = "zero_expr")]
    pub sigma_minus: String,
    #[serde(default = "zero_expr")]
    pub rho: String,
}

impl Default for CustomExpressions {
    fn default() -> Self {
        Self {
            mu_plus: zero_expr(),
            mu_minus: zero_expr(),
            sigma_plus: zero_expr(),
            sigma_minus: zero_expr(),
            rho: zero_expr(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(with = "as_string")]
    pub preset: KernelPreset,
    /// Evaluation range of the kernel; defaults to `[−1.25 L, 1.25 L]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    /// Quadrature cells per Gaussian width.
    #[serde(default = "ten")]
    pub cells_per_width: f64,
    /// Quadrature cells for the indicator kernel.
    #[serde(default = "hundred")]
    pub m_y: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { preset: KernelPreset::Zero, range: None, cells_per_width: 10.0, m_y: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Interior nodes per phase.
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(with = "as_string")]
    pub preset: InitialPreset,
    /// Initial front position (for `stefan_similarity`, the origin `x0`).
    #[serde(default)]
    pub xstar: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { preset: InitialPreset::Bump { a: 0.5, b: 0.2 }, xstar: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "one")]
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_n: Option<f64>,
    #[serde(default = "default_threshold")]
    pub blowup_threshold: f64,
    #[serde(default = "default_threshold")]
    pub boundary_threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Steps between stored full states; `0` keeps the first and last only.
    #[serde(default)]
    pub record_stride: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            t_end: 1.0,
            truncation_n: None,
            blowup_threshold: default_threshold(),
            boundary_threshold: default_threshold(),
            seed: 0,
            scheme: Scheme::default(),
            record_stride: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
    /// Write the stored fixed-frame profiles as wide files.
    #[serde(default)]
    pub profiles: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), format: OutputFormat::Csv, profiles: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    #[default]
    Single,
    Ensemble,
    Validate,
    Benchmark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    #[serde(default)]
    pub kind: ModeKind,
    #[serde(default = "hundred")]
    pub n_paths: usize,
    #[serde(default = "one_usize")]
    pub workers: usize,
    /// Exit with status 2 when a blow-up is detected.
    #[serde(default)]
    pub fail_on_blowup: bool,
}

impl Default for ModeConfig {
    fn default() -> Self {
        Self { kind: ModeKind::Single, n_paths: 100, workers: 1, fail_on_blowup: false }
    }
}

/// Probe lattice for `validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default = "probe_x")]
    pub x: [f64; 2],
    #[serde(default = "probe_yz")]
    pub y: [f64; 2],
    #[serde(default = "probe_yz")]
    pub z: [f64; 2],
    #[serde(default = "probe_points")]
    pub points: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { x: probe_x(), y: probe_yz(), z: probe_yz(), points: probe_points() }
    }
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn ten() -> f64 {
    10.0
}
fn hundred() -> usize {
    100
}
fn zero_expr() -> String {
    "0".to_string()
}
fn default_dt() -> f64 {
    1e-4
}
fn default_threshold() -> f64 {
    1e6
}
fn default_dir() -> PathBuf {
    PathBuf::from("output")
}
fn probe_x() -> [f64; 2] {
    let p = ProbeBox::default();
    [p.x.0, p.x.1]
}
fn probe_yz() -> [f64; 2] {
    let p = ProbeBox::default();
    [p.y.0, p.y.1]
}
fn probe_points() -> usize {
    ProbeBox::default().points
}

mod as_string {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::fmt::Display;

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: TryFrom<String, Error = String>,
        D: Deserializer<'de>,
    {
        T::try_from(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

fn field(path: &str, reason: impl Into<String>) -> CliError {
    CliError::Field { path: path.to_string(), reason: reason.into() }
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(field(path, format!("must be positive, got {v}")))
    }
}

fn check_range(path: &str, r: [f64; 2]) -> Result<(), CliError> {
    if r[0].is_finite() && r[1].is_finite() && r[0] < r[1] {
        Ok(())
    } else {
        Err(field(path, format!("need a finite range with lower < upper, got [{}, {}]", r[0], r[1])))
    }
}

/// Reads, parses and validates a config file; defaults are filled in.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    cfg.resolve();
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Makes implicit defaults explicit so that the echoed config is complete.
    fn resolve(&mut self) {
        if self.kernel.range.is_none() {
            let l = 1.25 * self.grid.length;
            self.kernel.range = Some([-l, l]);
        }
        if self.model.preset == ModelPreset::Custom && self.model.custom.is_none() {
            self.model.custom = Some(CustomExpressions::default());
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        positive("model.eta_plus", self.model.eta_plus)?;
        positive("model.eta_minus", self.model.eta_minus)?;
        if !(self.model.c.is_finite() && self.model.c >= 0.0) {
            return Err(field("model.c", format!("must be non-negative, got {}", self.model.c)));
        }
        match (&self.model.preset, &self.model.custom) {
            (ModelPreset::Custom, Some(c)) => {
                let xyz = [Var::X, Var::Y, Var::Z];
                let xy = [Var::X, Var::Y];
                let g = [Var::G1, Var::G2];
                for (name, src, vars) in [
                    ("model.custom.mu_plus", &c.mu_plus, &xyz[..]),
                    ("model.custom.mu_minus", &c.mu_minus, &xyz[..]),
                    ("model.custom.sigma_plus", &c.sigma_plus, &xy[..]),
                    ("model.custom.sigma_minus", &c.sigma_minus, &xy[..]),
                    ("model.custom.rho", &c.rho, &g[..]),
                ] {
                    Expr::parse_with(src, vars).map_err(|e| field(name, e.to_string()))?;
                }
            }
            (ModelPreset::Custom, None) => {}
            (_, Some(_)) => return Err(field("model.custom", "only allowed with preset \"custom\"")),
            _ => {}
        }
        match self.model.preset {
            ModelPreset::Stefan { varrho } | ModelPreset::NoisyStefan { varrho, .. } => {
                positive("model.preset", varrho).map_err(|_| field("model.preset", "varrho must be positive"))?
            }
            ModelPreset::SuperlinearFront { varrho, .. } if varrho < 0.0 => {
                return Err(field("model.preset", "varrho must be non-negative"))
            }
            _ => {}
        }

        match self.kernel.preset {
            KernelPreset::Gaussian { width } => positive("kernel.preset", width)?,
            KernelPreset::Indicator { a, b } => check_range("kernel.preset", [a, b])?,
            KernelPreset::Zero => {}
        }
        if let Some(r) = self.kernel.range {
            check_range("kernel.range", r)?;
        }
        positive("kernel.cells_per_width", self.kernel.cells_per_width)?;
        if self.kernel.m_y == 0 {
            return Err(field("kernel.m_y", "must be at least 1"));
        }

        if self.grid.n < 2 {
            return Err(field("grid.n", format!("need at least 2 interior nodes, got {}", self.grid.n)));
        }
        positive("grid.L", self.grid.length)?;

        if !self.initial.xstar.is_finite() {
            return Err(field("initial.xstar", "must be finite"));
        }
        if let InitialPreset::StefanSimilarity { t0, .. } = self.initial.preset {
            if self.model.preset.stefan_varrho().is_none() {
                return Err(field(
                    "initial.preset",
                    "stefan_similarity needs a model with the Stefan front law (stefan or noisy_stefan)",
                ));
            }
            positive("initial.preset", t0).map_err(|_| field("initial.preset", "t0 must be positive"))?;
        }

        let s = &self.solver;
        positive("solver.dt", s.dt)?;
        positive("solver.t_end", s.t_end)?;
        if s.dt > s.t_end {
            return Err(field("solver.dt", format!("dt = {} exceeds t_end = {}", s.dt, s.t_end)));
        }
        if let Some(n) = s.truncation_n {
            positive("solver.truncation_n", n)?;
        }
        positive("solver.blowup_threshold", s.blowup_threshold)?;
        positive("solver.boundary_threshold", s.boundary_threshold)?;

        if self.mode.n_paths == 0 {
            return Err(field("mode.n_paths", "must be at least 1"));
        }
        if self.mode.workers == 0 {
            return Err(field("mode.workers", "must be at least 1"));
        }
        check_range("probe.x", self.probe.x)?;
        check_range("probe.y", self.probe.y)?;
        check_range("probe.z", self.probe.z)?;
        if self.probe.points == 0 {
            return Err(field("probe.points", "must be at least 1"));
        }
        Ok(())
    }

    /// The complete config as TOML, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 over the canonical JSON form, ignoring the output directory and
    /// the worker count, which do not affect results.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v["output"].as_object_mut().map(|o| o.remove("dir"));
        v["mode"].as_object_mut().map(|o| o.remove("workers"));
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid(&self) -> Result<Grid1D, CliError> {
        Ok(Grid1D::new(self.grid.n, self.grid.length)?)
    }

    fn coefficient_builder(&self) -> Result<CoefficientsBuilder, CliError> {
        let b = match &self.model.preset {
            ModelPreset::Heat => ModelCoefficients::heat(),
            ModelPreset::Stefan { varrho } => ModelCoefficients::stefan(*varrho),
            ModelPreset::Burgers => ModelCoefficients::burgers(),
            ModelPreset::Reaction { f } => {
                let e = Expr::parse_with(f, &[Var::Y])?;
                ModelCoefficients::reaction(move |y| e.eval_xyz(0.0, y, 0.0)).name(format!("reaction({f})"))
            }
            ModelPreset::Custom => {
                let c = self.model.custom.clone().unwrap_or_default();
                ModelCoefficients::from_expressions(&c.mu_plus, &c.mu_minus, &c.sigma_plus, &c.sigma_minus, &c.rho)?
            }
            ModelPreset::NoisyStefan { varrho, s } => noisy_stefan(*varrho, *s),
            ModelPreset::GlobalExistence { s } => global_existence(*s),
            ModelPreset::SuperlinearFront { varrho, s } => superlinear_front(*varrho, *s),
            ModelPreset::SigmaViolation { level } => {
                let level = *level;
                ModelCoefficients::stefan(1.0)
                    .name(format!("sigma_violation({level})"))
                    .sigma_plus(move |_, _| level)
                    .sigma_minus(move |_, _| level)
            }
        };
        Ok(b.eta(self.model.eta_plus, self.model.eta_minus).c(self.model.c))
    }

    /// Coefficients with the boundary and affine checks applied.
    pub fn model(&self) -> Result<ModelCoefficients, CliError> {
        Ok(self.coefficient_builder()?.build()?)
    }

    /// Coefficients without the boundary checks, for the assumption validator.
    pub fn model_unvalidated(&self) -> Result<ModelCoefficients, CliError> {
        Ok(self.coefficient_builder()?.build_unvalidated()?)
    }

    pub fn kernel(&self) -> Result<NoiseKernel, CliError> {
        let r = self.kernel.range.unwrap_or([-1.25 * self.grid.length, 1.25 * self.grid.length]);
        Ok(match self.kernel.preset {
            KernelPreset::Zero => NoiseKernel::zero(),
            KernelPreset::Gaussian { width } => {
                NoiseKernel::gaussian_resolved(width, (r[0], r[1]), self.kernel.cells_per_width)?
            }
            KernelPreset::Indicator { a, b } => NoiseKernel::indicator(a, b, self.kernel.m_y)?,
        })
    }

    /// Similarity solution matching the initial data, if any.
    pub fn similarity(&self) -> Result<Option<StefanSimilarity>, CliError> {
        match (self.initial.preset.clone(), self.model.preset.stefan_varrho()) {
            (InitialPreset::StefanSimilarity { amplitude, t0 }, Some(varrho)) => Ok(Some(StefanSimilarity::new(
                self.model.eta_plus,
                varrho,
                amplitude,
                t0,
                self.initial.xstar,
            )?)),
            _ => Ok(None),
        }
    }

    pub fn initial_state(&self) -> Result<SystemState, CliError> {
        let g = self.grid()?;
        let x = self.initial.xstar;
        Ok(match self.initial.preset {
            InitialPreset::Zero => SystemState::zeros(g, x),
            InitialPreset::Bump { a, b } => bump_state(g, a, b, x)?,
            InitialPreset::StefanSimilarity { .. } => {
                let ss = self.similarity()?.ok_or_else(|| field("initial.preset", "needs a Stefan model"))?;
                stefan_profile(&ss, 0.0, g)?
            }
        })
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            dt: s.dt,
            t_end: s.t_end,
            truncation_n: s.truncation_n,
            blowup_threshold: s.blowup_threshold,
            boundary_threshold: s.boundary_threshold,
            seed: s.seed,
            scheme: s.scheme,
            record_stride: s.record_stride,
            record_noise: false,
        }
    }

    pub fn probe_box(&self) -> ProbeBox {
        let p = &self.probe;
        ProbeBox { x: (p.x[0], p.x[1]), y: (p.y[0], p.y[1]), z: (p.z[0], p.z[1]), points: p.points }
    }
}
