//! Nemytskii coefficients `μ±`, `σ±`, `ρ`, the truncation `h_N`, and a
//! sampling-based assumption checker.

use std::sync::Arc;

use crate::error::{invalid, Error, Phase, Result};
use crate::expr::{Expr, Var};
use crate::grid::{first_derivative, BoundaryTrace, Generator, PhaseProfile, SystemState};

pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type Fn3 = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Claimed decomposition `σ₊(x,y) = σ¹₊(x) + σ²₊(x)·y`, `σ₋(−x,y) = σ¹₋(x) + σ²₋(x)·y`, `x ≥ 0`.
#[derive(Clone)]
pub struct AffineSigma {
    pub sigma1_plus: Fn1,
    pub sigma2_plus: Fn1,
    pub sigma1_minus: Fn1,
    pub sigma2_minus: Fn1,
}

impl AffineSigma {
    /// `σ¹ ≡ 0`, `σ² ≡ s` on both phases.
    pub fn linear(s: f64) -> Self {
        let zero: Fn1 = Arc::new(|_| 0.0);
        let slope: Fn1 = Arc::new(move |_| s);
        Self {
            sigma1_plus: zero.clone(),
            sigma2_plus: slope.clone(),
            sigma1_minus: zero,
            sigma2_minus: slope,
        }
    }
}

#[derive(Clone)]
pub struct ModelCoefficients {
    pub name: String,
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub c: f64,
    pub mu_plus: Fn3,
    pub mu_minus: Fn3,
    pub sigma_plus: Fn2,
    pub sigma_minus: Fn2,
    pub rho: Fn2,
    pub affine_sigma: Option<AffineSigma>,
}

impl std::fmt::Debug for ModelCoefficients {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelCoefficients")
            .field("name", &self.name)
            .field("eta_plus", &self.eta_plus)
            .field("eta_minus", &self.eta_minus)
            .field("c", &self.c)
            .field("affine_sigma", &self.affine_sigma.is_some())
            .finish_non_exhaustive()
    }
}

fn zero3() -> Fn3 {
    Arc::new(|_, _, _| 0.0)
}

fn zero2() -> Fn2 {
    Arc::new(|_, _| 0.0)
}

impl ModelCoefficients {
    pub fn builder(name: impl Into<String>) -> CoefficientsBuilder {
        CoefficientsBuilder {
            mc: ModelCoefficients {
                name: name.into(),
                eta_plus: 1.0,
                eta_minus: 1.0,
                c: 1.0,
                mu_plus: zero3(),
                mu_minus: zero3(),
                sigma_plus: zero2(),
                sigma_minus: zero2(),
                rho: zero2(),
                affine_sigma: None,
            },
        }
    }

    /// All coefficients zero: the pure shifted heat flow.
    pub fn heat() -> CoefficientsBuilder {
        Self::builder("heat")
    }

    /// `μ ≡ 0`, `σ ≡ 0`, `ρ(g1, g2) = ϱ·(g2 − g1)`.
    pub fn stefan(varrho: f64) -> CoefficientsBuilder {
        Self::builder(format!("stefan({varrho})")).rho(move |g1, g2| varrho * (g2 - g1))
    }

    /// `μ₊(x,y,z) = μ₋(−x,y,z) = y·z`.
    pub fn burgers() -> CoefficientsBuilder {
        Self::builder("burgers")
            .mu_plus(|_, y, z| y * z)
            .mu_minus(|_, y, z| y * z)
    }

    /// `μ±(x,y,z) = f(y)`.
    pub fn reaction(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> CoefficientsBuilder {
        let f: Fn1 = Arc::new(f);
        let g = f.clone();
        Self::builder("reaction")
            .mu_plus(move |_, y, _| f(y))
            .mu_minus(move |_, y, _| g(y))
    }

    /// Coefficients given as expressions; `μ` in `x, y, z`, `σ` in `x, y`, `ρ` in `g1, g2`.
    pub fn from_expressions(
        mu_plus: &str,
        mu_minus: &str,
        sigma_plus: &str,
        sigma_minus: &str,
        rho: &str,
    ) -> Result<CoefficientsBuilder> {
        let mp = Expr::parse_with(mu_plus, &[Var::X, Var::Y, Var::Z])?;
        let mm = Expr::parse_with(mu_minus, &[Var::X, Var::Y, Var::Z])?;
        let sp = Expr::parse_with(sigma_plus, &[Var::X, Var::Y])?;
        let sm = Expr::parse_with(sigma_minus, &[Var::X, Var::Y])?;
        let r = Expr::parse_with(rho, &[Var::G1, Var::G2])?;
        Ok(Self::builder("custom")
            .mu_plus(move |x, y, z| mp.eval_xyz(x, y, z))
            .mu_minus(move |x, y, z| mm.eval_xyz(x, y, z))
            .sigma_plus(move |x, y| sp.eval_xyz(x, y, 0.0))
            .sigma_minus(move |x, y| sm.eval_xyz(x, y, 0.0))
            .rho(move |g1, g2| r.eval_g(g1, g2)))
    }

    pub fn generator(&self) -> Generator {
        Generator {
            eta_plus: self.eta_plus,
            eta_minus: self.eta_minus,
            c: self.c,
        }
    }

    pub fn eta(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Plus => self.eta_plus,
            Phase::Minus => self.eta_minus,
        }
    }

    /// A copy with both diffusions multiplied by `s`.
    pub fn sigma_scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        let sp = self.sigma_plus.clone();
        let sm = self.sigma_minus.clone();
        out.sigma_plus = Arc::new(move |x, y| s * sp(x, y));
        out.sigma_minus = Arc::new(move |x, y| s * sm(x, y));
        out.affine_sigma = self.affine_sigma.as_ref().map(|a| {
            let scale = |f: &Fn1| -> Fn1 {
                let f = f.clone();
                Arc::new(move |x| s * f(x))
            };
            AffineSigma {
                sigma1_plus: scale(&a.sigma1_plus),
                sigma2_plus: scale(&a.sigma2_plus),
                sigma1_minus: scale(&a.sigma1_minus),
                sigma2_minus: scale(&a.sigma2_minus),
            }
        });
        out
    }
}

pub struct CoefficientsBuilder {
    mc: ModelCoefficients,
}

impl CoefficientsBuilder {
    pub fn eta(mut self, plus: f64, minus: f64) -> Self {
        self.mc.eta_plus = plus;
        self.mc.eta_minus = minus;
        self
    }

    pub fn c(mut self, c: f64) -> Self {
        self.mc.c = c;
        self
    }

    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.mc.name = name.into();
        self
    }

    pub fn mu_plus(mut self, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.mc.mu_plus = Arc::new(f);
        self
    }

    pub fn mu_minus(mut self, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.mc.mu_minus = Arc::new(f);
        self
    }

    pub fn sigma_plus(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.mc.sigma_plus = Arc::new(f);
        self
    }

    pub fn sigma_minus(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.mc.sigma_minus = Arc::new(f);
        self
    }

    pub fn rho(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.mc.rho = Arc::new(f);
        self
    }

    /// `σ±(x, y) = s·y` on both phases, with the matching affine decomposition.
    pub fn multiplicative_noise(self, s: f64) -> Self {
        self.sigma_plus(move |_, y| s * y)
            .sigma_minus(move |_, y| s * y)
            .affine(AffineSigma::linear(s))
    }

    /// Builds `σ±` from an affine decomposition and records it as claimed.
    pub fn affine_sigma(self, a: AffineSigma) -> Self {
        let (p1, p2) = (a.sigma1_plus.clone(), a.sigma2_plus.clone());
        let (m1, m2) = (a.sigma1_minus.clone(), a.sigma2_minus.clone());
        self.sigma_plus(move |x, y| p1(x) + p2(x) * y)
            .sigma_minus(move |x, y| m1(-x) + m2(-x) * y)
            .affine(a)
    }

    /// Claims an affine decomposition without changing `σ±`; checked by [`CoefficientsBuilder::build`].
    pub fn affine(mut self, a: AffineSigma) -> Self {
        self.mc.affine_sigma = Some(a);
        self
    }

    /// Validates diffusivities, the boundary condition `σ±(0,0) = 0` and any
    /// claimed affine decomposition.
    pub fn build(self) -> Result<ModelCoefficients> {
        let mc = self.build_unvalidated()?;
        for (name, f) in [("sigma_plus", &mc.sigma_plus), ("sigma_minus", &mc.sigma_minus)] {
            let r = f(0.0, 0.0);
            if !(r.abs() <= 1e-12) {
                return Err(invalid(
                    if name == "sigma_plus" { "model.sigma_plus" } else { "model.sigma_minus" },
                    format!("{name}(0, 0) = {r}, the boundary condition requires 0"),
                ));
            }
        }
        if mc.affine_sigma.is_some() {
            let r = affine_residual(&mc, &ProbeBox::default());
            if !(r <= 1e-10) {
                return Err(invalid(
                    "model.affine_sigma",
                    format!("claimed affine decomposition misses sigma by {r:e}"),
                ));
            }
        }
        Ok(mc)
    }

    /// Checks only `η± > 0` and `c ≥ 0`.
    pub fn build_unvalidated(self) -> Result<ModelCoefficients> {
        let mc = self.mc;
        for (name, v) in [("model.eta_plus", mc.eta_plus), ("model.eta_minus", mc.eta_minus)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(mc.c.is_finite() && mc.c >= 0.0) {
            return Err(invalid("model.c", format!("must be non-negative, got {}", mc.c)));
        }
        Ok(mc)
    }
}

/// Quintic smoothstep cutoff: `1` on `(−∞, N]`, `0` on `[N+1, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TruncationLevel {
    pub n: f64,
}

impl TruncationLevel {
    /// `sup |h_N'|`, independent of `N`.
    pub const LIPSCHITZ: f64 = 1.875;

    pub fn new(n: f64) -> Result<Self> {
        if !(n.is_finite() && n > 0.0) {
            return Err(invalid("solver.truncation_n", format!("must be positive, got {n}")));
        }
        Ok(Self { n })
    }

    pub fn h(&self, x: f64) -> f64 {
        let s = x - self.n;
        if s <= 0.0 {
            1.0
        } else if s >= 1.0 {
            0.0
        } else {
            1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
        }
    }

    pub fn h_prime(&self, x: f64) -> f64 {
        let s = x - self.n;
        if s <= 0.0 || s >= 1.0 {
            0.0
        } else {
            -30.0 * s * s * (1.0 - s) * (1.0 - s)
        }
    }
}

/// `h_N(norm) · value`.
pub fn truncate_coefficient(t: &TruncationLevel, norm: f64, value: &[f64]) -> Vec<f64> {
    let f = t.h(norm);
    value.iter().map(|v| v * f).collect()
}

/// `B(u)`: phase drifts and front component, plus `ρ(I(u))` on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    pub b1: PhaseProfile,
    pub b2: PhaseProfile,
    /// `ρ(I(u)) + c·x*`.
    pub front: f64,
    pub rho: f64,
}

/// Evaluates `ρ` at a trace, rejecting non-finite output.
pub fn eval_rho(mc: &ModelCoefficients, tr: &BoundaryTrace) -> Result<f64> {
    let r = (mc.rho)(tr.g1, tr.g2);
    if !r.is_finite() {
        return Err(Error::InvalidFront("rho"));
    }
    Ok(r)
}

/// Phase 1: `μ₊(x, u1, u1') + u1'·ρ + c·u1`; phase 2: `μ₋(−x, u2, u2') − u2'·ρ + c·u2`.
pub fn eval_drift(mc: &ModelCoefficients, s: &SystemState, tr: &BoundaryTrace) -> Result<Drift> {
    let rho = eval_rho(mc, tr)?;
    let g = s.grid();
    let d1 = first_derivative(&s.u1);
    let d2 = first_derivative(&s.u2);
    let mut b1 = Vec::with_capacity(g.n());
    let mut b2 = Vec::with_capacity(g.n());
    for j in 0..g.n() {
        let x = g.node(j);
        let (u, du) = (s.u1.values()[j], d1.values()[j]);
        let v = (mc.mu_plus)(x, u, du) + du * rho + mc.c * u;
        if !v.is_finite() {
            return Err(Error::InvalidState { what: "drift", phase: Phase::Plus, node: j });
        }
        b1.push(v);
        let (u, du) = (s.u2.values()[j], d2.values()[j]);
        let v = (mc.mu_minus)(-x, u, du) - du * rho + mc.c * u;
        if !v.is_finite() {
            return Err(Error::InvalidState { what: "drift", phase: Phase::Minus, node: j });
        }
        b2.push(v);
    }
    Ok(Drift {
        b1: PhaseProfile::new(g, b1)?,
        b2: PhaseProfile::new(g, b2)?,
        front: rho + mc.c * s.xstar,
        rho,
    })
}

/// Nodewise `σ₊(x_j, u1_j)` and `σ₋(−x_j, u2_j)`.
pub fn eval_sigma(mc: &ModelCoefficients, s: &SystemState) -> Result<(PhaseProfile, PhaseProfile)> {
    let g = s.grid();
    let mut s1 = Vec::with_capacity(g.n());
    let mut s2 = Vec::with_capacity(g.n());
    for j in 0..g.n() {
        let x = g.node(j);
        let v = (mc.sigma_plus)(x, s.u1.values()[j]);
        if !v.is_finite() {
            return Err(Error::InvalidState { what: "sigma", phase: Phase::Plus, node: j });
        }
        s1.push(v);
        let v = (mc.sigma_minus)(-x, s.u2.values()[j]);
        if !v.is_finite() {
            return Err(Error::InvalidState { what: "sigma", phase: Phase::Minus, node: j });
        }
        s2.push(v);
    }
    Ok((PhaseProfile::new(g, s1)?, PhaseProfile::new(g, s2)?))
}

/// Lattice on which the validator samples coefficients.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProbeBox {
    /// Range of `|x|`; phase 2 is probed at `−x`.
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
    /// Lattice points per axis.
    pub points: usize,
}

impl Default for ProbeBox {
    fn default() -> Self {
        Self {
            x: (0.0, 4.0),
            y: (-2.0, 2.0),
            z: (-2.0, 2.0),
            points: 21,
        }
    }
}

impl ProbeBox {
    fn axis(r: (f64, f64), m: usize) -> Vec<f64> {
        if m <= 1 {
            return vec![0.5 * (r.0 + r.1)];
        }
        (0..m).map(|i| r.0 + (r.1 - r.0) * i as f64 / (m - 1) as f64).collect()
    }

    fn xs(&self) -> Vec<f64> {
        Self::axis(self.x, self.points)
    }

    fn ys(&self) -> Vec<f64> {
        Self::axis(self.y, self.points)
    }

    fn zs(&self) -> Vec<f64> {
        Self::axis(self.z, self.points)
    }

    fn step(&self) -> f64 {
        let span = (self.x.1 - self.x.0).abs().max(self.y.1 - self.y.0).max(self.z.1 - self.z.0);
        1e-6 * span.max(1.0)
    }
}

/// Sampled local Lipschitz constant of one coefficient in its state variables.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LipschitzEstimate {
    pub name: String,
    /// Largest `ℓ∞` norm of the finite-difference gradient over the box.
    pub constant: f64,
    /// Smallest per-`x` constant; equals `constant` when uniform in `x`.
    pub min_over_x: f64,
}

impl LipschitzEstimate {
    /// `max_x L(x) − min_x L(x)`.
    pub fn x_spread(&self) -> f64 {
        self.constant - self.min_over_x
    }
}

/// Envelope fit `|f| + |∂ₓf| ≤ a(|x|) + b·(|y| + |z|)` on the probe box.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GrowthFit {
    pub name: String,
    /// Discrete `L²` norm of `a` over the probed `|x|` range.
    pub a_l2: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ValidationReport {
    pub lipschitz: Vec<LipschitzEstimate>,
    pub growth: Vec<GrowthFit>,
    /// `|σ₊(0,0)|`, `|σ₋(0,0)|`.
    pub sigma_boundary_residual: [f64; 2],
    pub affine_residual: Option<f64>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.warnings.is_empty()
    }

    pub fn lipschitz_of(&self, name: &str) -> Option<&LipschitzEstimate> {
        self.lipschitz.iter().find(|l| l.name == name)
    }
}

/// Probes the coefficient assumptions on a lattice. Advisory only.
pub fn validate_assumptions(mc: &ModelCoefficients, probe: &ProbeBox) -> ValidationReport {
    let mut report = ValidationReport {
        lipschitz: Vec::new(),
        growth: Vec::new(),
        sigma_boundary_residual: [(mc.sigma_plus)(0.0, 0.0).abs(), (mc.sigma_minus)(0.0, 0.0).abs()],
        affine_residual: None,
        warnings: Vec::new(),
    };
    for (name, r) in ["sigma_plus", "sigma_minus"].iter().zip(report.sigma_boundary_residual) {
        if !(r <= 1e-12) {
            report
                .warnings
                .push(format!("{name}(0,0) = {r}: boundary condition sigma(0,0) = 0 violated"));
        }
    }

    let e = probe.step();
    let xs = probe.xs();
    let ys = probe.ys();
    let zs = probe.zs();

    for (name, sign, f) in [("mu_plus", 1.0, &mc.mu_plus), ("mu_minus", -1.0, &mc.mu_minus)] {
        let mut per_x = Vec::with_capacity(xs.len());
        let mut a = Vec::with_capacity(xs.len());
        let mut b = 0.0f64;
        for &x0 in &xs {
            let x = sign * x0;
            let env = |y: f64, z: f64| {
                let v = f(x, y, z);
                let dx = (f(x + e, y, z) - f(x - e, y, z)) / (2.0 * e);
                v.abs() + dx.abs()
            };
            let a_x = env(0.0, 0.0);
            a.push(a_x);
            let mut lx = 0.0f64;
            for &y in &ys {
                for &z in &zs {
                    let gy = (f(x, y + e, z) - f(x, y - e, z)) / (2.0 * e);
                    let gz = (f(x, y, z + e) - f(x, y, z - e)) / (2.0 * e);
                    lx = lx.max(gy.abs().max(gz.abs()));
                    let w = y.abs() + z.abs();
                    if w > 0.0 {
                        b = b.max(((env(y, z) - a_x) / w).max(0.0));
                    }
                }
            }
            per_x.push(lx);
        }
        push_lipschitz(&mut report, name, &per_x);
        let dx = if xs.len() > 1 { xs[1] - xs[0] } else { 1.0 };
        report.growth.push(GrowthFit {
            name: name.into(),
            a_l2: (a.iter().map(|v| v * v).sum::<f64>() * dx).sqrt(),
            b,
        });
    }

    for (name, sign, f) in [("sigma_plus", 1.0, &mc.sigma_plus), ("sigma_minus", -1.0, &mc.sigma_minus)] {
        let per_x: Vec<f64> = xs
            .iter()
            .map(|&x0| {
                let x = sign * x0;
                ys.iter()
                    .map(|&y| ((f(x, y + e) - f(x, y - e)) / (2.0 * e)).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        push_lipschitz(&mut report, name, &per_x);
    }

    let mut lr = 0.0f64;
    for &g1 in &ys {
        for &g2 in &zs {
            let d1 = ((mc.rho)(g1 + e, g2) - (mc.rho)(g1 - e, g2)) / (2.0 * e);
            let d2 = ((mc.rho)(g1, g2 + e) - (mc.rho)(g1, g2 - e)) / (2.0 * e);
            lr = lr.max(d1.abs().max(d2.abs()));
        }
    }
    push_lipschitz(&mut report, "rho", &[lr]);

    if mc.affine_sigma.is_some() {
        let r = affine_residual(mc, probe);
        if !(r <= 1e-10) {
            report
                .warnings
                .push(format!("claimed affine sigma decomposition off by {r:e}"));
        }
        report.affine_residual = Some(r);
    }
    report
}

fn push_lipschitz(report: &mut ValidationReport, name: &str, per_x: &[f64]) {
    let max = per_x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = per_x.iter().cloned().fold(f64::INFINITY, f64::min);
    if !max.is_finite() {
        report.warnings.push(format!("{name}: non-finite derivative on the probe box"));
    }
    report.lipschitz.push(LipschitzEstimate {
        name: name.into(),
        constant: max,
        min_over_x: min,
    });
}

fn affine_residual(mc: &ModelCoefficients, probe: &ProbeBox) -> f64 {
    let Some(a) = &mc.affine_sigma else { return 0.0 };
    let mut worst = 0.0f64;
    for &x in &probe.xs() {
        for &y in &probe.ys() {
            let p = (mc.sigma_plus)(x, y) - ((a.sigma1_plus)(x) + (a.sigma2_plus)(x) * y);
            let m = (mc.sigma_minus)(-x, y) - ((a.sigma1_minus)(x) + (a.sigma2_minus)(x) * y);
            worst = worst.max(p.abs()).max(m.abs());
            if !p.is_finite() || !m.is_finite() {
                return f64::INFINITY;
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{boundary_trace, Grid1D};

    #[test]
    fn zero_coefficients_give_zero_drift() {
        let g = Grid1D::new(30, 2.0).unwrap();
        let mc = ModelCoefficients::heat().c(0.0).build().unwrap();
        let s = SystemState::new(
            PhaseProfile::from_fn(g, |x| x.sin()),
            PhaseProfile::from_fn(g, |x| x * (2.0 - x)),
            0.4,
        )
        .unwrap();
        let d = eval_drift(&mc, &s, &boundary_trace(&s)).unwrap();
        assert!(d.b1.values().iter().chain(d.b2.values()).all(|&v| v == 0.0));
        assert_eq!(d.front, 0.0);
    }

    #[test]
    fn stefan_zero_state_front_velocity() {
        let g = Grid1D::new(30, 2.0).unwrap();
        let mc = ModelCoefficients::stefan(2.0).c(1.5).build().unwrap();
        let s = SystemState::zeros(g, 0.7);
        let d = eval_drift(&mc, &s, &boundary_trace(&s)).unwrap();
        assert_eq!(d.front, 1.5 * 0.7);
        assert_eq!(d.rho, 0.0);
        assert!(d.b1.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn burgers_drift_pointwise() {
        let g = Grid1D::new(64, 6.0).unwrap();
        let mc = ModelCoefficients::burgers().c(1.0).build().unwrap();
        let u1 = PhaseProfile::from_fn(g, |x| (-x).exp());
        let u2 = PhaseProfile::from_fn(g, |x| 0.5 * x * (-x).exp());
        let s = SystemState::new(u1, u2, 0.0).unwrap();
        let tr = boundary_trace(&s);
        let d = eval_drift(&mc, &s, &tr).unwrap();
        let h = g.h();
        let ext = |p: &PhaseProfile, j: isize| -> f64 {
            if j < 0 || j as usize >= g.n() {
                0.0
            } else {
                p.values()[j as usize]
            }
        };
        for j in 0..g.n() {
            let ji = j as isize;
            let u = s.u1.values()[j];
            let du = (ext(&s.u1, ji + 1) - ext(&s.u1, ji - 1)) / (2.0 * h);
            assert!((d.b1.values()[j] - (u * du + u)).abs() < 1e-12);
            let v = s.u2.values()[j];
            let dv = (ext(&s.u2, ji + 1) - ext(&s.u2, ji - 1)) / (2.0 * h);
            assert!((d.b2.values()[j] - (v * dv + v)).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma_evaluation() {
        let g = Grid1D::new(40, 3.0).unwrap();
        let u1 = PhaseProfile::from_fn(g, |x| (x * 1.3).sin());
        let s = SystemState::new(u1.clone(), PhaseProfile::zeros(g), 0.0).unwrap();
        let mult = ModelCoefficients::builder("m").multiplicative_noise(1.0).build().unwrap();
        let (s1, s2) = eval_sigma(&mult, &s).unwrap();
        assert_eq!(s1, u1);
        assert!(s2.values().iter().all(|&v| v == 0.0));
        let (z1, _) = eval_sigma(&mult, &SystemState::zeros(g, 0.0)).unwrap();
        assert!(z1.values().iter().all(|&v| v == 0.0));

        // σ(0,0) = e^0 = 1, so only the unvalidated path accepts it
        let mixed = ModelCoefficients::builder("mixed").sigma_plus(|x, y| (-x).exp() + x * y);
        let mixed = mixed.build_unvalidated().unwrap();
        let (m1, _) = eval_sigma(&mixed, &s).unwrap();
        for (j, x) in g.nodes().enumerate() {
            let expected = (-x).exp() + x * u1.values()[j];
            assert!((m1.values()[j] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_output_names_the_node() {
        let g = Grid1D::new(10, 1.0).unwrap();
        let mc = ModelCoefficients::builder("bad")
            .mu_plus(|x, _, _| if x > 0.5 { f64::NAN } else { 0.0 })
            .build()
            .unwrap();
        let s = SystemState::zeros(g, 0.0);
        match eval_drift(&mc, &s, &boundary_trace(&s)) {
            Err(Error::InvalidState { phase: Phase::Plus, node, .. }) => assert_eq!(node, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn boundary_condition_enforced_at_build() {
        let err = ModelCoefficients::builder("const").sigma_plus(|_, _| 1.0).build();
        assert!(err.is_err());
        assert!(ModelCoefficients::builder("bad").eta(0.0, 1.0).build_unvalidated().is_err());
        assert!(ModelCoefficients::builder("bad").c(-1.0).build_unvalidated().is_err());
    }

    #[test]
    fn truncation_shape() {
        let t = TruncationLevel::new(3.0).unwrap();
        let v = vec![1.0, -2.0, 3.5];
        assert_eq!(truncate_coefficient(&t, 1.5, &v), v);
        assert!(truncate_coefficient(&t, 5.0, &v).iter().all(|&x| x == 0.0));
        let half = truncate_coefficient(&t, 3.5, &v);
        for (a, b) in half.iter().zip(&v) {
            assert!((a - 0.5 * b).abs() < 1e-15);
        }
        let mut prev = 1.0;
        let mut max_slope = 0.0f64;
        for i in 0..=1000 {
            let x = 2.5 + 2.0 * i as f64 / 1000.0;
            let hv = t.h(x);
            assert!(hv <= prev + 1e-15);
            prev = hv;
            max_slope = max_slope.max(t.h_prime(x).abs());
        }
        assert!((max_slope - TruncationLevel::LIPSCHITZ).abs() < 1e-12);
        // derivative matches finite differences
        for x in [3.1, 3.4, 3.9] {
            let fd = (t.h(x + 1e-6) - t.h(x - 1e-6)) / 2e-6;
            assert!((fd - t.h_prime(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn lipschitz_constant_of_truncation_is_translation_invariant() {
        for n in [0.5, 1.0, 7.0, 1e3] {
            let t = TruncationLevel::new(n).unwrap();
            let sup = (0..=2000)
                .map(|i| t.h_prime(n + i as f64 / 2000.0).abs())
                .fold(0.0, f64::max);
            assert!((sup - TruncationLevel::LIPSCHITZ).abs() < 1e-12);
        }
    }

    #[test]
    fn validator_on_presets() {
        let stefan = ModelCoefficients::stefan(1.7).build().unwrap();
        let rep = validate_assumptions(&stefan, &ProbeBox::default());
        assert!(rep.passed(), "{:?}", rep.warnings);
        let l = rep.lipschitz_of("rho").unwrap().constant;
        assert!((l - 1.7).abs() < 1e-8, "{l}");

        let bad = ModelCoefficients::builder("const").sigma_plus(|_, _| 1.0).build_unvalidated().unwrap();
        let rep = validate_assumptions(&bad, &ProbeBox::default());
        assert!(!rep.passed());
        assert_eq!(rep.sigma_boundary_residual[0], 1.0);
        assert!(rep.warnings.iter().any(|w| w.contains("sigma_plus(0,0)")));
    }

    #[test]
    fn burgers_lipschitz_brackets_analytic_value() {
        // oracle: sup over |y|,|z| ≤ 2 of max(|∂_y(yz)|, |∂_z(yz)|) = 2
        let mc = ModelCoefficients::burgers().build().unwrap();
        let probe = ProbeBox { x: (0.0, 1.0), y: (-2.0, 2.0), z: (-2.0, 2.0), points: 41 };
        let l = validate_assumptions(&mc, &probe).lipschitz_of("mu_plus").unwrap().clone();
        let eps = 1e-6;
        assert!(l.constant >= 2.0 - eps && l.constant <= 2.0 * (1.0 + eps), "{}", l.constant);
        assert!(l.x_spread() < 1e-8);
    }

    #[test]
    fn affine_claims_are_checked() {
        let ok = ModelCoefficients::builder("aff")
            .affine_sigma(AffineSigma {
                sigma1_plus: Arc::new(|x| x * (-x).exp()),
                sigma2_plus: Arc::new(|x| 1.0 / (1.0 + x * x)),
                sigma1_minus: Arc::new(|_| 0.0),
                sigma2_minus: Arc::new(|_| 0.5),
            })
            .build()
            .unwrap();
        let rep = validate_assumptions(&ok, &ProbeBox::default());
        assert!(rep.affine_residual.unwrap() < 1e-12);
        let wrong = ModelCoefficients::builder("wrong")
            .sigma_plus(|_, y| y * y)
            .affine(AffineSigma::linear(1.0))
            .build();
        assert!(wrong.is_err());
    }

    #[test]
    fn expression_preset_matches_closure_preset() {
        let e = ModelCoefficients::from_expressions("y*z", "y*z", "0.3*y", "0.3*y", "2*(g2 - g1)")
            .unwrap()
            .build()
            .unwrap();
        assert_eq!((e.mu_plus)(0.1, 2.0, 3.0), 6.0);
        assert_eq!((e.rho)(1.0, 0.5), -1.0);
        assert!(((e.sigma_minus)(-1.0, 2.0) - 0.6).abs() < 1e-15);
    }
}
