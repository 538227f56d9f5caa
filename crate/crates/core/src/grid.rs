//! Uniform half-line discretization and the discrete operators built on it.
//!
//! The half-line is truncated to `[0, L]` with `n` interior nodes
//! `x_j = j·h`, `j = 1..=n`, and `L = (n+1)·h`. Both end nodes carry the
//! Dirichlet value 0 and are never stored. Every stencil in the crate goes
//! through this module so that the discrete Laplacian used by the solver, the
//! spectral semigroup and the norms is one and the same matrix.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Phase, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n: usize,
    h: f64,
}

impl Grid1D {
    /// Grid with `n` interior nodes on `[0, length]`.
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(invalid("grid.L", format!("must be positive, got {length}")));
        }
        Self::with_spacing(n, length / (n as f64 + 1.0))
    }

    pub fn with_spacing(n: usize, h: f64) -> Result<Self> {
        if n < 2 {
            return Err(invalid("grid.n", format!("need at least 2 interior nodes, got {n}")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid("grid.h", format!("must be positive, got {h}")));
        }
        Ok(Self { n, h })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Truncation length `(n+1)·h`.
    #[inline]
    pub fn length(&self) -> f64 {
        (self.n as f64 + 1.0) * self.h
    }

    /// Coordinate of the interior node with zero-based index `j` (i.e. `(j+1)·h`).
    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        (j as f64 + 1.0) * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.node(j))
    }

    /// Same length, twice the resolution: `2n+1` interior nodes.
    pub fn refined(&self) -> Self {
        Self {
            n: 2 * self.n + 1,
            h: self.h / 2.0,
        }
    }
}

/// Interior node values of one phase; the profile is extended by 0 at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseProfile {
    grid: Grid1D,
    values: Vec<f64>,
}

impl PhaseProfile {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch(format!(
                "profile has {} values, grid has {} interior nodes",
                values.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n()],
        }
    }

    /// Samples `f` at the interior nodes.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: grid.nodes().map(f).collect(),
        }
    }

    #[inline]
    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }

    /// Values with the two Dirichlet boundary nodes attached: length `n + 2`.
    pub fn extended(&self) -> Vec<f64> {
        let mut ext = Vec::with_capacity(self.values.len() + 2);
        ext.push(0.0);
        ext.extend_from_slice(&self.values);
        ext.push(0.0);
        ext
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &PhaseProfile) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
        }
    }

    /// Discrete `L²(0, L)` inner product (trapezoid rule, boundary values 0).
    pub fn inner(&self, other: &PhaseProfile) -> f64 {
        self.grid.h * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// The fixed-frame state `(u1, u2, x*)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub u1: PhaseProfile,
    pub u2: PhaseProfile,
    pub xstar: f64,
}

impl SystemState {
    pub fn new(u1: PhaseProfile, u2: PhaseProfile, xstar: f64) -> Result<Self> {
        if u1.grid() != u2.grid() {
            return Err(Error::GridMismatch("u1 and u2 live on different grids".into()));
        }
        Ok(Self { u1, u2, xstar })
    }

    pub fn zeros(grid: Grid1D, xstar: f64) -> Self {
        Self {
            u1: PhaseProfile::zeros(grid),
            u2: PhaseProfile::zeros(grid),
            xstar,
        }
    }

    #[inline]
    pub fn grid(&self) -> Grid1D {
        self.u1.grid()
    }

    pub fn is_valid(&self) -> bool {
        self.u1.grid() == self.u2.grid()
            && self.u1.is_finite()
            && self.u2.is_finite()
            && self.xstar.is_finite()
    }

    /// Checks finiteness and names the first offending node.
    pub fn check(&self) -> Result<()> {
        if let Some(node) = self.u1.first_non_finite() {
            return Err(Error::InvalidState { what: "value", phase: Phase::Plus, node });
        }
        if let Some(node) = self.u2.first_non_finite() {
            return Err(Error::InvalidState { what: "value", phase: Phase::Minus, node });
        }
        if !self.xstar.is_finite() {
            return Err(Error::InvalidFront("x*"));
        }
        Ok(())
    }

    pub fn phase(&self, phase: Phase) -> &PhaseProfile {
        match phase {
            Phase::Plus => &self.u1,
            Phase::Minus => &self.u2,
        }
    }
}

/// One-sided boundary derivatives `(∂x u1(0+), ∂x u2(0+))`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundaryTrace {
    pub g1: f64,
    pub g2: f64,
}

impl BoundaryTrace {
    /// Euclidean magnitude, used for the boundary blow-up threshold.
    pub fn magnitude(&self) -> f64 {
        self.g1.hypot(self.g2)
    }
}

/// Linear part of the fixed-frame generator: `η± Δ − c` on the phases and `−c` on the front.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub c: f64,
}

impl Generator {
    pub fn eta(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Plus => self.eta_plus,
            Phase::Minus => self.eta_minus,
        }
    }

    /// `(η Δ − c) p` for one phase.
    pub fn apply_phase(&self, phase: Phase, p: &PhaseProfile) -> PhaseProfile {
        let eta = self.eta(phase);
        let mut out = second_derivative(p);
        for (o, &v) in out.values_mut().iter_mut().zip(p.values()) {
            *o = eta * *o - self.c * v;
        }
        out
    }
}

/// Second-order central differences with Dirichlet ghosts.
pub fn first_derivative(p: &PhaseProfile) -> PhaseProfile {
    let v = p.values();
    let n = v.len();
    let inv = 0.5 / p.grid().h();
    let values = (0..n)
        .map(|j| {
            let left = if j == 0 { 0.0 } else { v[j - 1] };
            let right = if j + 1 == n { 0.0 } else { v[j + 1] };
            (right - left) * inv
        })
        .collect();
    PhaseProfile { grid: p.grid(), values }
}

/// Three-point Dirichlet Laplacian `(p[j-1] − 2p[j] + p[j+1]) / h²`.
pub fn second_derivative(p: &PhaseProfile) -> PhaseProfile {
    let mut out = PhaseProfile::zeros(p.grid());
    laplacian_into(p.values(), p.grid().h(), out.values_mut());
    out
}

pub(crate) fn laplacian_into(v: &[f64], h: f64, out: &mut [f64]) {
    let n = v.len();
    let inv = 1.0 / (h * h);
    for j in 0..n {
        let left = if j == 0 { 0.0 } else { v[j - 1] };
        let right = if j + 1 == n { 0.0 } else { v[j + 1] };
        out[j] = (left - 2.0 * v[j] + right) * inv;
    }
}

/// One-sided second-order derivative at `x = 0`: `(4p₁ − p₂) / 2h`.
#[inline]
pub fn trace_of(p: &PhaseProfile) -> f64 {
    let v = p.values();
    (4.0 * v[0] - v[1]) / (2.0 * p.grid().h())
}

pub fn boundary_trace(s: &SystemState) -> BoundaryTrace {
    BoundaryTrace {
        g1: trace_of(&s.u1),
        g2: trace_of(&s.u2),
    }
}

/// Discrete `L²`, `H¹` or `H²` norm (trapezoid rule over `[0, L]`).
///
/// Derivatives use the interior stencils; at the two boundary nodes one-sided
/// second-order formulas are used so that every quadrature node carries a value.
pub fn norm_sobolev(p: &PhaseProfile, order: u32) -> Result<f64> {
    if order > 2 {
        return Err(invalid("order", format!("Sobolev order must be 0, 1 or 2, got {order}")));
    }
    let h = p.grid().h();
    let mut sq = h * p.values().iter().map(|v| v * v).sum::<f64>();
    if order >= 1 {
        sq += trapezoid_sq(&derivative_with_ends(p), h);
    }
    if order >= 2 {
        sq += trapezoid_sq(&second_derivative_with_ends(p), h);
    }
    Ok(sq.sqrt())
}

fn trapezoid_sq(values: &[f64], h: f64) -> f64 {
    let last = values.len() - 1;
    values
        .iter()
        .enumerate()
        .map(|(i, v)| if i == 0 || i == last { 0.5 * v * v } else { v * v })
        .sum::<f64>()
        * h
}

fn derivative_with_ends(p: &PhaseProfile) -> Vec<f64> {
    let e = p.extended();
    let m = e.len();
    let h = p.grid().h();
    let mut d = Vec::with_capacity(m);
    d.push((-3.0 * e[0] + 4.0 * e[1] - e[2]) / (2.0 * h));
    for j in 1..m - 1 {
        d.push((e[j + 1] - e[j - 1]) / (2.0 * h));
    }
    d.push((3.0 * e[m - 1] - 4.0 * e[m - 2] + e[m - 3]) / (2.0 * h));
    d
}

fn second_derivative_with_ends(p: &PhaseProfile) -> Vec<f64> {
    let e = p.extended();
    let m = e.len();
    let h2 = p.grid().h().powi(2);
    let mut d = Vec::with_capacity(m);
    d.push((2.0 * e[0] - 5.0 * e[1] + 4.0 * e[2] - e[3]) / h2);
    for j in 1..m - 1 {
        d.push((e[j - 1] - 2.0 * e[j] + e[j + 1]) / h2);
    }
    d.push((2.0 * e[m - 1] - 5.0 * e[m - 2] + 4.0 * e[m - 3] - e[m - 4]) / h2);
    d
}

/// Norm of `(u1, u2, x)` in `L² ⊕ L² ⊕ ℝ`.
pub fn state_l2_norm(s: &SystemState) -> f64 {
    (s.u1.inner(&s.u1) + s.u2.inner(&s.u2) + s.xstar * s.xstar).sqrt()
}

/// Graph norm `‖s‖ + ‖𝒜 s‖` of the generator, both in `L² ⊕ L² ⊕ ℝ`.
pub fn graph_norm(s: &SystemState, gen: &Generator) -> f64 {
    let a1 = gen.apply_phase(Phase::Plus, &s.u1);
    let a2 = gen.apply_phase(Phase::Minus, &s.u2);
    let ax = -gen.c * s.xstar;
    let a_norm = (a1.inner(&a1) + a2.inner(&a2) + ax * ax).sqrt();
    state_l2_norm(s) + a_norm
}
