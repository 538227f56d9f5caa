//! Shift operator, moving/fixed frame transforms and the chain-rule residual.

use serde::{Deserialize, Serialize};

use crate::coefficients::{eval_sigma, ModelCoefficients};
use crate::error::{invalid, Error, Result};
use crate::grid::{first_derivative, second_derivative, Grid1D, PhaseProfile, SystemState};
use crate::noise::{sample_diffusion_increment, NoiseIncrement, NoiseKernel};
use crate::solver::FixedFrameTrajectory;

/// Default margin reserve, as a fraction of the half-line length, on each side.
pub const DEFAULT_MARGIN: f64 = 0.25;

const ALIGN_TOL: f64 = 1e-9;

/// Uniform full-line grid `x_i = x_min + i·h`, `i = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullLineGrid {
    pub x_min: f64,
    pub h: f64,
    pub len: usize,
    /// Largest admissible shift.
    pub margin: f64,
}

impl FullLineGrid {
    pub fn new(x_min: f64, h: f64, len: usize, margin: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid("frame.h", format!("must be positive, got {h}")));
        }
        if len < 4 {
            return Err(invalid("frame.len", "need at least 4 nodes"));
        }
        if !(x_min.is_finite() && margin >= 0.0) {
            return Err(invalid("frame.margin", "must be non-negative"));
        }
        Ok(Self { x_min, h, len, margin })
    }

    /// Grid with spacing `h` whose nodes include `anchor` and cover `[lo, hi]`.
    pub fn covering(lo: f64, hi: f64, h: f64, anchor: f64, margin: f64) -> Result<Self> {
        let i_lo = ((lo - anchor) / h).floor() - 2.0;
        let i_hi = ((hi - anchor) / h).ceil() + 2.0;
        let len = (i_hi - i_lo) as usize + 1;
        Self::new(anchor + i_lo * h, h, len, margin)
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    pub fn x_max(&self) -> f64 {
        self.node(self.len - 1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.node(i))
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        self.x_min <= lo + 1e-12 * self.h && self.x_max() >= hi - 1e-12 * self.h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullLineProfile {
    pub grid: FullLineGrid,
    pub values: Vec<f64>,
}

impl FullLineProfile {
    pub fn zeros(grid: FullLineGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len] }
    }

    pub fn from_fn(grid: FullLineGrid, f: impl Fn(f64) -> f64) -> Self {
        Self { grid, values: grid.nodes().map(f).collect() }
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.h * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn sub(&self, other: &FullLineProfile) -> FullLineProfile {
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn axpy(&mut self, a: f64, other: &FullLineProfile) {
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    /// Value at node `i`, zero outside the grid.
    fn at(&self, i: isize) -> f64 {
        if i < 0 || i as usize >= self.values.len() {
            0.0
        } else {
            self.values[i as usize]
        }
    }

    /// Cubic interpolant at an arbitrary point, zero outside the grid.
    pub fn eval(&self, x: f64) -> f64 {
        let s = (x - self.grid.x_min) / self.grid.h;
        let k = s.round();
        if (s - k).abs() < ALIGN_TOL {
            return self.at(k as isize);
        }
        let i = s.floor() as isize;
        let t = s - i as f64;
        let w = cubic_weights(t);
        (0..4).map(|m| w[m] * self.at(i - 1 + m as isize)).sum()
    }

    /// Derivative of the cubic interpolant at `x`.
    pub fn eval_derivative(&self, x: f64) -> f64 {
        let s = (x - self.grid.x_min) / self.grid.h;
        let i = s.floor() as isize;
        let t = s - i as f64;
        let w = cubic_weight_derivatives(t);
        (0..4).map(|m| w[m] * self.at(i - 1 + m as isize)).sum::<f64>() / self.grid.h
    }

    /// Central-difference derivative on the grid, zero ghosts.
    pub fn derivative(&self) -> FullLineProfile {
        let h2 = 2.0 * self.grid.h;
        Self {
            grid: self.grid,
            values: (0..self.grid.len as isize)
                .map(|i| (self.at(i + 1) - self.at(i - 1)) / h2)
                .collect(),
        }
    }

    /// Largest absolute value within `width` of either grid end.
    pub fn edge_magnitude(&self, width: f64) -> f64 {
        let k = ((width / self.grid.h).ceil() as usize).min(self.values.len());
        self.values[..k]
            .iter()
            .chain(&self.values[self.values.len() - k..])
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Lagrange weights on nodes `−1, 0, 1, 2` at `t ∈ [0, 1)`.
fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

fn cubic_weight_derivatives(t: f64) -> [f64; 4] {
    [
        -(3.0 * t * t - 6.0 * t + 2.0) / 6.0,
        (3.0 * t * t - 4.0 * t - 1.0) / 2.0,
        -(3.0 * t * t - 2.0 * t - 2.0) / 2.0,
        (3.0 * t * t - 1.0) / 6.0,
    ]
}

/// Lagrange interpolation through arbitrary distinct nodes.
fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..xs.len() {
        let mut w = 1.0;
        for j in 0..xs.len() {
            if i != j {
                w *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += w * ys[i];
    }
    acc
}

/// `θ_x p: y ↦ p(y + x)` on the same grid.
///
/// Shifts by a multiple of `h` move indices; other shifts use cubic interpolation.
pub fn shift(p: &FullLineProfile, x: f64) -> Result<FullLineProfile> {
    if !x.is_finite() || x.abs() > p.grid.margin + 1e-12 {
        return Err(Error::OutOfWindow(format!(
            "shift {x} exceeds the margin reserve {}",
            p.grid.margin
        )));
    }
    let s = x / p.grid.h;
    let k = s.round();
    if (s - k).abs() < ALIGN_TOL {
        let k = k as isize;
        let values = (0..p.grid.len as isize).map(|i| p.at(i + k)).collect();
        return Ok(FullLineProfile { grid: p.grid, values });
    }
    let values = p.grid.nodes().map(|y| p.eval(y + x)).collect();
    Ok(FullLineProfile { grid: p.grid, values })
}

/// Evaluates one phase, given as interior values on `g`, at distance `z ≥ 0`
/// from the front, with a cubic that only uses nodes of `[0, L]`.
fn half_line_eval(g: &Grid1D, vals: &[f64], z: f64) -> f64 {
    let n = g.n();
    let h = g.h();
    // extended nodes 0..=n+1 with zero values at both ends
    let ext = |i: usize| -> f64 {
        if i == 0 || i > n {
            0.0
        } else {
            vals[i - 1]
        }
    };
    let s = z / h;
    if s <= 0.0 || s >= (n + 1) as f64 {
        return 0.0;
    }
    let k = s.round();
    if (s - k).abs() < ALIGN_TOL {
        return ext(k as usize);
    }
    let i = s.floor() as isize;
    let start = (i - 1).clamp(0, n as isize + 1 - 3) as usize;
    let xs: Vec<f64> = (start..start + 4).map(|j| j as f64).collect();
    let ys: Vec<f64> = (start..start + 4).map(ext).collect();
    lagrange(&xs, &ys, s)
}

/// Pasted profile `u(z) = u1(z)` for `z > 0`, `u2(−z)` for `z < 0`.
pub fn pasted_eval(s: &SystemState, z: f64) -> f64 {
    let g = s.grid();
    if z >= 0.0 {
        half_line_eval(&g, s.u1.values(), z)
    } else {
        half_line_eval(&g, s.u2.values(), -z)
    }
}

/// `v = θ_{−x*} u` on `target`: `v(y) = u(y − x*)`.
pub fn to_moving_frame(s: &SystemState, target: &FullLineGrid) -> Result<FullLineProfile> {
    let l = s.grid().length();
    if !target.covers(s.xstar - l, s.xstar + l) {
        return Err(Error::OutOfWindow(format!(
            "target [{}, {}] does not cover [{}, {}]",
            target.x_min,
            target.x_max(),
            s.xstar - l,
            s.xstar + l
        )));
    }
    Ok(FullLineProfile::from_fn(*target, |y| pasted_eval(s, y - s.xstar)))
}

/// One-sided evaluation of `v` at `p` on the `side` of `front`, using the
/// front itself as a node with value 0.
fn one_sided_eval(v: &FullLineProfile, front: f64, p: f64, side: f64) -> f64 {
    let g = &v.grid;
    let pos = (p - g.x_min) / g.h;
    let k = pos.round();
    if (pos - k).abs() < ALIGN_TOL && k >= 0.0 && (k as usize) < g.len {
        return v.values[k as usize];
    }
    let fpos = (front - g.x_min) / g.h;
    // first node strictly on `side` of the front
    let first = if side > 0.0 {
        let f = fpos.floor() + 1.0;
        if f - fpos < 1e-6 { f + 1.0 } else { f }
    } else {
        let f = fpos.ceil() - 1.0;
        if fpos - f < 1e-6 { f - 1.0 } else { f }
    };
    // nodes along the side: front, first, first ± 1, ...
    let dist = (p - front).abs() / g.h;
    let first_dist = (first - fpos).abs();
    let m = if dist <= first_dist { 0.0 } else { (dist - first_dist).floor() + 1.0 };
    let start = (m - 2.0).max(0.0) as usize;
    let mut xs = [0.0; 4];
    let mut ys = [0.0; 4];
    for (slot, q) in (start..start + 4).enumerate() {
        if q == 0 {
            xs[slot] = fpos;
            ys[slot] = 0.0;
        } else {
            let idx = first + side * (q - 1) as f64;
            xs[slot] = idx;
            ys[slot] = v.at(idx as isize);
        }
    }
    lagrange(&xs, &ys, pos)
}

/// `u1(x_j) = v(x* + x_j)`, `u2(x_j) = v(x* − x_j)`, interpolating from the
/// correct side of the front only.
pub fn to_fixed_frame(v: &FullLineProfile, xstar: f64, grid: Grid1D) -> Result<SystemState> {
    let l = grid.length();
    if !v.grid.covers(xstar - l, xstar + l) {
        return Err(Error::OutOfWindow(format!(
            "profile on [{}, {}] does not cover [{}, {}]",
            v.grid.x_min,
            v.grid.x_max(),
            xstar - l,
            xstar + l
        )));
    }
    let u1 = PhaseProfile::from_fn(grid, |x| one_sided_eval(v, xstar, xstar + x, 1.0));
    let u2 = PhaseProfile::from_fn(grid, |x| one_sided_eval(v, xstar, xstar - x, -1.0));
    SystemState::new(u1, u2, xstar)
}

/// `‖F(v+εw, x+εξ) − F(v,x) − ε(θ_x w + ξ·θ_x v')‖ / ε` with `F(v, x) = θ_x v`.
pub fn frechet_remainder(
    v: &FullLineProfile,
    w: &FullLineProfile,
    x: f64,
    xi: f64,
    eps: f64,
) -> Result<f64> {
    let mut perturbed = v.clone();
    perturbed.axpy(eps, w);
    let lhs = shift(&perturbed, x + eps * xi)?;
    let base = shift(v, x)?;
    let tw = shift(w, x)?;
    let dv = FullLineProfile::from_fn(v.grid, |y| v.eval_derivative(y + x));
    let mut r = lhs.sub(&base);
    r.axpy(-eps, &tw);
    r.axpy(-eps * xi, &dv);
    Ok(r.l2_norm() / eps)
}

/// The solution in the original coordinates, `v(t, ·) = θ_{−x*(t)} u(t, ·)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingFrameTrajectory {
    pub times: Vec<f64>,
    pub profiles: Vec<FullLineProfile>,
    pub fronts: Vec<f64>,
}

impl MovingFrameTrajectory {
    /// `max_i |v_i|` at the node nearest `x*_i`; of size `|I|·h/2` for a resolved profile.
    pub fn front_dirichlet_defect(&self) -> f64 {
        self.profiles
            .iter()
            .zip(&self.fronts)
            .map(|(p, &x)| {
                let i = ((x - p.grid.x_min) / p.grid.h).round().clamp(0.0, (p.grid.len - 1) as f64);
                p.values[i as usize].abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Common full-line grid for a trajectory: spacing `h`, anchored at 0, covering
/// every `[x* − L, x* + L]` plus `margin_frac·L` on each side.
pub fn moving_grid_for(traj: &FixedFrameTrajectory, margin_frac: f64) -> Result<FullLineGrid> {
    let g = traj.final_state.grid();
    let l = g.length();
    let lo = traj.fronts.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = traj.fronts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let margin = margin_frac * l;
    FullLineGrid::covering(lo - l - margin, hi + l + margin, g.h(), 0.0, margin)
}

/// Reconstructs the recorded states in the original frame.
pub fn reconstruct(traj: &FixedFrameTrajectory, margin_frac: f64) -> Result<MovingFrameTrajectory> {
    let grid = moving_grid_for(traj, margin_frac)?;
    let mut out = MovingFrameTrajectory {
        times: Vec::with_capacity(traj.states.len()),
        profiles: Vec::with_capacity(traj.states.len()),
        fronts: Vec::with_capacity(traj.states.len()),
    };
    for (i, s) in traj.states.iter().enumerate() {
        let step = traj.state_step(i);
        out.times.push(traj.times[step.min(traj.times.len() - 1)]);
        out.fronts.push(s.xstar);
        out.profiles.push(to_moving_frame(s, &grid)?);
    }
    Ok(out)
}

/// Pasted profile of `(p1, p2)` viewed as a state with front at `x*`, on `target`.
fn pasted_on(p1: &PhaseProfile, p2: &PhaseProfile, xstar: f64, target: &FullLineGrid) -> Result<FullLineProfile> {
    let s = SystemState::new(p1.clone(), p2.clone(), xstar)?;
    to_moving_frame(&s, target)
}

/// Discrete `L²` norm of
/// `v_N − v_0 − Σ_n [dt·θ_{−x_n} a_n − ρ_n·dt·θ_{−x_n} u_n' + θ_{−x_n}(C_n ΔW_n)]`,
/// where `a_n = η±Δu_n ± ρ_n u_n' + μ` is the untranslated fixed-frame drift and
/// `ρ_n` is the recorded front speed.
pub fn chain_rule_residual(
    fixed: &FixedFrameTrajectory,
    mc: &ModelCoefficients,
    kernel: &NoiseKernel,
    replayed_noise: Option<&[NoiseIncrement]>,
) -> Result<f64> {
    let noise = replayed_noise
        .or(fixed.noise.as_deref())
        .ok_or_else(|| Error::Contract("chain-rule residual needs the recorded noise increments".into()))?;
    if fixed.state_stride != 1 || fixed.states.len() != fixed.times.len() {
        return Err(Error::Contract("chain-rule residual needs every state recorded".into()));
    }
    let steps = fixed.steps();
    if noise.len() < steps {
        return Err(Error::Contract(format!(
            "{} noise increments for {steps} steps",
            noise.len()
        )));
    }
    let grid = moving_grid_for(fixed, DEFAULT_MARGIN)?;
    let dt = fixed.dt;
    let first = &fixed.states[0];
    let last = &fixed.states[steps];
    let mut r = to_moving_frame(last, &grid)?.sub(&to_moving_frame(first, &grid)?);
    for n in 0..steps {
        let s = &fixed.states[n];
        let rho = fixed.rhos[n];
        let d1 = first_derivative(&s.u1);
        let d2 = first_derivative(&s.u2);
        let l1 = second_derivative(&s.u1);
        let l2 = second_derivative(&s.u2);
        let g = s.grid();
        let mut a1 = Vec::with_capacity(g.n());
        let mut a2 = Vec::with_capacity(g.n());
        let mut t1 = Vec::with_capacity(g.n());
        let mut t2 = Vec::with_capacity(g.n());
        for j in 0..g.n() {
            let x = g.node(j);
            let (u, du) = (s.u1.values()[j], d1.values()[j]);
            a1.push(mc.eta_plus * l1.values()[j] + (mc.mu_plus)(x, u, du) + rho * du);
            t1.push(du);
            let (u, du) = (s.u2.values()[j], d2.values()[j]);
            a2.push(mc.eta_minus * l2.values()[j] + (mc.mu_minus)(-x, u, du) - rho * du);
            // the pasted profile's slope on the left is −u2'
            t2.push(-du);
        }
        let a = pasted_on(&PhaseProfile::new(g, a1)?, &PhaseProfile::new(g, a2)?, s.xstar, &grid)?;
        r.axpy(-dt, &a);
        if rho != 0.0 {
            let t = pasted_on(&PhaseProfile::new(g, t1)?, &PhaseProfile::new(g, t2)?, s.xstar, &grid)?;
            r.axpy(rho * dt, &t);
        }
        let (sig1, sig2) = eval_sigma(mc, s)?;
        if sig1.values().iter().chain(sig2.values()).any(|&v| v != 0.0) {
            let (c1, c2) = sample_diffusion_increment(kernel, s, (&sig1, &sig2), &noise[n]);
            let c = pasted_on(&c1, &c2, s.xstar, &grid)?;
            r.axpy(-1.0, &c);
        }
    }
    Ok(r.l2_norm())
}
