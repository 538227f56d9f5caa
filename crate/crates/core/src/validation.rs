//! Analytic oracles: one-phase Stefan similarity solution, Dirichlet heat
//! series, and a Monte Carlo check of the noise covariance.
//!
//! # Similarity solution
//!
//! With `τ = t0 + t` and `x` the distance from the front, the liquid phase is
//!
//! ```text
//! u1(τ, x) = A·(erfc(λ + x/(2√(ητ))) / erfc(λ) − 1),    x*(τ) = x0 + 2λ√(ητ),
//! ```
//!
//! which solves `u_t = η u'' + ρ u'` with `u1(τ, 0) = 0` and far field `−A`
//! (a supercooled melt). Its trace is `g1 = −A e^{−λ²} / (erfc(λ) √(πητ))`, and
//! the front law `dx*/dτ = ϱ (g2 − g1)` with `g2 = 0` reduces to
//!
//! ```text
//! λ √π e^{λ²} erfc(λ) = St,    St = ϱA/η.
//! ```
//!
//! The left side increases from 0 to 1, so a root exists exactly when `St < 1`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{invalid, Error, Result};
use crate::grid::{BoundaryTrace, Grid1D, PhaseProfile, SystemState};
use crate::noise::{NoiseIncrement, NoiseKernel};

const LAMBDA_BRACKET: (f64, f64) = (1e-8, 10.0);

/// `λ √π e^{λ²} erfc(λ)`.
pub fn similarity_lhs(lambda: f64) -> f64 {
    lambda * std::f64::consts::PI.sqrt() * (lambda * lambda).exp() * erfc(lambda)
}

pub fn stefan_number(eta: f64, varrho: f64, amplitude: f64) -> f64 {
    varrho * amplitude / eta
}

/// Root of `λ √π e^{λ²} erfc(λ) = ϱA/η` by bisection on `[1e-8, 10]`.
pub fn stefan_lambda(eta: f64, varrho: f64, amplitude: f64) -> Result<f64> {
    for (name, v) in [("eta", eta), ("varrho", varrho), ("amplitude", amplitude)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(name, format!("must be positive, got {v}")));
        }
    }
    let st = stefan_number(eta, varrho, amplitude);
    let f = |l: f64| similarity_lhs(l) - st;
    let (mut lo, mut hi) = LAMBDA_BRACKET;
    if f(lo) * f(hi) > 0.0 {
        return Err(Error::RootNotFound { lo, hi, stefan_number: st });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (flo, fhi) = (f(lo).abs(), f(hi).abs());
    Ok(if flo <= fhi { lo } else { hi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StefanSimilarity {
    pub eta: f64,
    pub varrho: f64,
    pub amplitude: f64,
    pub lambda: f64,
    pub t0: f64,
    pub x0: f64,
}

impl StefanSimilarity {
    pub fn new(eta: f64, varrho: f64, amplitude: f64, t0: f64, x0: f64) -> Result<Self> {
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(invalid("t0", format!("must be positive, got {t0}")));
        }
        let lambda = stefan_lambda(eta, varrho, amplitude)?;
        Ok(Self { eta, varrho, amplitude, lambda, t0, x0 })
    }

    /// Front at time `t` after the start, `x0 + 2λ√(η(t0 + t))`.
    pub fn front(&self, t: f64) -> f64 {
        self.x0 + 2.0 * self.lambda * (self.eta * (self.t0 + t)).sqrt()
    }

    pub fn front_speed(&self, t: f64) -> f64 {
        self.lambda * (self.eta / (self.t0 + t)).sqrt()
    }

    pub fn trace(&self, t: f64) -> BoundaryTrace {
        let tau = self.t0 + t;
        let l = self.lambda;
        let g1 = -self.amplitude * (-l * l).exp()
            / (erfc(l) * (std::f64::consts::PI * self.eta * tau).sqrt());
        BoundaryTrace { g1, g2: 0.0 }
    }

    /// `u1` at distance `x` from the front, time `t` after the start.
    pub fn profile_at(&self, t: f64, x: f64) -> f64 {
        let tau = self.t0 + t;
        let arg = self.lambda + x / (2.0 * (self.eta * tau).sqrt());
        self.amplitude * (erfc(arg) / erfc(self.lambda) - 1.0)
    }
}

/// The similarity state at time `t` after the start; phase 2 is zero.
pub fn stefan_profile(ss: &StefanSimilarity, t: f64, grid: Grid1D) -> Result<SystemState> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", format!("must be non-negative, got {t}")));
    }
    let u1 = PhaseProfile::from_fn(grid, |x| ss.profile_at(t, x));
    SystemState::new(u1, PhaseProfile::zeros(grid), ss.front(t))
}

/// Dirichlet heat flow of `p0` on `[0, L]` using continuum eigenvalues `−η(kπ/L)²`.
pub fn heat_series_solution(p0: &PhaseProfile, eta: f64, t: f64) -> Result<PhaseProfile> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", format!("must be non-negative, got {t}")));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(invalid("eta", format!("must be positive, got {eta}")));
    }
    let g = p0.grid();
    let (n, l) = (g.n(), g.length());
    let m = n + 1;
    // discrete sine coefficients, exact for grid data
    let mut b = vec![0.0; n];
    for (k, bk) in b.iter_mut().enumerate() {
        let kk = (k + 1) as f64;
        let s: f64 = p0
            .values()
            .iter()
            .enumerate()
            .map(|(j, v)| v * (std::f64::consts::PI * kk * (j + 1) as f64 / m as f64).sin())
            .sum();
        let decay = (-eta * (kk * std::f64::consts::PI / l).powi(2) * t).exp();
        *bk = 2.0 / m as f64 * s * decay;
    }
    let vals = (0..n)
        .map(|j| {
            b.iter()
                .enumerate()
                .map(|(k, bk)| bk * (std::f64::consts::PI * (k + 1) as f64 * (j + 1) as f64 / m as f64).sin())
                .sum()
        })
        .collect();
    PhaseProfile::new(g, vals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCheck {
    pub x: f64,
    pub y: f64,
    pub expected: f64,
    pub empirical: f64,
    pub std_error: f64,
}

impl CovarianceCheck {
    /// `|empirical − expected|` in standard errors.
    pub fn z_score(&self) -> f64 {
        if self.std_error == 0.0 {
            if self.empirical == self.expected { 0.0 } else { f64::INFINITY }
        } else {
            (self.empirical - self.expected).abs() / self.std_error
        }
    }
}

/// Samples `ξ_t = Σ_steps T_ζ ΔW` at every probe point and compares the
/// empirical `E[ξ_t(x) ξ_t(y)]` with `t·covariance(x, y)`.
pub fn covariance_monte_carlo(
    kernel: &NoiseKernel,
    pairs: &[(f64, f64)],
    t: f64,
    steps: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<CovarianceCheck>> {
    if steps == 0 || samples < 2 {
        return Err(invalid("samples", "need at least one step and two samples"));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(invalid("t", format!("must be positive, got {t}")));
    }
    let dt = t / steps as f64;
    let points: Vec<f64> = pairs.iter().flat_map(|&(x, y)| [x, y]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; pairs.len()];
    let mut sum_sq = vec![0.0; pairs.len()];
    let mut xi = vec![0.0; points.len()];
    let mut w = NoiseIncrement::zeros(kernel, dt);
    for _ in 0..samples {
        xi.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..steps {
            NoiseIncrement::fill(&mut w.w, kernel.dy(), dt, &mut rng);
            for (acc, v) in xi.iter_mut().zip(kernel.apply_kernel(&w, &points)) {
                *acc += v;
            }
        }
        for (i, (s, s2)) in sum.iter_mut().zip(sum_sq.iter_mut()).enumerate() {
            let prod = xi[2 * i] * xi[2 * i + 1];
            *s += prod;
            *s2 += prod * prod;
        }
    }
    let n = samples as f64;
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            let mean = sum[i] / n;
            let var = (sum_sq[i] / n - mean * mean).max(0.0) * n / (n - 1.0);
            CovarianceCheck {
                x,
                y,
                expected: t * kernel.covariance(x, y),
                empirical: mean,
                std_error: (var / n).sqrt(),
            }
        })
        .collect())
}
