//! Exponential-Euler integration of the fixed-frame system, truncation, blow-up
//! tracking and seeded ensembles.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{eval_drift, eval_sigma, ModelCoefficients, TruncationLevel};
use crate::error::{invalid, Error, Result};
use crate::grid::{boundary_trace, graph_norm, state_l2_norm, BoundaryTrace, Generator, SystemState};
use crate::noise::{shifted_points, NoiseIncrement, NoiseKernel};
use crate::semigroup::SpectralLaplacian;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `u⁺ = S_dt (u + dt·B(u) + C(u)ΔW)`.
    #[default]
    ExponentialEuler,
    /// `u⁺ = (I − dt·A)⁻¹ (u + dt·B(u) + C(u)ΔW)`.
    SemiImplicitEuler,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::ExponentialEuler => write!(f, "exponential_euler"),
            Scheme::SemiImplicitEuler => write!(f, "semi_implicit_euler"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub truncation_n: Option<f64>,
    /// Graph-norm level treated as blow-up.
    pub blowup_threshold: f64,
    /// `|I(u)|` level that marks boundary blow-up.
    pub boundary_threshold: f64,
    pub seed: u64,
    pub scheme: Scheme,
    /// Keep every `record_stride`-th full state; `0` keeps only the first and last.
    pub record_stride: usize,
    /// Keep the noise increments, needed for replay and the chain-rule residual.
    pub record_noise: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            t_end: 1.0,
            truncation_n: None,
            blowup_threshold: 1e6,
            boundary_threshold: 1e6,
            seed: 0,
            scheme: Scheme::ExponentialEuler,
            record_stride: 1,
            record_noise: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("solver.dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(invalid("solver.t_end", format!("must be positive, got {}", self.t_end)));
        }
        if self.dt > self.t_end {
            return Err(invalid("solver.dt", format!("dt = {} exceeds t_end = {}", self.dt, self.t_end)));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(invalid("solver.blowup_threshold", "must be positive"));
        }
        if !(self.boundary_threshold > 0.0) {
            return Err(invalid("solver.boundary_threshold", "must be positive"));
        }
        if let Some(n) = self.truncation_n {
            TruncationLevel::new(n)?;
        }
        Ok(())
    }

    /// Number of steps to reach `t_end`.
    pub fn n_steps(&self) -> usize {
        let r = self.t_end / self.dt;
        let k = r.round();
        if (r - k).abs() <= 1e-9 * r.max(1.0) {
            k as usize
        } else {
            r.ceil() as usize
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryStatus {
    Completed,
    /// First step at which the graph norm reached the threshold or the state became non-finite.
    Blowup { t: f64, graph_norm: f64 },
}

impl TrajectoryStatus {
    pub fn is_blowup(&self) -> bool {
        matches!(self, TrajectoryStatus::Blowup { .. })
    }

    pub fn blowup_time(&self) -> Option<f64> {
        match self {
            TrajectoryStatus::Blowup { t, .. } => Some(*t),
            TrajectoryStatus::Completed => None,
        }
    }
}

/// Scalar series are kept at every step; full states at `state_stride`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedFrameTrajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub fronts: Vec<f64>,
    pub traces: Vec<BoundaryTrace>,
    /// `ρ(I(u))` at each recorded time (untruncated).
    pub rhos: Vec<f64>,
    pub graph_norms: Vec<f64>,
    pub l2_norms: Vec<f64>,
    pub state_stride: usize,
    /// `states[i]` is the state at step `i·state_stride` (just the initial state when the stride is 0).
    pub states: Vec<SystemState>,
    pub final_state: SystemState,
    pub status: TrajectoryStatus,
    /// First time `|I(u)| ≥ boundary_threshold`, if it happened.
    pub t_circ: Option<f64>,
    /// `noise[i]` drove the step from `times[i]` to `times[i+1]`.
    pub noise: Option<Vec<NoiseIncrement>>,
}

impl FixedFrameTrajectory {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Step index of `states[i]`.
    pub fn state_step(&self, i: usize) -> usize {
        i * self.state_stride
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }
}

/// Precomputed spectral data for repeated steps of one size.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    mc: &'a ModelCoefficients,
    kernel: &'a NoiseKernel,
    sl_plus: SpectralLaplacian,
    sl_minus: SpectralLaplacian,
    mult_plus: Vec<f64>,
    mult_minus: Vec<f64>,
    dt: f64,
    truncation: Option<TruncationLevel>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        mc: &'a ModelCoefficients,
        kernel: &'a NoiseKernel,
        grid: crate::grid::Grid1D,
        dt: f64,
        scheme: Scheme,
        truncation: Option<TruncationLevel>,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("solver.dt", format!("must be positive, got {dt}")));
        }
        let sl_plus = SpectralLaplacian::new(grid, mc.eta_plus, mc.c)?;
        let sl_minus = SpectralLaplacian::new(grid, mc.eta_minus, mc.c)?;
        let mult = |sl: &SpectralLaplacian| -> Vec<f64> {
            match scheme {
                Scheme::ExponentialEuler => sl.semigroup_multipliers(dt),
                Scheme::SemiImplicitEuler => sl.eigenvalues().iter().map(|l| 1.0 / (1.0 - dt * l)).collect(),
            }
        };
        Ok(Self {
            mult_plus: mult(&sl_plus),
            mult_minus: mult(&sl_minus),
            sl_plus,
            sl_minus,
            mc,
            kernel,
            dt,
            truncation,
        })
    }

    pub fn generator(&self) -> Generator {
        self.mc.generator()
    }

    /// One step driven by `w`. `norm` is the graph norm of `s`, used only under truncation.
    pub fn advance(&self, s: &SystemState, norm: Option<f64>, w: &NoiseIncrement) -> Result<SystemState> {
        let tr = boundary_trace(s);
        let drift = eval_drift(self.mc, s, &tr)?;
        let (sig1, sig2) = eval_sigma(self.mc, s)?;
        let h = match self.truncation {
            Some(t) => t.h(norm.unwrap_or_else(|| graph_norm(s, &self.mc.generator()))),
            None => 1.0,
        };
        let dt = self.dt;
        let mut v1: Vec<f64> = s.u1.values().to_vec();
        let mut v2: Vec<f64> = s.u2.values().to_vec();
        for (v, b) in v1.iter_mut().zip(drift.b1.values()) {
            *v += dt * (h * b);
        }
        for (v, b) in v2.iter_mut().zip(drift.b2.values()) {
            *v += dt * (h * b);
        }
        let noisy = h != 0.0
            && (sig1.values().iter().any(|&x| x != 0.0) || sig2.values().iter().any(|&x| x != 0.0));
        if noisy {
            let (plus, minus) = shifted_points(s);
            let mut t1 = vec![0.0; plus.len()];
            let mut t2 = vec![0.0; minus.len()];
            self.kernel.apply_kernel_into(&w.w, &plus, &mut t1);
            self.kernel.apply_kernel_into(&w.w, &minus, &mut t2);
            for ((v, t), sg) in v1.iter_mut().zip(&t1).zip(sig1.values()) {
                *v += (h * sg) * t;
            }
            for ((v, t), sg) in v2.iter_mut().zip(&t2).zip(sig2.values()) {
                *v += (h * sg) * t;
            }
        }
        self.sl_plus.apply_diagonal_in_place(&mut v1, &self.mult_plus);
        self.sl_minus.apply_diagonal_in_place(&mut v2, &self.mult_minus);
        let xstar = if h == 1.0 {
            s.xstar + dt * drift.rho
        } else {
            s.xstar + dt * (h * drift.front - self.mc.c * s.xstar)
        };
        let out = SystemState::new(
            crate::grid::PhaseProfile::new(s.grid(), v1)?,
            crate::grid::PhaseProfile::new(s.grid(), v2)?,
            xstar,
        )?;
        out.check()?;
        Ok(out)
    }
}

/// One exponential-Euler step with a freshly sampled increment.
pub fn step<R: rand::Rng + ?Sized>(
    sl_pair: (&SpectralLaplacian, &SpectralLaplacian),
    mc: &ModelCoefficients,
    kernel: &NoiseKernel,
    s: &SystemState,
    dt: f64,
    rng: &mut R,
) -> Result<SystemState> {
    let w = NoiseIncrement::sample(kernel, dt, rng);
    step_with_increment(sl_pair, mc, kernel, s, &w)
}

/// One exponential-Euler step driven by a given increment.
pub fn step_with_increment(
    sl_pair: (&SpectralLaplacian, &SpectralLaplacian),
    mc: &ModelCoefficients,
    kernel: &NoiseKernel,
    s: &SystemState,
    w: &NoiseIncrement,
) -> Result<SystemState> {
    if sl_pair.0.grid() != s.grid() || sl_pair.1.grid() != s.grid() {
        return Err(Error::GridMismatch("operators and state use different grids".into()));
    }
    if sl_pair.0.eta() != mc.eta_plus || sl_pair.1.eta() != mc.eta_minus || sl_pair.0.c() != mc.c {
        return Err(Error::Contract("spectral operators do not match the coefficients".into()));
    }
    let stepper = Stepper::new(mc, kernel, s.grid(), w.dt, Scheme::ExponentialEuler, None)?;
    stepper.advance(s, None, w)
}

/// Source of increments for a trajectory.
enum Driver<'a> {
    Sampled(ChaCha8Rng),
    Replay(&'a [NoiseIncrement]),
}

/// ChaCha8 stream for path `path` of an ensemble seeded with `seed`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Integrates to `t_end` or blow-up, sampling noise from `cfg.seed`.
pub fn run_trajectory(
    cfg: &SolverConfig,
    mc: &ModelCoefficients,
    kernel: &NoiseKernel,
    s0: &SystemState,
) -> Result<FixedFrameTrajectory> {
    run_inner(cfg, mc, kernel, s0, Driver::Sampled(path_rng(cfg.seed, 0)))
}

/// Same as [`run_trajectory`] with an explicit random stream.
pub fn run_trajectory_with_rng(
    cfg: &SolverConfig,
    mc: &ModelCoefficients,
    kernel: &NoiseKernel,
    s0: &SystemState,
    rng: ChaCha8Rng,
) -> Result<FixedFrameTrajectory> {
    run_inner(cfg, mc, kernel, s0, Driver::Sampled(rng))
}

/// Replays recorded increments; runs for `increments.len()` steps of size `increments[i].dt`.
pub fn run_with_increments(
    cfg: &SolverConfig,
    mc: &ModelCoefficients,
    kernel: &NoiseKernel,
    s0: &SystemState,
    increments: &[NoiseIncrement],
) -> Result<FixedFrameTrajectory> {
    if increments.iter().any(|w| w.w.len() != kernel.m_y()) {
        return Err(Error::Contract("increment length differs from the kernel's m_y".into()));
    }
    let mut cfg = cfg.clone();
    cfg.t_end = cfg.dt * increments.len() as f64;
    run_inner(&cfg, mc, kernel, s0, Driver::Replay(increments))
}

/// [`run_trajectory`] with the coefficients passed through `h_N(graph_norm)`.
pub fn run_truncated(
    cfg: &SolverConfig,
    n: f64,
    mc: &ModelCoefficients,
    kernel: &NoiseKernel,
    s0: &SystemState,
) -> Result<FixedFrameTrajectory> {
    let mut cfg = cfg.clone();
    cfg.truncation_n = Some(n);
    run_trajectory(&cfg, mc, kernel, s0)
}

fn run_inner(
    cfg: &SolverConfig,
    mc: &ModelCoefficients,
    kernel: &NoiseKernel,
    s0: &SystemState,
    mut driver: Driver<'_>,
) -> Result<FixedFrameTrajectory> {
    cfg.validate()?;
    s0.check()?;
    let truncation = cfg.truncation_n.map(TruncationLevel::new).transpose()?;
    let stepper = Stepper::new(mc, kernel, s0.grid(), cfg.dt, cfg.scheme, truncation)?;
    let gen = mc.generator();
    let n_steps = match driver {
        Driver::Replay(w) => w.len(),
        Driver::Sampled(_) => cfg.n_steps(),
    };

    let tr0 = boundary_trace(s0);
    let mut traj = FixedFrameTrajectory {
        dt: cfg.dt,
        times: Vec::with_capacity(n_steps + 1),
        fronts: Vec::with_capacity(n_steps + 1),
        traces: Vec::with_capacity(n_steps + 1),
        rhos: Vec::with_capacity(n_steps + 1),
        graph_norms: Vec::with_capacity(n_steps + 1),
        l2_norms: Vec::with_capacity(n_steps + 1),
        state_stride: cfg.record_stride,
        states: vec![s0.clone()],
        final_state: s0.clone(),
        status: TrajectoryStatus::Completed,
        t_circ: None,
        noise: cfg.record_noise.then(Vec::new),
    };
    let mut norm = graph_norm(s0, &gen);
    let rho0 = (mc.rho)(tr0.g1, tr0.g2);
    push_scalars(&mut traj, 0.0, s0, tr0, rho0, norm);
    if tr0.magnitude() >= cfg.boundary_threshold {
        traj.t_circ = Some(0.0);
    }

    let mut w = NoiseIncrement::zeros(kernel, cfg.dt);
    let mut s = s0.clone();
    for i in 0..n_steps {
        let t = (i + 1) as f64 * cfg.dt;
        let inc: &NoiseIncrement = match &mut driver {
            Driver::Sampled(rng) => {
                NoiseIncrement::fill(&mut w.w, kernel.dy(), cfg.dt, rng);
                &w
            }
            Driver::Replay(ws) => &ws[i],
        };
        let next = stepper.advance(&s, Some(norm), inc);
        if let Some(rec) = traj.noise.as_mut() {
            rec.push(inc.clone());
        }
        let next = match next {
            Ok(n) => n,
            Err(_) => {
                traj.status = TrajectoryStatus::Blowup { t, graph_norm: f64::INFINITY };
                if traj.t_circ.is_none() {
                    traj.t_circ = Some(t);
                }
                break;
            }
        };
        let tr = boundary_trace(&next);
        let gn = graph_norm(&next, &gen);
        if traj.t_circ.is_none() && !(tr.magnitude() < cfg.boundary_threshold) {
            traj.t_circ = Some(t);
        }
        if !(gn < cfg.blowup_threshold) {
            traj.status = TrajectoryStatus::Blowup { t, graph_norm: gn };
            break;
        }
        let rho = (mc.rho)(tr.g1, tr.g2);
        push_scalars(&mut traj, t, &next, tr, rho, gn);
        if cfg.record_stride > 0 && (i + 1) % cfg.record_stride == 0 {
            traj.states.push(next.clone());
        }
        norm = gn;
        s = next;
    }
    if let Some(rec) = traj.noise.as_mut() {
        rec.truncate(traj.times.len() - 1);
    }
    if cfg.record_stride == 0 && traj.times.len() > 1 {
        traj.state_stride = traj.times.len() - 1;
        traj.states.push(s.clone());
    }
    traj.final_state = s;
    Ok(traj)
}

fn push_scalars(
    traj: &mut FixedFrameTrajectory,
    t: f64,
    s: &SystemState,
    tr: BoundaryTrace,
    rho: f64,
    gn: f64,
) {
    traj.times.push(t);
    traj.fronts.push(s.xstar);
    traj.traces.push(tr);
    traj.rhos.push(rho);
    traj.graph_norms.push(gn);
    traj.l2_norms.push(state_l2_norm(s));
}

/// Outcome of one ensemble path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub path: u64,
    pub status: TrajectoryStatus,
    pub t_circ: Option<f64>,
    pub final_time: f64,
    pub final_front: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n_paths: usize,
    pub times: Vec<f64>,
    /// Paths still alive at each time.
    pub alive: Vec<usize>,
    pub mean_front: Vec<f64>,
    /// Unbiased sample variance, 0 when fewer than two paths are alive.
    pub var_front: Vec<f64>,
    pub mean_g1: Vec<f64>,
    pub mean_g2: Vec<f64>,
    pub blowups: usize,
    pub blowup_frequency: f64,
    pub paths: Vec<PathSummary>,
}

/// Independent paths on stream `i` of `cfg.seed`, reduced in path order.
pub fn run_ensemble(
    cfg: &SolverConfig,
    mc: &ModelCoefficients,
    kernel: &NoiseKernel,
    s0: &SystemState,
    n_paths: usize,
    workers: usize,
) -> Result<EnsembleStats> {
    let trajs = run_paths(cfg, mc, kernel, s0, n_paths, workers)?;
    Ok(reduce_ensemble(&trajs))
}

/// Runs the ensemble paths and returns them in path order.
pub fn run_paths(
    cfg: &SolverConfig,
    mc: &ModelCoefficients,
    kernel: &NoiseKernel,
    s0: &SystemState,
    n_paths: usize,
    workers: usize,
) -> Result<Vec<FixedFrameTrajectory>> {
    if n_paths == 0 {
        return Err(invalid("ensemble.n_paths", "must be at least 1"));
    }
    if workers == 0 {
        return Err(invalid("ensemble.workers", "must be at least 1"));
    }
    cfg.validate()?;
    let mut path_cfg = cfg.clone();
    path_cfg.record_stride = 0;
    path_cfg.record_noise = false;
    let run = |p: usize| {
        run_trajectory_with_rng(&path_cfg, mc, kernel, s0, path_rng(cfg.seed, p as u64))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Contract(format!("thread pool: {e}")))?;
    pool.install(|| (0..n_paths).into_par_iter().map(run).collect::<Result<Vec<_>>>())
}

pub fn reduce_ensemble(trajs: &[FixedFrameTrajectory]) -> EnsembleStats {
    let len = trajs.iter().map(|t| t.times.len()).max().unwrap_or(0);
    let longest = trajs.iter().find(|t| t.times.len() == len).expect("non-empty ensemble");
    let times = longest.times.clone();
    let mut alive = vec![0usize; len];
    let mut g1 = vec![0.0; len];
    let mut g2 = vec![0.0; len];
    // front moments are accumulated relative to the first path so that
    // identical paths give exactly zero variance
    let reference: Vec<f64> = longest.fronts.clone();
    let mut sum_d = vec![0.0; len];
    let mut sum_d2 = vec![0.0; len];
    for t in trajs {
        for i in 0..t.times.len() {
            alive[i] += 1;
            let d = t.fronts[i] - reference[i];
            sum_d[i] += d;
            sum_d2[i] += d * d;
            g1[i] += t.traces[i].g1;
            g2[i] += t.traces[i].g2;
        }
    }
    let mut mean = vec![0.0; len];
    let mut var = vec![0.0; len];
    for i in 0..len {
        let k = alive[i] as f64;
        mean[i] = reference[i] + sum_d[i] / k;
        g1[i] /= k;
        g2[i] /= k;
        var[i] = if alive[i] > 1 {
            ((sum_d2[i] - sum_d[i] * sum_d[i] / k) / (k - 1.0)).max(0.0)
        } else {
            0.0
        };
    }
    let paths: Vec<PathSummary> = trajs
        .iter()
        .enumerate()
        .map(|(p, t)| PathSummary {
            path: p as u64,
            status: t.status,
            t_circ: t.t_circ,
            final_time: t.final_time(),
            final_front: t.final_state.xstar,
        })
        .collect();
    let blowups = paths.iter().filter(|p| p.status.is_blowup()).count();
    EnsembleStats {
        n_paths: trajs.len(),
        times,
        alive,
        mean_front: mean,
        var_front: var,
        mean_g1: g1,
        mean_g2: g2,
        blowups,
        blowup_frequency: blowups as f64 / trajs.len() as f64,
        paths,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{norm_sobolev, Grid1D, PhaseProfile};
    use std::f64::consts::PI;

    fn heat() -> ModelCoefficients {
        ModelCoefficients::heat().c(1.0).build().unwrap()
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let g = Grid1D::new(32, 1.0).unwrap();
        let mc = heat();
        let k = NoiseKernel::zero();
        let sl = SpectralLaplacian::new(g, 1.0, 1.0).unwrap();
        let s = SystemState::zeros(g, 0.0);
        let w = NoiseIncrement::zeros(&k, 1e-3);
        assert_eq!(step_with_increment((&sl, &sl), &mc, &k, &s, &w).unwrap(), s);
    }

    #[test]
    fn pure_semigroup_on_eigenvector() {
        let g = Grid1D::new(47, 2.0).unwrap();
        let mc = heat();
        let k = NoiseKernel::zero();
        let sl = SpectralLaplacian::new(g, 1.0, 1.0).unwrap();
        let l = g.length();
        let u1 = PhaseProfile::from_fn(g, |x| (3.0 * PI * x / l).sin());
        let s = SystemState::new(u1.clone(), PhaseProfile::zeros(g), 0.25).unwrap();
        let dt = 1e-3;
        let w = NoiseIncrement::zeros(&k, dt);
        let out = step_with_increment((&sl, &sl), &mc, &k, &s, &w).unwrap();
        // B contributes +c·u, S_dt carries −c: the net factor is exp(dt·(λ+c))·(1 + c·dt)
        let lam = sl.eigenvalues()[2];
        let f = (dt * lam).exp() * (1.0 + dt);
        for (a, b) in out.u1.values().iter().zip(u1.values()) {
            assert!((a - f * b).abs() < 1e-12);
        }
        assert_eq!(out.xstar, 0.25);
    }

    #[test]
    fn pure_semigroup_with_c_zero() {
        let g = Grid1D::new(47, 2.0).unwrap();
        let mc = ModelCoefficients::heat().c(0.0).build().unwrap();
        let k = NoiseKernel::zero();
        let sl = SpectralLaplacian::new(g, 1.0, 0.0).unwrap();
        let l = g.length();
        let u1 = PhaseProfile::from_fn(g, |x| (3.0 * PI * x / l).sin());
        let s = SystemState::new(u1.clone(), PhaseProfile::zeros(g), 0.0).unwrap();
        let w = NoiseIncrement::zeros(&k, 1e-3);
        let out = step_with_increment((&sl, &sl), &mc, &k, &s, &w).unwrap();
        let f = (1e-3 * sl.eigenvalues()[2]).exp();
        for (a, b) in out.u1.values().iter().zip(u1.values()) {
            assert!((a - f * b).abs() < 1e-13);
        }
    }

    #[test]
    fn deterministic_heat_matches_series() {
        // oracle: continuum sine series of the initial data
        let g = Grid1D::new(399, 1.0).unwrap();
        let mc = ModelCoefficients::heat().c(0.0).build().unwrap();
        let k = NoiseKernel::zero();
        let f = |x: f64| (PI * x).sin();
        let s0 = SystemState::new(PhaseProfile::from_fn(g, f), PhaseProfile::zeros(g), 0.0).unwrap();
        let cfg = SolverConfig { dt: 1e-4, t_end: 0.01, record_stride: 0, ..Default::default() };
        let traj = run_trajectory(&cfg, &mc, &k, &s0).unwrap();
        let t = 0.01;
        let exact = PhaseProfile::from_fn(g, |x| {
            (-PI * PI * t).exp() * (PI * x).sin()
        });
        let err = norm_sobolev(&traj.final_state.u1.axpy(-1.0, &exact), 0).unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn run_is_deterministic_and_dirichlet_preserving() {
        let g = Grid1D::new(40, 4.0).unwrap();
        let mc = ModelCoefficients::stefan(1.0).multiplicative_noise(0.5).build().unwrap();
        let k = NoiseKernel::gaussian_resolved(0.5, (-6.0, 6.0), 4.0).unwrap();
        let s0 = SystemState::new(
            PhaseProfile::from_fn(g, |x| -x * (4.0 - x) * 0.2),
            PhaseProfile::from_fn(g, |x| x * (4.0 - x) * 0.1),
            0.0,
        )
        .unwrap();
        let cfg = SolverConfig { dt: 1e-3, t_end: 0.1, seed: 42, ..Default::default() };
        let a = run_trajectory(&cfg, &mc, &k, &s0).unwrap();
        let b = run_trajectory(&cfg, &mc, &k, &s0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.status, TrajectoryStatus::Completed);
        for s in &a.states {
            assert_eq!(s.u1.extended()[0], 0.0);
            assert_eq!(*s.u1.extended().last().unwrap(), 0.0);
        }
        let mut cfg2 = cfg.clone();
        cfg2.seed = 43;
        assert_ne!(run_trajectory(&cfg2, &mc, &k, &s0).unwrap().final_state, a.final_state);
    }

    #[test]
    fn front_is_frozen_without_rho() {
        let g = Grid1D::new(40, 4.0).unwrap();
        let mc = ModelCoefficients::builder("noisy").multiplicative_noise(1.0).build().unwrap();
        let k = NoiseKernel::gaussian_resolved(0.5, (-6.0, 6.0), 4.0).unwrap();
        let s0 = SystemState::new(PhaseProfile::from_fn(g, |x| (x * 0.8).sin()), PhaseProfile::zeros(g), 1.3)
            .unwrap();
        let cfg = SolverConfig { dt: 1e-3, t_end: 0.05, ..Default::default() };
        let traj = run_trajectory(&cfg, &mc, &k, &s0).unwrap();
        assert!(traj.fronts.iter().all(|&x| x == 1.3));
    }

    #[test]
    fn mild_and_strong_steps_agree_to_second_order() {
        let g = Grid1D::new(63, 1.0).unwrap();
        let mc = ModelCoefficients::heat().c(1.0).build().unwrap();
        let k = NoiseKernel::zero();
        let sl = SpectralLaplacian::new(g, 1.0, 1.0).unwrap();
        let gen = mc.generator();
        let s = SystemState::new(
            PhaseProfile::from_fn(g, |x| (PI * x).sin() + 0.3 * (2.0 * PI * x).sin()),
            PhaseProfile::zeros(g),
            0.0,
        )
        .unwrap();
        let mut errs = Vec::new();
        for dt in [1e-3, 5e-4, 2.5e-4, 1.25e-4] {
            let w = NoiseIncrement::zeros(&k, dt);
            let mild = step_with_increment((&sl, &sl), &mc, &k, &s, &w).unwrap();
            let au = gen.apply_phase(crate::error::Phase::Plus, &s.u1);
            let strong = s.u1.axpy(dt, &au).axpy(dt * mc.c, &s.u1);
            errs.push(norm_sobolev(&mild.u1.axpy(-1.0, &strong), 0).unwrap());
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.8, "{errs:?}");
        }
    }

    #[test]
    fn truncated_run_matches_untruncated_below_the_level() {
        let g = Grid1D::new(30, 4.0).unwrap();
        let mc = ModelCoefficients::stefan(1.0).multiplicative_noise(0.2).build().unwrap();
        let k = NoiseKernel::gaussian_resolved(0.5, (-6.0, 6.0), 4.0).unwrap();
        let s0 = SystemState::new(PhaseProfile::from_fn(g, |x| -0.1 * x * (4.0 - x)), PhaseProfile::zeros(g), 0.0)
            .unwrap();
        let cfg = SolverConfig { dt: 1e-3, t_end: 0.05, seed: 3, ..Default::default() };
        let plain = run_trajectory(&cfg, &mc, &k, &s0).unwrap();
        let tr = run_truncated(&cfg, 1e5, &mc, &k, &s0).unwrap();
        assert_eq!(plain, tr);
    }

    #[test]
    fn truncation_beyond_the_level_leaves_pure_decay() {
        let g = Grid1D::new(30, 1.0).unwrap();
        let mc = ModelCoefficients::stefan(5.0).multiplicative_noise(1.0).build().unwrap();
        let k = NoiseKernel::gaussian_resolved(0.5, (-3.0, 3.0), 4.0).unwrap();
        let s0 = SystemState::new(PhaseProfile::from_fn(g, |x| (PI * x).sin()), PhaseProfile::zeros(g), 0.5)
            .unwrap();
        let cfg = SolverConfig { dt: 1e-3, t_end: 1e-3, ..Default::default() };
        let norm = graph_norm(&s0, &mc.generator());
        let traj = run_truncated(&cfg, norm * 0.1, &mc, &k, &s0).unwrap();
        let sl = SpectralLaplacian::new(g, 1.0, 1.0).unwrap();
        let expected = sl.apply_semigroup(&s0.u1, 1e-3).unwrap();
        for (a, b) in traj.final_state.u1.values().iter().zip(expected.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((traj.final_state.xstar - 0.5 * (1.0 - 1e-3)).abs() < 1e-15);
    }

    #[test]
    fn replay_reproduces_sampled_run() {
        let g = Grid1D::new(24, 3.0).unwrap();
        let mc = ModelCoefficients::stefan(1.0).multiplicative_noise(0.5).build().unwrap();
        let k = NoiseKernel::gaussian_resolved(0.5, (-5.0, 5.0), 4.0).unwrap();
        let s0 = SystemState::new(PhaseProfile::from_fn(g, |x| -0.2 * x * (3.0 - x)), PhaseProfile::zeros(g), 0.0)
            .unwrap();
        let cfg = SolverConfig { dt: 1e-3, t_end: 0.02, seed: 8, record_noise: true, ..Default::default() };
        let a = run_trajectory(&cfg, &mc, &k, &s0).unwrap();
        let b = run_with_increments(&cfg, &mc, &k, &s0, a.noise.as_ref().unwrap()).unwrap();
        assert_eq!(a.final_state, b.final_state);
    }

    #[test]
    fn ensemble_edge_cases() {
        let g = Grid1D::new(20, 3.0).unwrap();
        let det = ModelCoefficients::stefan(1.0).build().unwrap();
        let k = NoiseKernel::gaussian_resolved(0.5, (-5.0, 5.0), 4.0).unwrap();
        let s0 = SystemState::new(PhaseProfile::from_fn(g, |x| -0.2 * x * (3.0 - x)), PhaseProfile::zeros(g), 0.0)
            .unwrap();
        let cfg = SolverConfig { dt: 1e-3, t_end: 0.02, seed: 1, ..Default::default() };
        let stats = run_ensemble(&cfg, &det, &k, &s0, 8, 2).unwrap();
        assert!(stats.var_front.iter().all(|&v| v == 0.0));
        assert_eq!(stats.blowups, 0);

        let noisy = ModelCoefficients::stefan(1.0).multiplicative_noise(0.5).build().unwrap();
        let one = run_ensemble(&cfg, &noisy, &k, &s0, 1, 1).unwrap();
        let mut single_cfg = cfg.clone();
        single_cfg.record_stride = 0;
        let single = run_trajectory_with_rng(&single_cfg, &noisy, &k, &s0, path_rng(cfg.seed, 0)).unwrap();
        assert_eq!(one.mean_front, single.fronts);
        assert!(run_ensemble(&cfg, &noisy, &k, &s0, 0, 1).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig { dt: -1.0, ..Default::default() };
        match bad.validate() {
            Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, "solver.dt"),
            other => panic!("{other:?}"),
        }
        assert!(SolverConfig { dt: 2.0, t_end: 1.0, ..Default::default() }.validate().is_err());
        assert_eq!(SolverConfig { dt: 1e-5, t_end: 0.5, ..Default::default() }.n_steps(), 50_000);
    }
}
