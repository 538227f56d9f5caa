//! The discrete Dirichlet heat semigroup `S_t = exp(t(ηΔ − c))` in the sine basis.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dst::Dst1;
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid1D, PhaseProfile};

/// Diagonalization of `ηΔ − c` on one phase.
///
/// The sine vectors `φ_k(x_j) = √(2/L)·sin(kπj/(n+1))` are orthonormal in the
/// `h`-weighted inner product of [`PhaseProfile::inner`], so spectral
/// coefficients carry the discrete `L²` norm exactly.
#[derive(Debug, Clone)]
pub struct SpectralLaplacian {
    grid: Grid1D,
    eta: f64,
    c: f64,
    eigenvalues: Vec<f64>,
    dst: Dst1,
}

impl SpectralLaplacian {
    pub fn new(grid: Grid1D, eta: f64, c: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(invalid("eta", format!("must be positive, got {eta}")));
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(invalid("c", format!("must be non-negative, got {c}")));
        }
        let n = grid.n();
        let h = grid.h();
        let eigenvalues = (1..=n)
            .map(|k| {
                let theta = std::f64::consts::PI * k as f64 / (n as f64 + 1.0);
                -eta * (2.0 / (h * h)) * (1.0 - theta.cos()) - c
            })
            .collect();
        Ok(Self {
            grid,
            eta,
            c,
            eigenvalues,
            dst: Dst1::new(n),
        })
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `λ_k`, `k = 1..=n`, in decreasing order (all negative when `c > 0`).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// The spectral gap `|λ_1|`.
    pub fn gap(&self) -> f64 {
        -self.eigenvalues[0]
    }

    /// Orthonormal sine coefficients of `p`.
    pub fn coefficients(&self, p: &PhaseProfile) -> Vec<f64> {
        let mut a = p.values().to_vec();
        self.dst.transform(&mut a);
        let s = self.grid.h() * (2.0 / self.grid.length()).sqrt();
        a.iter_mut().for_each(|v| *v *= s);
        a
    }

    /// Inverse of [`SpectralLaplacian::coefficients`].
    pub fn synthesize(&self, coeffs: &[f64]) -> PhaseProfile {
        let mut v = coeffs.to_vec();
        self.dst.transform(&mut v);
        let s = (2.0 / self.grid.length()).sqrt();
        v.iter_mut().for_each(|x| *x *= s);
        PhaseProfile::new(self.grid, v).expect("length preserved by the transform")
    }

    /// Applies the diagonal multiplier `m_k` in the sine basis, in place on raw values.
    pub fn apply_diagonal_in_place(&self, values: &mut [f64], multipliers: &[f64]) {
        self.dst.transform(values);
        for (v, m) in values.iter_mut().zip(multipliers) {
            *v *= m;
        }
        self.dst.inverse(values);
    }

    pub fn apply_function(&self, p: &PhaseProfile, f: impl Fn(f64) -> f64) -> PhaseProfile {
        let m: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut v = p.values().to_vec();
        self.apply_diagonal_in_place(&mut v, &m);
        PhaseProfile::new(self.grid, v).expect("length preserved by the transform")
    }

    /// `exp(t λ_k)` for every mode.
    pub fn semigroup_multipliers(&self, t: f64) -> Vec<f64> {
        self.eigenvalues.iter().map(|&l| (t * l).exp()).collect()
    }

    /// `S_t p`.
    pub fn apply_semigroup(&self, p: &PhaseProfile, t: f64) -> Result<PhaseProfile> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(invalid("t", format!("must be non-negative, got {t}")));
        }
        if p.grid() != self.grid {
            return Err(Error::GridMismatch("profile and operator grids differ".into()));
        }
        if t == 0.0 {
            return Ok(p.clone());
        }
        Ok(self.apply_function(p, |l| (t * l).exp()))
    }

    /// `‖(−A)^α p‖` for `α ∈ [0, 1]`.
    pub fn fractional_norm(&self, p: &PhaseProfile, alpha: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(invalid("alpha", format!("must lie in [0, 1], got {alpha}")));
        }
        let a = self.coefficients(p);
        Ok(self.weighted_norm(&a, alpha))
    }

    fn weighted_norm(&self, coeffs: &[f64], alpha: f64) -> f64 {
        coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(a, l)| {
                let w = if alpha == 0.0 { 1.0 } else { (-l).powf(2.0 * alpha) };
                w * a * a
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Operator norm of `(μ − A)^{-1}` for `μ ≥ 0`, read off the spectrum.
    pub fn resolvent_norm(&self, mu: f64) -> f64 {
        1.0 / (mu + self.gap())
    }

    /// `t^{α−β} e^{δt} ‖S_t p‖_α / ‖p‖_β` with `δ = c`.
    pub fn smoothing_ratio(&self, p: &PhaseProfile, alpha: f64, beta: f64, t: f64) -> Result<f64> {
        check_probe_exponents(alpha, beta)?;
        let a = self.coefficients(p);
        let base = self.weighted_norm(&a, beta);
        if base == 0.0 {
            return Ok(0.0);
        }
        Ok(self.ratio_from_coefficients(&a, alpha, beta, t) / base)
    }

    fn ratio_from_coefficients(&self, a: &[f64], alpha: f64, beta: f64, t: f64) -> f64 {
        let evolved: Vec<f64> = a
            .iter()
            .zip(&self.eigenvalues)
            .map(|(x, l)| x * (t * l).exp())
            .collect();
        t.powf(alpha - beta) * (self.c * t).exp() * self.weighted_norm(&evolved, alpha)
    }

    /// Empirical smoothing constant over random smooth profiles.
    ///
    /// Profiles are random superpositions of the lowest 32 sine modes with
    /// amplitudes decaying like `1/k`, so their law does not depend on the grid.
    pub fn smoothing_probe<R: Rng + ?Sized>(
        &self,
        alpha: f64,
        beta: f64,
        t_grid: &[f64],
        samples: usize,
        rng: &mut R,
    ) -> Result<ProbeReport> {
        check_probe_exponents(alpha, beta)?;
        if samples == 0 {
            return Err(invalid("samples", "must be positive"));
        }
        if t_grid.is_empty() || t_grid.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
            return Err(invalid("t_grid", "needs positive finite times"));
        }
        let modes = self.grid.n().min(32);
        let mut report = ProbeReport {
            alpha,
            beta,
            k_hat: 0.0,
            worst_t: t_grid[0],
            per_sample: Vec::with_capacity(samples),
        };
        for _ in 0..samples {
            let mut a = vec![0.0; self.grid.n()];
            for (k, slot) in a.iter_mut().take(modes).enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *slot = z / (k as f64 + 1.0);
            }
            let base = self.weighted_norm(&a, beta);
            let mut best = 0.0f64;
            for &t in t_grid {
                let r = self.ratio_from_coefficients(&a, alpha, beta, t) / base;
                if r > best {
                    best = r;
                }
                if r > report.k_hat {
                    report.k_hat = r;
                    report.worst_t = t;
                }
            }
            report.per_sample.push(best);
        }
        Ok(report)
    }
}

fn check_probe_exponents(alpha: f64, beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
        return Err(invalid("alpha", "exponents must lie in [0, 1]"));
    }
    if alpha <= beta {
        return Err(invalid("alpha", format!("need alpha > beta, got {alpha} <= {beta}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub alpha: f64,
    pub beta: f64,
    /// `K̂_{α,β}`: the largest ratio seen.
    pub k_hat: f64,
    pub worst_t: f64,
    /// Per-profile supremum over the time grid.
    pub per_sample: Vec<f64>,
}

/// Logarithmically spaced times `[lo, hi]`, inclusive.
pub fn log_time_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::norm_sobolev;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn eigvec(g: Grid1D, k: usize) -> PhaseProfile {
        let l = g.length();
        PhaseProfile::from_fn(g, |x| (k as f64 * PI * x / l).sin())
    }

    fn op(n: usize) -> SpectralLaplacian {
        SpectralLaplacian::new(Grid1D::new(n, 1.0).unwrap(), 1.0, 1.0).unwrap()
    }

    #[test]
    fn eigenvalues_are_negative_and_match_the_stencil() {
        let sl = op(50);
        assert!(sl.eigenvalues().iter().all(|&l| l < 0.0));
        for k in [1usize, 7, 50] {
            let p = eigvec(sl.grid(), k);
            let ap = crate::grid::second_derivative(&p);
            let l = sl.eigenvalues()[k - 1] + 1.0;
            for (a, b) in ap.values().iter().zip(p.values()) {
                assert!((a - l * b).abs() < 1e-8 * l.abs());
            }
        }
    }

    #[test]
    fn coefficients_are_orthonormal() {
        let sl = op(40);
        let p = eigvec(sl.grid(), 3);
        let a = sl.coefficients(&p);
        let norm = norm_sobolev(&p, 0).unwrap();
        for (k, v) in a.iter().enumerate() {
            let expected = if k == 2 { norm } else { 0.0 };
            assert!((v - expected).abs() < 1e-12, "k={k}: {v}");
        }
    }

    #[test]
    fn identity_at_zero_and_eigenpair_scaling() {
        let sl = op(63);
        let p = eigvec(sl.grid(), 5);
        assert_eq!(sl.apply_semigroup(&p, 0.0).unwrap(), p);
        let t = 0.003;
        let q = sl.apply_semigroup(&p, t).unwrap();
        let f = (t * sl.eigenvalues()[4]).exp();
        for (a, b) in q.values().iter().zip(p.values()) {
            assert!((a - f * b).abs() < 1e-12);
        }
        assert!(sl.apply_semigroup(&p, -1.0).is_err());
    }

    #[test]
    fn fractional_norm_limits() {
        let sl = op(63);
        let p = PhaseProfile::from_fn(sl.grid(), |x| x * (1.0 - x) * (3.0 * x).cos());
        let n0 = sl.fractional_norm(&p, 0.0).unwrap();
        assert!((n0 - norm_sobolev(&p, 0).unwrap()).abs() < 1e-10);
        let e = eigvec(sl.grid(), 4);
        let half = sl.fractional_norm(&e, 0.5).unwrap();
        let expected = (-sl.eigenvalues()[3]).sqrt() * norm_sobolev(&e, 0).unwrap();
        assert!((half - expected).abs() < 1e-10 * expected);
        // alpha = 1 is the norm of A p
        let ap = sl.apply_function(&p, |l| l);
        let n1 = sl.fractional_norm(&p, 1.0).unwrap();
        assert!((n1 - norm_sobolev(&ap, 0).unwrap()).abs() < 1e-9 * n1);
        assert!(sl.fractional_norm(&p, 1.5).is_err());
        assert!(sl.fractional_norm(&p, -0.1).is_err());
    }

    #[test]
    fn low_order_fractional_norm_tracks_fourier_sobolev() {
        // oracle: Σ (1 + (kπ/L)²)^{1/4} a_k², the continuum H^{1/4} weight
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ratios = Vec::new();
        for n in [63usize, 127] {
            let sl = op(n);
            let l = sl.grid().length();
            for _ in 0..50 {
                let vals: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let p = PhaseProfile::new(sl.grid(), vals).unwrap();
                let a = sl.coefficients(&p);
                let h14 = a
                    .iter()
                    .enumerate()
                    .map(|(k, v)| (1.0 + ((k + 1) as f64 * PI / l).powi(2)).powf(0.25) * v * v)
                    .sum::<f64>()
                    .sqrt();
                ratios.push(sl.fractional_norm(&p, 0.125).unwrap() / h14);
            }
        }
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.3 && hi < 3.0, "{lo} {hi}");
    }

    #[test]
    fn eigenvector_smoothing_ratio_closed_form() {
        let sl = op(99);
        let p = eigvec(sl.grid(), 6);
        let l = -sl.eigenvalues()[5];
        for &(alpha, beta) in &[(1.0, 0.0), (1.0, 0.5), (0.5, 0.0)] {
            let t = 0.002;
            let r = sl.smoothing_ratio(&p, alpha, beta, t).unwrap();
            let exact = t.powf(alpha - beta) * t.exp() * l.powf(alpha - beta) * (-t * l).exp();
            assert!((r - exact).abs() < 1e-10 * exact.max(1.0), "{r} vs {exact}");
        }
        assert!(sl.smoothing_ratio(&p, 0.5, 0.5, 0.1).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sl.smoothing_probe(0.5, 0.5, &[0.1], 3, &mut rng).is_err());
    }

    #[test]
    fn smoothing_constant_is_grid_stable() {
        let ts = log_time_grid(1e-4, 1.0, 40);
        let mut ks = Vec::new();
        for n in [100usize, 200] {
            let sl = op(n);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            ks.push(sl.smoothing_probe(1.0, 0.0, &ts, 20, &mut rng).unwrap().k_hat);
        }
        assert!(ks[1] <= 2.0 * ks[0] && ks[0] <= 2.0 * ks[1], "{ks:?}");
    }

    #[test]
    fn resolvent_bound_on_the_discrete_spectrum() {
        for c in [0.5, 1.0, 2.0] {
            let sl = SpectralLaplacian::new(Grid1D::new(80, 3.0).unwrap(), 1.0, c).unwrap();
            let m = 1.0f64.max(1.0 / c) + 1e-12;
            for mu in [0.1, 1.0, 10.0, 100.0] {
                assert!(sl.resolvent_norm(mu) <= m / (1.0 + mu));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn semigroup_property(
            vals in proptest::collection::vec(-1.0f64..1.0, 31),
            s in 0.0f64..0.05,
            t in 0.0f64..0.05,
        ) {
            let sl = op(31);
            let p = PhaseProfile::new(sl.grid(), vals).unwrap();
            let twice = sl.apply_semigroup(&sl.apply_semigroup(&p, s).unwrap(), t).unwrap();
            let once = sl.apply_semigroup(&p, s + t).unwrap();
            let scale = norm_sobolev(&p, 0).unwrap().max(1e-300);
            let diff = norm_sobolev(&twice.axpy(-1.0, &once), 0).unwrap();
            prop_assert!(diff <= 1e-10 * scale);
        }

        #[test]
        fn contraction(vals in proptest::collection::vec(-1.0f64..1.0, 20), t in 0.0f64..1.0) {
            let sl = SpectralLaplacian::new(Grid1D::new(20, 2.0).unwrap(), 0.7, 1.3).unwrap();
            let p = PhaseProfile::new(sl.grid(), vals).unwrap();
            let q = sl.apply_semigroup(&p, t).unwrap();
            let lhs = norm_sobolev(&q, 0).unwrap();
            let rhs = (-1.3 * t).exp() * norm_sobolev(&p, 0).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15);
        }
    }
}
