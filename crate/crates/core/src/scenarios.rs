//! Named model presets, kernels and initial states shared by the acceptance
//! suite and the command-line tool.

use crate::coefficients::{ModelCoefficients, CoefficientsBuilder};
use crate::error::Result;
use crate::grid::{Grid1D, PhaseProfile, SystemState};
use crate::noise::NoiseKernel;
use crate::solver::SolverConfig;
use crate::validation::{stefan_profile, StefanSimilarity};

/// `u1 = −a·x·e^{−x²}`, `u2 = b·x·e^{−x²}`, front at `xstar`.
pub fn bump_state(grid: Grid1D, a: f64, b: f64, xstar: f64) -> Result<SystemState> {
    SystemState::new(
        PhaseProfile::from_fn(grid, |x| -a * x * (-x * x).exp()),
        PhaseProfile::from_fn(grid, |x| b * x * (-x * x).exp()),
        xstar,
    )
}

/// Gaussian kernel of width `w` on `[−6, 6]`, ten cells per width.
pub fn gaussian_kernel(width: f64) -> Result<NoiseKernel> {
    NoiseKernel::gaussian_resolved(width, (-6.0, 6.0), 10.0)
}

/// One-phase Stefan problem with similarity data.
#[derive(Debug, Clone)]
pub struct StefanBenchmark {
    pub similarity: StefanSimilarity,
    pub grid: Grid1D,
    pub config: SolverConfig,
}

impl StefanBenchmark {
    /// `η = ϱ = 1`, `A = 0.5`, `t0 = 0.1`, `n = 400`, `L = 8`, `dt = 1e-5`, horizon 0.5.
    pub fn standard() -> Result<Self> {
        Ok(Self {
            similarity: StefanSimilarity::new(1.0, 1.0, 0.5, 0.1, 0.0)?,
            grid: Grid1D::new(400, 8.0)?,
            config: SolverConfig { dt: 1e-5, t_end: 0.5, record_stride: 0, ..Default::default() },
        })
    }

    pub fn model(&self) -> Result<ModelCoefficients> {
        ModelCoefficients::stefan(self.similarity.varrho)
            .eta(self.similarity.eta, self.similarity.eta)
            .build()
    }

    pub fn initial_state(&self) -> Result<SystemState> {
        stefan_profile(&self.similarity, 0.0, self.grid)
    }
}

/// Stefan front law with multiplicative noise `σ±(x, y) = s·y`.
pub fn noisy_stefan(varrho: f64, s: f64) -> CoefficientsBuilder {
    ModelCoefficients::stefan(varrho).multiplicative_noise(s).name(format!("noisy_stefan({varrho}, {s})"))
}

/// Affine noise `σ = s·y` with the bounded front law `ρ = tanh(g2 − g1)`.
pub fn global_existence(s: f64) -> CoefficientsBuilder {
    ModelCoefficients::builder(format!("global_existence({s})"))
        .rho(|g1, g2| (g2 - g1).tanh())
        .multiplicative_noise(s)
}

/// Affine noise with the superlinear front law `ρ = ϱ·(g2 − g1)·|g2 − g1|`.
pub fn superlinear_front(varrho: f64, s: f64) -> CoefficientsBuilder {
    ModelCoefficients::builder(format!("superlinear_front({varrho}, {s})"))
        .rho(move |g1, g2| {
            let d = g2 - g1;
            varrho * d * d.abs()
        })
        .multiplicative_noise(s)
}

/// Constant `σ ≡ level`, which breaks `σ(0, 0) = 0`. Built without validation.
pub fn sigma_violation(level: f64) -> Result<ModelCoefficients> {
    ModelCoefficients::stefan(1.0)
        .name(format!("sigma_violation({level})"))
        .sigma_plus(move |_, _| level)
        .sigma_minus(move |_, _| level)
        .build_unvalidated()
}

/// Boundary threshold matched to a graph-norm threshold under a quadratic front law.
///
/// Near blow-up the boundary layer has width `~ η/ρ ~ |I|⁻²`, which makes the
/// graph norm grow like `|I|²`.
pub fn quadratic_boundary_threshold(blowup_threshold: f64) -> f64 {
    blowup_threshold.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_build() {
        assert!(noisy_stefan(1.0, 0.5).build().is_ok());
        assert!(global_existence(0.5).build().unwrap().affine_sigma.is_some());
        let m = superlinear_front(1.0, 1.0).build().unwrap();
        assert_eq!((m.rho)(1.0, -1.0), -4.0);
        assert!(ModelCoefficients::stefan(1.0).sigma_plus(|_, _| 1.0).build().is_err());
        assert_eq!((sigma_violation(1.0).unwrap().sigma_plus)(0.0, 0.0), 1.0);
        let b = StefanBenchmark::standard().unwrap();
        let s = b.initial_state().unwrap();
        assert_eq!(s.grid().n(), 400);
        assert!(s.xstar > 0.0);
        assert_eq!(quadratic_boundary_threshold(1e6), 1e3);
    }
}
