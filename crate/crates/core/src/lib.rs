//! Simulation of stochastic two-phase moving boundary problems of Stefan type.
//!
//! The state is the front-relative triple `(u1, u2, x*)` on `[0, L]` with
//! Dirichlet conditions at both ends. It is advanced by exponential Euler in
//! the sine eigenbasis of the Dirichlet Laplacian, driven by spatially
//! colored noise, and can be mapped back to the original frame.

pub mod acceptance;
pub mod coefficients;
pub mod dst;
pub mod error;
pub mod expr;
pub mod frame;
pub mod grid;
pub mod noise;
pub mod scenarios;
pub mod semigroup;
pub mod solver;
pub mod validation;

pub use coefficients::{AffineSigma, ModelCoefficients, ProbeBox, TruncationLevel, ValidationReport};
pub use error::{Error, Phase, Result};
pub use frame::{FullLineGrid, FullLineProfile, MovingFrameTrajectory};
pub use grid::{BoundaryTrace, Generator, Grid1D, PhaseProfile, SystemState};
pub use noise::{NoiseIncrement, NoiseKernel};
pub use semigroup::SpectralLaplacian;
pub use solver::{EnsembleStats, FixedFrameTrajectory, Scheme, SolverConfig, TrajectoryStatus};
pub use validation::StefanSimilarity;
