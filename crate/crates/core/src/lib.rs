//! Numerical laboratory for the link between local smoothing of
//! `e^{-itH}` and the decay of the unit spectral projectors
//! `P_N = 1_[N,N+1)(H)` of a one-dimensional Schrödinger operator
//! `H = -d²/dx² + V(x)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`operator`] builds grids, potentials, weights and the finite-difference
//!   Hamiltonian, and checks the growth/convexity hypotheses on `V`.
//! * [`tridiag`] computes the lowest eigenpairs by Sturm bisection and
//!   inverse iteration.
//! * [`projectors`] bins the spectrum into unit windows, measures weighted
//!   eigenfunction decay and the spectral gaps.
//! * [`smoothing`] evaluates the space-time smoothing functional by quadrature
//!   and in closed form, and estimates the sharp constant.
//! * [`free`] covers the free Laplacian band kernel and the `θ(q, k)` exponent.

pub mod coefficients;
pub mod error;
pub mod free;
mod linalg;
pub mod operator;
pub mod projectors;
pub mod quadrature;
pub mod smoothing;
pub mod tridiag;

pub use coefficients::CoefficientVector;
pub use error::{Error, Result};
pub use free::{band_params, kernel_f, theta_exponent, ttstar_kernel, uniform_bound_check, BandParams, KernelMethod};
pub use operator::{
    assemble_hamiltonian, build_grid, check_assumption, sample_potential, sample_weight, AssumptionReport, Grid,
    PotentialSpec, TridiagonalHamiltonian, WeightSpec,
};
pub use projectors::{bin_spectrum, DecayFit, DecayReport, GapProfile, ProjectorIndex};
pub use smoothing::{Dynamics, SmoothingForm, SmoothingReport, WeightMode};
pub use num_complex::Complex64;
pub use tridiag::{eigen_lowest, residual_check, ConvergenceTable, EigenSystem};

/// Japanese bracket `⟨s⟩ = (1 + s²)^{1/2}`.
#[inline]
pub fn japanese_bracket(s: f64) -> f64 {
    s.hypot(1.0)
}
