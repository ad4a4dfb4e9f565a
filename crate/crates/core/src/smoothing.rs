//! The space-time smoothing functional
//!
//! ```text
//! S(f) = ( ∫_0^{2π} ‖Ψ W e^{-itD} f‖² dt )^{1/2}
//! ```
//!
//! on the span of computed eigenmodes, where the dynamics `D` is either `H` or
//! its entire part `A = [H]`, and the spectral weight `W` is `⟨H⟩^{γ/2}` or
//! `⟨A⟩^{γ/2}`.
//!
//! Two independent routes are provided: trapezoid quadrature in time on grid
//! samples, and the exact time integral through the weighted Gram matrix
//! `G_mn = ⟨Ψφ_m, Ψφ_n⟩`:
//!
//! ```text
//! S(f)² = Σ_{a,b} conj(c_a) Q_ab c_b,   Q_ab = w_a w_b G_ab I(μ_b - μ_a),
//! I(μ) = ∫_0^{2π} e^{-itμ} dt.
//! ```
//!
//! The sharp constant on the span is `sqrt(λ_max(Q))`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::CoefficientVector;
use crate::error::{invalid, Error, Result};
use crate::japanese_bracket;
use crate::projectors::{entire_part, weighted_window_samples, ProjectorIndex};
use crate::tridiag::EigenSystem;

/// Below this `|μ|` the time integral `I(μ)` switches to its Taylor expansion.
pub const TAYLOR_THRESHOLD: f64 = 1e-6;
/// Power iteration stops once `‖Qv - ρv‖ ≤ POWER_TOL·ρ`.
pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERATIONS: usize = 200_000;
/// Consecutive Rayleigh quotient increments below `2ε·ρ` after which the
/// iteration is declared stationary (near-degenerate top eigenvalue).
const STATIONARY_RUN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    /// `e^{-itH}`.
    Hamiltonian,
    /// `e^{-itA}`, `A = [H]`.
    EntirePart,
}

/// Which operator the smoothing weight `⟨·⟩^{γ/2}` is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    Hamiltonian,
    EntirePart,
}

/// Evolution frequencies `μ_n`: `λ_n²` or `[λ_n²]`.
pub fn frequencies(eig: &EigenSystem, dynamics: Dynamics) -> Vec<f64> {
    eig.lambdas_sq()
        .iter()
        .map(|&l| match dynamics {
            Dynamics::Hamiltonian => l,
            Dynamics::EntirePart => entire_part(l),
        })
        .collect()
}

/// Spectral weights `w_n = ⟨λ_n²⟩^{γ/2}` or `⟨[λ_n²]⟩^{γ/2}`.
pub fn spectral_weights(eig: &EigenSystem, gamma: f64, mode: WeightMode) -> Vec<f64> {
    eig.lambdas_sq()
        .iter()
        .map(|&l| {
            let s = match mode {
                WeightMode::Hamiltonian => l,
                WeightMode::EntirePart => entire_part(l),
            };
            japanese_bracket(s).powf(gamma / 2.0)
        })
        .collect()
}

/// `c_n ↦ e^{-itμ_n} c_n`.
pub fn evolve(eig: &EigenSystem, f: &CoefficientVector, t: f64, dynamics: Dynamics) -> Result<CoefficientVector> {
    f.check_len(eig)?;
    let mu = frequencies(eig, dynamics);
    CoefficientVector::new(
        f.as_slice()
            .iter()
            .zip(&mu)
            .map(|(c, &m)| c * Complex64::from_polar(1.0, -t * m))
            .collect(),
    )
}

/// `I(μ) = ∫_0^{2π} e^{-itμ} dt`.
pub fn time_integral(mu: f64) -> Complex64 {
    if mu == 0.0 {
        Complex64::new(2.0 * PI, 0.0)
    } else if mu.fract() == 0.0 {
        // whole periods
        Complex64::new(0.0, 0.0)
    } else if mu.abs() < TAYLOR_THRESHOLD {
        Complex64::new(2.0 * PI - 4.0 / 3.0 * PI.powi(3) * mu * mu, -2.0 * PI * PI * mu)
    } else {
        let one_minus = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -2.0 * PI * mu);
        one_minus / Complex64::new(0.0, mu)
    }
}

fn check_inputs(eig: &EigenSystem, psi: &[f64], gamma: f64) -> Result<()> {
    if psi.len() != eig.grid().len() {
        return invalid(format!(
            "weight has {} samples, grid has {} points",
            psi.len(),
            eig.grid().len()
        ));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return invalid(format!("gamma must be finite and >= 0, got {gamma}"));
    }
    Ok(())
}

/// Weighted Gram matrix `G_mn = h·Σ_i Ψ(x_i)² φ_m(x_i) φ_n(x_i)`, row-major.
pub fn weighted_gram(eig: &EigenSystem, psi: &[f64]) -> Result<Vec<f64>> {
    check_inputs(eig, psi, 0.0)?;
    let n = eig.count();
    let h = eig.grid().spacing();
    let weighted: Vec<Vec<f64>> = eig
        .vectors()
        .par_iter()
        .map(|v| v.iter().zip(psi).map(|(x, p)| x * p * p).collect())
        .collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|m| {
            (0..=m)
                .map(|k| h * weighted[m].iter().zip(eig.vector(k)).map(|(a, b)| a * b).sum::<f64>())
                .collect()
        })
        .collect();
    let mut g = vec![0.0; n * n];
    for (m, row) in rows.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            g[m * n + k] = v;
            g[k * n + m] = v;
        }
    }
    Ok(g)
}

/// `S(f)` by the composite trapezoid rule with `nodes` intervals on
/// `[0, 2π]`, using `⟨H⟩^{γ/2}` weights.
pub fn smoothing_quadrature(
    eig: &EigenSystem,
    psi: &[f64],
    gamma: f64,
    f: &CoefficientVector,
    dynamics: Dynamics,
    nodes: usize,
) -> Result<f64> {
    smoothing_quadrature_weighted(eig, psi, gamma, f, dynamics, WeightMode::Hamiltonian, nodes)
}

pub fn smoothing_quadrature_weighted(
    eig: &EigenSystem,
    psi: &[f64],
    gamma: f64,
    f: &CoefficientVector,
    dynamics: Dynamics,
    mode: WeightMode,
    nodes: usize,
) -> Result<f64> {
    check_inputs(eig, psi, gamma)?;
    f.check_len(eig)?;
    if nodes < 8 {
        return invalid(format!("need at least 8 quadrature intervals, got {nodes}"));
    }
    let mu = frequencies(eig, dynamics);
    let w = spectral_weights(eig, gamma, mode);
    let h = eig.grid().spacing();
    let active: Vec<(usize, Complex64)> = f
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm_sqr() > 0.0)
        .map(|(n, &c)| (n, c * w[n]))
        .collect();
    let dt = 2.0 * PI / nodes as f64;
    let values: Vec<f64> = (0..=nodes)
        .into_par_iter()
        .map(|j| {
            let t = j as f64 * dt;
            let mut u = vec![Complex64::new(0.0, 0.0); psi.len()];
            for &(n, c) in &active {
                let a = c * Complex64::from_polar(1.0, -t * mu[n]);
                u.iter_mut().zip(eig.vector(n)).for_each(|(ui, p)| *ui += a * p);
            }
            h * u.iter().zip(psi).map(|(ui, p)| ui.norm_sqr() * p * p).sum::<f64>()
        })
        .collect();
    let inner: f64 = values[1..nodes].iter().sum();
    let integral = dt * (0.5 * values[0] + inner + 0.5 * values[nodes]);
    Ok(integral.max(0.0).sqrt())
}

/// The Hermitian form `Q` for one choice of dynamics and weights.
#[derive(Debug, Clone)]
pub struct SmoothingForm {
    count: usize,
    gamma: f64,
    dynamics: Dynamics,
    mode: WeightMode,
    q: Vec<Complex64>,
}

impl SmoothingForm {
    pub fn new(eig: &EigenSystem, psi: &[f64], gamma: f64, dynamics: Dynamics, mode: WeightMode) -> Result<Self> {
        check_inputs(eig, psi, gamma)?;
        let gram = weighted_gram(eig, psi)?;
        Self::from_gram(eig, &gram, gamma, dynamics, mode)
    }

    /// Reuses a precomputed [`weighted_gram`].
    pub fn from_gram(eig: &EigenSystem, gram: &[f64], gamma: f64, dynamics: Dynamics, mode: WeightMode) -> Result<Self> {
        let n = eig.count();
        if gram.len() != n * n {
            return invalid("Gram matrix size does not match the eigensystem");
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return invalid(format!("gamma must be finite and >= 0, got {gamma}"));
        }
        let mu = frequencies(eig, dynamics);
        let w = spectral_weights(eig, gamma, mode);
        let mut q = vec![Complex64::new(0.0, 0.0); n * n];
        for a in 0..n {
            for b in 0..n {
                let g = gram[a * n + b];
                if g != 0.0 {
                    q[a * n + b] = time_integral(mu[b] - mu[a]) * (w[a] * w[b] * g);
                }
            }
        }
        Ok(Self {
            count: n,
            gamma,
            dynamics,
            mode,
            q,
        })
    }

    pub fn dim(&self) -> usize {
        self.count
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dynamics(&self) -> Dynamics {
        self.dynamics
    }

    pub fn weight_mode(&self) -> WeightMode {
        self.mode
    }

    /// Row-major `Q`.
    pub fn matrix(&self) -> &[Complex64] {
        &self.q
    }

    /// `Qv`.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.count;
        (0..n)
            .map(|a| {
                self.q[a * n..(a + 1) * n]
                    .iter()
                    .zip(v)
                    .map(|(q, x)| q * x)
                    .sum::<Complex64>()
            })
            .collect()
    }

    /// `S(f)²` from the exact time integral.
    pub fn value_sqr(&self, f: &CoefficientVector) -> Result<f64> {
        if f.len() != self.count {
            return invalid(format!(
                "coefficient vector has {} entries, form has dimension {}",
                f.len(),
                self.count
            ));
        }
        let c = f.as_slice();
        let qc = self.apply(c);
        let mut total = Complex64::new(0.0, 0.0);
        let mut scale = 0.0;
        for (ca, qa) in c.iter().zip(&qc) {
            let term = ca.conj() * qa;
            scale += term.norm();
            total += term;
        }
        if total.im.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NumericalFailure {
                index: None,
                message: format!("quadratic form has imaginary part {:e} (scale {scale:e})", total.im),
            });
        }
        Ok(total.re.max(0.0))
    }

    pub fn value(&self, f: &CoefficientVector) -> Result<f64> {
        Ok(self.value_sqr(f)?.sqrt())
    }

    /// Largest `|Q_ab - conj(Q_ba)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.count;
        let mut d: f64 = 0.0;
        for a in 0..n {
            for b in 0..a {
                d = d.max((self.q[a * n + b] - self.q[b * n + a].conj()).norm());
            }
        }
        d
    }

    /// Sharp constant on the span: `sqrt(λ_max(Q))` by power iteration.
    pub fn constant(&self) -> Result<SmoothingConstant> {
        power_iteration(self)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothingConstant {
    pub c1: f64,
    /// `λ_max(Q) = C₁²`.
    pub top_eigenvalue: f64,
    #[serde(skip)]
    pub maximizer: CoefficientVector,
    pub rayleigh_history: Vec<f64>,
    pub iterations: usize,
    pub final_residual: f64,
    /// True when stopped on a stationary Rayleigh quotient rather than the
    /// residual test.
    pub stationary: bool,
}

fn power_iteration(form: &SmoothingForm) -> Result<SmoothingConstant> {
    let n = form.dim();
    if n < 2 {
        return invalid(format!("truncation must hold at least 2 modes, got {n}"));
    }
    let mut v: Vec<Complex64> = (0..n)
        .map(|k| Complex64::new(1.0 + 0.5 * ((k + 1) as f64).sin(), 0.0))
        .collect();
    let nv = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= nv);

    let mut history = Vec::new();
    let mut prev = f64::NAN;
    let mut flat_run = 0;
    let mut last_residual = f64::INFINITY;
    for it in 1..=POWER_MAX_ITERATIONS {
        let w = form.apply(&v);
        let rho: f64 = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
        let wn = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if wn == 0.0 {
            return Ok(SmoothingConstant {
                c1: 0.0,
                top_eigenvalue: 0.0,
                maximizer: CoefficientVector::new(v)?,
                rayleigh_history: vec![0.0],
                iterations: it,
                final_residual: 0.0,
                stationary: false,
            });
        }
        let residual = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b * rho).norm_sqr())
            .sum::<f64>()
            .sqrt();
        last_residual = residual;
        if history.len() < 64 || it % 64 == 0 {
            history.push(rho);
        }
        let converged = residual <= POWER_TOL * rho;
        if (rho - prev).abs() <= 2.0 * f64::EPSILON * rho {
            flat_run += 1;
        } else {
            flat_run = 0;
        }
        let stationary = flat_run >= STATIONARY_RUN;
        if converged || stationary {
            if history.last() != Some(&rho) {
                history.push(rho);
            }
            return Ok(SmoothingConstant {
                c1: rho.max(0.0).sqrt(),
                top_eigenvalue: rho,
                maximizer: CoefficientVector::new(v)?,
                rayleigh_history: history,
                iterations: it,
                final_residual: residual,
                stationary: !converged,
            });
        }
        prev = rho;
        v = w.into_iter().map(|x| x / wn).collect();
    }
    Err(Error::NumericalFailure {
        index: None,
        message: format!(
            "power iteration stagnated after {POWER_MAX_ITERATIONS} iterations; last Rayleigh quotient {prev:.17e}, residual {last_residual:e}"
        ),
    })
}

/// `S(f)` from the exact time integral, `⟨H⟩^{γ/2}` weights.
pub fn smoothing_closed_form(
    eig: &EigenSystem,
    psi: &[f64],
    gamma: f64,
    f: &CoefficientVector,
    dynamics: Dynamics,
) -> Result<f64> {
    f.check_len(eig)?;
    SmoothingForm::new(eig, psi, gamma, dynamics, WeightMode::Hamiltonian)?.value(f)
}

/// Sharp constant for the given dynamics and weights on the computed span.
pub fn smoothing_constant(
    eig: &EigenSystem,
    psi: &[f64],
    gamma: f64,
    dynamics: Dynamics,
    mode: WeightMode,
) -> Result<SmoothingConstant> {
    SmoothingForm::new(eig, psi, gamma, dynamics, mode)?.constant()
}

/// Both sides of the time-Parseval identity for `A`-dynamics with
/// `⟨A⟩^{γ/2}` weights:
///
/// * `lhs = S_A(f)²` from the closed form,
/// * `rhs = 2π Σ_N ⟨N⟩^γ ‖ΨP_N f‖²`, computed window by window on the grid.
pub fn parseval_identity_a(
    eig: &EigenSystem,
    psi: &[f64],
    gamma: f64,
    f: &CoefficientVector,
    index: &ProjectorIndex,
) -> Result<(f64, f64)> {
    check_inputs(eig, psi, gamma)?;
    f.check_len(eig)?;
    if index.mode_count() != eig.count() {
        return invalid("projector index does not match the eigensystem");
    }
    let lhs = SmoothingForm::new(eig, psi, gamma, Dynamics::EntirePart, WeightMode::EntirePart)?.value_sqr(f)?;
    let h = eig.grid().spacing();
    let rhs: f64 = index
        .bins()
        .iter()
        .map(|(&n_bin, members)| {
            let samples = weighted_window_samples(eig, psi, members, f);
            let norm_sqr = h * samples.iter().map(|s| s.norm_sqr()).sum::<f64>();
            japanese_bracket(n_bin as f64).powf(gamma) * norm_sqr
        })
        .sum::<f64>()
        * 2.0
        * PI;
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, Serialize)]
pub struct DuhamelReport {
    /// `S_H(f)` and `S_A(f)` (closed form, `⟨H⟩^{γ/2}` weights).
    pub s_h: f64,
    pub s_a: f64,
    /// `|S_H(f) - S_A(f)|`.
    pub discrepancy: f64,
    /// Sharp constant for `A`-dynamics with `⟨H⟩^{γ/2}` weights.
    pub c1_a: f64,
    /// `‖(H - A)f‖ = (Σ (λ_n² - [λ_n²])² |c_n|²)^{1/2}`.
    pub defect_norm: f64,
    /// `2π·C₁,A·‖(H - A)f‖`.
    pub bound: f64,
    /// `|S_H - S_A|` recomputed by quadrature with the requested node count.
    pub quadrature_discrepancy: f64,
    pub holds: bool,
}

/// Measured `|S_H(f) - S_A(f)|` against the Duhamel majorant
/// `2π·C₁,A·‖(H - A)f‖`.
pub fn duhamel_discrepancy(
    eig: &EigenSystem,
    psi: &[f64],
    gamma: f64,
    f: &CoefficientVector,
    nodes: usize,
) -> Result<DuhamelReport> {
    check_inputs(eig, psi, gamma)?;
    f.check_len(eig)?;
    if nodes < 8 {
        return invalid(format!("need at least 8 quadrature intervals, got {nodes}"));
    }
    let gram = weighted_gram(eig, psi)?;
    let form_h = SmoothingForm::from_gram(eig, &gram, gamma, Dynamics::Hamiltonian, WeightMode::Hamiltonian)?;
    let form_a = SmoothingForm::from_gram(eig, &gram, gamma, Dynamics::EntirePart, WeightMode::Hamiltonian)?;
    let s_h = form_h.value(f)?;
    let s_a = form_a.value(f)?;
    let discrepancy = (s_h - s_a).abs();
    let c1_a = form_a.constant()?.c1;
    let defect_norm = eig
        .lambdas_sq()
        .iter()
        .zip(f.as_slice())
        .map(|(&l, c)| (l - entire_part(l)).powi(2) * c.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let bound = 2.0 * PI * c1_a * defect_norm;
    let q_h = smoothing_quadrature(eig, psi, gamma, f, Dynamics::Hamiltonian, nodes)?;
    let q_a = smoothing_quadrature(eig, psi, gamma, f, Dynamics::EntirePart, nodes)?;
    // slack for rounding in the two closed-form evaluations
    let slack = 1e-12 * s_h.max(s_a);
    Ok(DuhamelReport {
        s_h,
        s_a,
        discrepancy,
        c1_a,
        defect_norm,
        bound,
        quadrature_discrepancy: (q_h - q_a).abs(),
        holds: discrepancy <= bound + slack,
    })
}

/// `max_n (⟨λ_n²⟩ / ⟨[λ_n²]⟩)^{γ/2}`: the norm of `⟨A⟩^{-γ/2}⟨H⟩^{γ/2}` on the span.
pub fn weight_ratio_bound(eig: &EigenSystem, gamma: f64) -> f64 {
    eig.lambdas_sq()
        .iter()
        .map(|&l| (japanese_bracket(l) / japanese_bracket(entire_part(l))).powf(gamma / 2.0))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct QuadratureCheck {
    pub label: String,
    pub closed_form: f64,
    pub quadrature: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FormDiagnostics {
    pub dim: usize,
    pub hermitian_defect: f64,
    pub min_diagonal: f64,
    pub max_diagonal: f64,
    pub trace: f64,
}

impl FormDiagnostics {
    pub fn of(form: &SmoothingForm) -> Self {
        let n = form.dim();
        let diag: Vec<f64> = (0..n).map(|a| form.matrix()[a * n + a].re).collect();
        Self {
            dim: n,
            hermitian_defect: form.hermitian_defect(),
            min_diagonal: diag.iter().cloned().fold(f64::INFINITY, f64::min),
            max_diagonal: diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            trace: diag.iter().sum(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationRow {
    pub count: usize,
    pub c1: f64,
}

/// Summary of one smoothing experiment.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothingReport {
    pub gamma: f64,
    pub dynamics: Dynamics,
    pub weights: WeightMode,
    pub truncation: usize,
    pub c1: f64,
    pub power_iterations: usize,
    pub maximizer_abs: Vec<f64>,
    pub truncation_table: Vec<TruncationRow>,
    pub checks: Vec<QuadratureCheck>,
    pub diagnostics: FormDiagnostics,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_integral_values() {
        assert_eq!(time_integral(0.0), Complex64::new(2.0 * PI, 0.0));
        assert_eq!(time_integral(1.0), Complex64::new(0.0, 0.0));
        assert_eq!(time_integral(-3.0), Complex64::new(0.0, 0.0));
        let half = time_integral(0.5);
        assert!((half - Complex64::new(0.0, -4.0)).norm() < 1e-14);
    }

    #[test]
    fn time_integral_taylor_branch_is_continuous() {
        for &mu in &[1e-7, -3e-7, 9.99e-7] {
            let direct = (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -2.0 * PI * mu)) / Complex64::new(0.0, mu);
            assert!((time_integral(mu) - direct).norm() < 1e-8);
        }
        let below = time_integral(TAYLOR_THRESHOLD * 0.999_999);
        let above = time_integral(TAYLOR_THRESHOLD * 1.000_001);
        assert!((below - above).norm() < 1e-9);
    }

    #[test]
    fn time_integral_matches_fine_quadrature() {
        for &mu in &[0.5, 1.3, -2.7, 0.01] {
            let re = crate::quadrature::trapezoid(|t| (t * mu).cos(), 0.0, 2.0 * PI, 200_000);
            let im = crate::quadrature::trapezoid(|t| -(t * mu).sin(), 0.0, 2.0 * PI, 200_000);
            assert!((time_integral(mu) - Complex64::new(re, im)).norm() < 1e-8);
        }
    }
}
