//! The free Laplacian on the line: the kernel of the unit spectral window
//! `1_[N,N+1)(-Δ)`, the `TT*` kernel of `N^{1/4} Ψ 1_[N,N+1)(-Δ)`, and the
//! exponent `θ(q, k)`.
//!
//! With `C_N = (√(N+1) - √N)/2` and `D_N = (√(N+1) + √N)/2`, the window kernel
//! `F_N(u) = (2π)^{-1} ∫ e^{iuξ} 1_[√N, √(N+1))(|ξ|) dξ` evaluates to
//! `(2/π)·cos(D_N u)·sin(C_N u)/u`. The band indicator is idempotent, so
//! `F_N * F_N = F_N` and the `TT*` kernel is `√N·Ψ(x)Ψ(z)·F_N(x - z)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::operator::Grid;
use crate::quadrature::{composite_gauss, gauss_legendre};

const GAUSS_NODES: usize = 10;
const QUADRATURE_TOL: f64 = 1e-13;
const MAX_REFINEMENTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandParams {
    pub n: u64,
    /// Half-width of the band in `|ξ|`.
    pub c: f64,
    /// Centre of the band in `|ξ|`.
    pub d: f64,
}

pub fn band_params(n: u64) -> Result<BandParams> {
    if n < 1 {
        return invalid("band index N must be >= 1");
    }
    let lo = (n as f64).sqrt();
    let hi = (n as f64 + 1.0).sqrt();
    let d = 0.5 * (hi + lo);
    // C_N = (hi - lo)/2 = 1/(4 D_N), without the cancellation
    let c = 0.25 / d;
    Ok(BandParams { n, c, d })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethod {
    ClosedForm,
    Quadrature,
}

/// `F_N(u)`.
pub fn kernel_f(n: u64, u: f64, method: KernelMethod) -> Result<f64> {
    if !u.is_finite() {
        return invalid(format!("u must be finite, got {u}"));
    }
    let p = band_params(n)?;
    match method {
        KernelMethod::ClosedForm => Ok(closed_form(&p, u)),
        KernelMethod::Quadrature => quadrature(&p, u),
    }
}

fn closed_form(p: &BandParams, u: f64) -> f64 {
    if u == 0.0 {
        2.0 / PI * p.c
    } else {
        2.0 / PI * (p.d * u).cos() * (p.c * u).sin() / u
    }
}

/// Integrates `(2π)^{-1} e^{iuξ}` over both halves of the band with composite
/// Gauss–Legendre panels no wider than `π/(4 max(D_N, |u|))`.
fn quadrature(p: &BandParams, u: f64) -> Result<f64> {
    let rule = gauss_legendre(GAUSS_NODES);
    let lo = (p.n as f64).sqrt();
    let hi = (p.n as f64 + 1.0).sqrt();
    let max_width = PI / (4.0 * p.d.max(u.abs()));
    let mut panels = ((hi - lo) / max_width).ceil().max(1.0) as usize;
    let eval = |panels: usize| {
        let re = composite_gauss(|xi| (u * xi).cos(), lo, hi, panels, &rule)
            + composite_gauss(|xi| (u * xi).cos(), -hi, -lo, panels, &rule);
        let im = composite_gauss(|xi| (u * xi).sin(), lo, hi, panels, &rule)
            + composite_gauss(|xi| (u * xi).sin(), -hi, -lo, panels, &rule);
        (re / (2.0 * PI), im / (2.0 * PI))
    };
    let mut prev = eval(panels);
    for _ in 0..MAX_REFINEMENTS {
        panels *= 2;
        let next = eval(panels);
        if (next.0 - prev.0).abs() <= QUADRATURE_TOL && next.1.abs() <= 1e-12 {
            return Ok(next.0);
        }
        prev = next;
    }
    Err(Error::NumericalFailure {
        index: None,
        message: format!("band quadrature for N = {}, u = {u} did not converge", p.n),
    })
}

/// `Λ(x, z) = √N·Ψ(x)Ψ(z)·F_N(x - z)`, given the weight values at `x` and `z`.
pub fn ttstar_kernel(n: u64, psi_x: f64, psi_z: f64, x: f64, z: f64) -> Result<f64> {
    let f = kernel_f(n, x - z, KernelMethod::ClosedForm)?;
    Ok((n as f64).sqrt() * psi_x * psi_z * f)
}

#[derive(Debug, Clone, Serialize)]
pub struct BandBound {
    pub n: u64,
    /// `sup |Λ(x,z)| / (|Ψ(x)||Ψ(z)|)` over the support.
    pub sup: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformBound {
    pub per_band: Vec<BandBound>,
    pub sup: f64,
    /// `(max - min) / max` of the per-band suprema.
    pub relative_variation: f64,
    pub support_points: usize,
}

/// Supremum of the normalised `TT*` kernel over pairs of grid points where
/// `Ψ ≠ 0`, for each band in `bands`.
pub fn uniform_bound_check(bands: &[u64], psi: &[f64], grid: &Grid) -> Result<UniformBound> {
    if psi.len() != grid.len() {
        return invalid(format!("weight has {} samples, grid has {} points", psi.len(), grid.len()));
    }
    if bands.is_empty() {
        return invalid("band list is empty");
    }
    let support: Vec<usize> = (0..psi.len()).filter(|&i| psi[i] != 0.0).collect();
    if support.is_empty() {
        return invalid("weight vanishes on the whole grid");
    }
    // the normalised kernel depends on x - z only: collect the offsets present
    let in_support: Vec<bool> = psi.iter().map(|&p| p != 0.0).collect();
    let span = support.last().unwrap() - support.first().unwrap();
    let offsets: Vec<usize> = (0..=span)
        .filter(|&k| support.iter().any(|&i| i + k < psi.len() && in_support[i + k]))
        .collect();
    let h = grid.spacing();
    let mut per_band = Vec::with_capacity(bands.len());
    for &n in bands {
        let p = band_params(n)?;
        let scale = (n as f64).sqrt();
        let sup = offsets
            .iter()
            .map(|&k| (scale * closed_form(&p, k as f64 * h)).abs())
            .fold(0.0, f64::max);
        per_band.push(BandBound { n, sup });
    }
    let max = per_band.iter().map(|b| b.sup).fold(0.0, f64::max);
    let min = per_band.iter().map(|b| b.sup).fold(f64::INFINITY, f64::min);
    Ok(UniformBound {
        per_band,
        sup: max,
        relative_variation: if max > 0.0 { (max - min) / max } else { 0.0 },
        support_points: support.len(),
    })
}

/// The exponent `θ(q, k)`; `q = ∞` is `f64::INFINITY`. `eta` is required
/// (and must be positive) exactly when `q = 4`.
pub fn theta_exponent(q: f64, k: f64, eta: Option<f64>) -> Result<f64> {
    if q.is_nan() || q < 2.0 {
        return invalid(format!("q must lie in [2, inf], got {q}"));
    }
    if !(k.is_finite() && k > 0.0) {
        return invalid(format!("k must be positive, got {k}"));
    }
    Ok(if q < 4.0 {
        2.0 / k * (0.5 - 1.0 / q)
    } else if q == 4.0 {
        match eta {
            Some(e) if e.is_finite() && e > 0.0 => 1.0 / (2.0 * k) - e,
            Some(e) => return invalid(format!("eta must be positive, got {e}")),
            None => return invalid("q = 4 requires eta > 0"),
        }
    } else if q.is_finite() {
        0.5 - 2.0 / 3.0 * (1.0 - 1.0 / q) * (1.0 - 1.0 / k)
    } else {
        (4.0 - k) / (6.0 * k)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_params_values() {
        let p = band_params(1).unwrap();
        assert!((p.c - 0.207_106_781_186_547_5).abs() < 1e-15);
        assert!((p.d - 1.207_106_781_186_547_5).abs() < 1e-15);
        let big = band_params(10_000).unwrap();
        // C_N = (1/(4√N))·(1 - 1/(4N) + O(N^-2))
        assert!(((big.c - 0.0025) / 0.0025).abs() < 3e-5);
        assert!((big.c - 0.0025 * (1.0 - 0.25e-4)).abs() < 1e-10);
        for n in [1u64, 2, 7, 1000, 123_456] {
            let p = band_params(n).unwrap();
            assert!((p.c * p.d - 0.25).abs() < 1e-15);
            assert!(p.c > 0.0 && p.c < p.d);
        }
        assert!(band_params(0).is_err());
    }

    #[test]
    fn kernel_at_origin() {
        let v = kernel_f(1, 0.0, KernelMethod::ClosedForm).unwrap();
        assert!((v - 0.131_848_272).abs() < 1e-9);
        assert!((v - (2f64.sqrt() - 1.0) / PI).abs() < 1e-15);
        let q = kernel_f(1, 0.0, KernelMethod::Quadrature).unwrap();
        assert!((q - v).abs() < 1e-14);
    }

    #[test]
    fn kernel_first_zero() {
        let p = band_params(1).unwrap();
        let u0 = PI / (2.0 * p.d);
        assert!((u0 - 1.3013).abs() < 1e-4);
        let left = kernel_f(1, u0 - 1e-3, KernelMethod::Quadrature).unwrap();
        let right = kernel_f(1, u0 + 1e-3, KernelMethod::Quadrature).unwrap();
        assert!(left > 0.0 && right < 0.0);
    }

    #[test]
    fn ttstar_diagonal_and_symmetry() {
        let lam = ttstar_kernel(100, 2.0, 2.0, 0.3, 0.3).unwrap();
        let p = band_params(100).unwrap();
        assert!((lam - 10.0 * 4.0 * 2.0 / PI * p.c).abs() < 1e-14);
        assert_eq!(ttstar_kernel(5, 0.0, 1.0, 0.1, 0.7).unwrap(), 0.0);
        let a = ttstar_kernel(5, 0.8, 0.3, 0.1, 2.7).unwrap();
        let b = ttstar_kernel(5, 0.3, 0.8, 2.7, 0.1).unwrap();
        assert!((a - b).abs() < 1e-16);
    }

    #[test]
    fn theta_branches() {
        assert_eq!(theta_exponent(2.0, 3.0, None).unwrap(), 0.0);
        assert_eq!(theta_exponent(f64::INFINITY, 4.0, None).unwrap(), 0.0);
        assert!((theta_exponent(6.0, 2.0, None).unwrap() - 2.0 / 9.0).abs() < 1e-15);
        assert!((theta_exponent(4.0, 2.0, Some(0.01)).unwrap() - 0.24).abs() < 1e-15);
        assert!(theta_exponent(1.5, 2.0, None).is_err());
        assert!(theta_exponent(4.0, 2.0, None).is_err());
        assert!(theta_exponent(4.0, 2.0, Some(0.0)).is_err());
        assert!(theta_exponent(3.0, 0.0, None).is_err());
    }

    #[test]
    fn uniform_bound_rejects_empty_support() {
        let g = crate::operator::build_grid(2.0, 21).unwrap();
        assert!(uniform_bound_check(&[1], &[0.0; 21], &g).is_err());
        assert!(uniform_bound_check(&[], &[1.0; 21], &g).is_err());
        assert!(uniform_bound_check(&[0], &[1.0; 21], &g).is_err());
    }
}
