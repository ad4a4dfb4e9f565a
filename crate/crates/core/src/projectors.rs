//! Unit spectral windows `P_N = 1_[N,N+1)(H)`, the entire-part operator
//! `A = [H]`, weighted eigenfunction decay and spectral gaps.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::CoefficientVector;
use crate::error::{invalid, Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::tridiag::EigenSystem;

/// Eigenvalues closer than this (relative to `max(1, λ²)`) to an integer get
/// a boundary-proximity warning when binned.
pub const BOUNDARY_WARN_REL: f64 = 1e-5;

/// `N ↦ {n : N ≤ λ_n² < N + 1}` for the computed modes (0-based mode indices).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectorIndex {
    bins: BTreeMap<u64, Vec<usize>>,
    bin_of: Vec<u64>,
    boundary_warnings: Vec<usize>,
}

impl ProjectorIndex {
    pub fn bins(&self) -> &BTreeMap<u64, Vec<usize>> {
        &self.bins
    }

    pub fn bin(&self, n_bin: u64) -> &[usize] {
        self.bins.get(&n_bin).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The label `N = [λ_n²]` of mode `n`.
    pub fn bin_of(&self, mode: usize) -> u64 {
        self.bin_of[mode]
    }

    pub fn max_bin(&self) -> Option<u64> {
        self.bins.keys().next_back().copied()
    }

    pub fn mode_count(&self) -> usize {
        self.bin_of.len()
    }

    /// Modes whose eigenvalue sits within [`BOUNDARY_WARN_REL`] of an integer.
    pub fn boundary_warnings(&self) -> &[usize] {
        &self.boundary_warnings
    }
}

/// Integer part used by `A = [H]`.
#[inline]
pub fn entire_part(lambda_sq: f64) -> f64 {
    lambda_sq.floor()
}

pub fn bin_spectrum(eig: &EigenSystem) -> Result<ProjectorIndex> {
    bin_values(eig.lambdas_sq())
}

pub(crate) fn bin_values(lambdas_sq: &[f64]) -> Result<ProjectorIndex> {
    let mut bins: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    let mut bin_of = Vec::with_capacity(lambdas_sq.len());
    let mut boundary_warnings = Vec::new();
    for (n, &l) in lambdas_sq.iter().enumerate() {
        if !l.is_finite() {
            return Err(Error::InvalidState(format!("eigenvalue {n} is not finite")));
        }
        if l < 0.0 {
            return Err(Error::InvalidState(format!(
                "eigenvalue {n} is negative ({l}); H >= 0 is required"
            )));
        }
        let label = entire_part(l) as u64;
        let dist = (l - l.round()).abs();
        if dist <= BOUNDARY_WARN_REL * l.max(1.0) {
            boundary_warnings.push(n);
        }
        bins.entry(label).or_default().push(n);
        bin_of.push(label);
    }
    Ok(ProjectorIndex {
        bins,
        bin_of,
        boundary_warnings,
    })
}

/// `P_N f`: keeps only the coefficients of modes in window `N`.
pub fn apply_projector(index: &ProjectorIndex, f: &CoefficientVector, n_bin: u64) -> Result<CoefficientVector> {
    if f.len() != index.mode_count() {
        return invalid(format!(
            "coefficient vector has {} entries, index covers {} modes",
            f.len(),
            index.mode_count()
        ));
    }
    let mut out = CoefficientVector::zeros(f.len());
    for &n in index.bin(n_bin) {
        out.as_mut_slice()[n] = f.as_slice()[n];
    }
    Ok(out)
}

/// `max_n (λ_n² - [λ_n²])`, which is `‖H - A‖` on the computed span.
pub fn entire_part_deviation(eig: &EigenSystem) -> f64 {
    eig.lambdas_sq()
        .iter()
        .map(|&l| l - entire_part(l))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeNorm {
    /// 0-based mode index.
    pub mode: usize,
    pub lambda: f64,
    /// `‖Ψφ_n‖`.
    pub weighted_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BinNorm {
    pub n_bin: u64,
    pub modes: Vec<usize>,
    /// `‖ΨP_N‖` restricted to the computed modes in the window.
    pub op_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    /// Fitted exponent `γ̂` in `‖Ψφ_n‖ ≈ C λ_n^{-γ}`.
    pub gamma: f64,
    /// `sup ‖Ψφ_n‖ λ_n^{γ̂}` over the fit range.
    pub c2: f64,
    /// `exp` of the regression intercept.
    pub intercept: f64,
    /// RMS residual of the log-log regression.
    pub residual: f64,
    /// 1-based inclusive mode range.
    pub n_lo: usize,
    pub n_hi: usize,
    pub points_used: usize,
    pub zero_norms_excluded: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapRecord {
    /// 1-based index `n` of the lower mode.
    pub n: usize,
    /// `λ_{n+1}² - λ_n²`.
    pub gap: f64,
    /// `gap / λ_n^{1 - 2/m}`.
    pub ratio: f64,
    /// `[λ_n²] < [λ_{n+1}²]`.
    pub distinct_bins: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapProfile {
    pub m: f64,
    pub records: Vec<GapRecord>,
    pub inf_ratio: Option<f64>,
    /// Smallest 1-based `n` such that every computed mode `≥ n` sits alone in
    /// its window.
    pub singleton_from: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub modes: Vec<ModeNorm>,
    pub bins: Vec<BinNorm>,
    pub fit: Option<DecayFit>,
    pub gaps: Option<GapProfile>,
    pub warnings: Vec<String>,
}

fn weighted_product(eig: &EigenSystem, psi_sq: &[f64], m: usize, n: usize) -> f64 {
    let a = eig.vector(m);
    let b = eig.vector(n);
    let s: f64 = psi_sq.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum();
    eig.grid().spacing() * s
}

/// `‖Ψφ_n‖` per mode and `‖ΨP_N‖` per window.
pub fn weighted_decay(eig: &EigenSystem, psi: &[f64], index: &ProjectorIndex) -> Result<DecayReport> {
    if psi.len() != eig.grid().len() {
        return invalid(format!(
            "weight has {} samples, grid has {} points",
            psi.len(),
            eig.grid().len()
        ));
    }
    if index.mode_count() != eig.count() {
        return invalid("projector index does not match the eigensystem");
    }
    let psi_sq: Vec<f64> = psi.iter().map(|p| p * p).collect();
    let diag: Vec<f64> = (0..eig.count())
        .into_par_iter()
        .map(|n| weighted_product(eig, &psi_sq, n, n))
        .collect();
    let modes = diag
        .iter()
        .enumerate()
        .map(|(n, &g)| ModeNorm {
            mode: n,
            lambda: eig.lambda(n),
            weighted_norm: g.max(0.0).sqrt(),
        })
        .collect::<Vec<_>>();
    let bins = index
        .bins()
        .iter()
        .map(|(&n_bin, members)| {
            let op_norm = if members.len() == 1 {
                modes[members[0]].weighted_norm
            } else {
                let k = members.len();
                let mut block = vec![0.0; k * k];
                for (i, &a) in members.iter().enumerate() {
                    block[i * k + i] = diag[a];
                    for (j, &b) in members.iter().enumerate().take(i) {
                        let g = weighted_product(eig, &psi_sq, a, b);
                        block[i * k + j] = g;
                        block[j * k + i] = g;
                    }
                }
                let top = *symmetric_eigenvalues(&block, k).last().expect("non-empty block");
                top.max(0.0).sqrt()
            };
            BinNorm {
                n_bin,
                modes: members.clone(),
                op_norm,
            }
        })
        .collect();
    let warnings = index
        .boundary_warnings()
        .iter()
        .map(|&n| {
            format!(
                "mode {} has lambda^2 = {:.17e} within {BOUNDARY_WARN_REL:e} of an integer window boundary",
                n + 1,
                eig.lambdas_sq()[n]
            )
        })
        .collect();
    Ok(DecayReport {
        modes,
        bins,
        fit: None,
        gaps: None,
        warnings,
    })
}

/// Default fit window: drop the lowest quartile of computed modes.
pub fn default_fit_range(count: usize) -> (usize, usize) {
    (count / 4 + 1, count)
}

/// Least-squares fit of `log ‖Ψφ_n‖` against `log λ_n` over the 1-based
/// inclusive range `[n_lo, n_hi]`.
pub fn fit_decay_exponent(report: &DecayReport, n_lo: usize, n_hi: usize) -> Result<DecayFit> {
    if n_lo == 0 || n_hi > report.modes.len() || n_hi < n_lo + 10 {
        return invalid(format!(
            "fit range [{n_lo}, {n_hi}] must satisfy 1 <= n_lo, n_hi - n_lo >= 10, n_hi <= {}",
            report.modes.len()
        ));
    }
    let range = &report.modes[n_lo - 1..n_hi];
    let mut excluded = 0;
    let mut pts = Vec::with_capacity(range.len());
    for m in range {
        if m.weighted_norm > 0.0 && m.lambda > 0.0 {
            pts.push((m.lambda.ln(), m.weighted_norm.ln()));
        } else {
            excluded += 1;
        }
    }
    if pts.len() < 2 {
        return invalid(format!("only {} nonzero norms in the fit range", pts.len()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return invalid("all eigenvalues in the fit range coincide");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / k).sqrt();
    let gamma = -slope;
    let c2 = range
        .iter()
        .filter(|m| m.weighted_norm > 0.0 && m.lambda > 0.0)
        .map(|m| m.weighted_norm * m.lambda.powf(gamma))
        .fold(0.0, f64::max);
    Ok(DecayFit {
        gamma,
        c2,
        intercept: intercept.exp(),
        residual,
        n_lo,
        n_hi,
        points_used: pts.len(),
        zero_norms_excluded: excluded,
    })
}

/// Consecutive gaps `λ_{n+1}² - λ_n²` against `λ_n^{1 - 2/m}`.
pub fn gap_profile(eig: &EigenSystem, m: f64) -> GapProfile {
    gap_profile_values(eig.lambdas_sq(), m)
}

pub(crate) fn gap_profile_values(lambdas_sq: &[f64], m: f64) -> GapProfile {
    let exponent = 1.0 - 2.0 / m;
    let records: Vec<GapRecord> = lambdas_sq
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let gap = w[1] - w[0];
            let lambda = w[0].max(0.0).sqrt();
            GapRecord {
                n: i + 1,
                gap,
                ratio: gap / lambda.powf(exponent),
                distinct_bins: entire_part(w[0]) < entire_part(w[1]),
            }
        })
        .collect();
    let inf_ratio = records.iter().map(|r| r.ratio).reduce(f64::min);
    let last_shared = records.iter().rposition(|r| !r.distinct_bins);
    let singleton_from = match last_shared {
        None if lambdas_sq.is_empty() => None,
        None => Some(1),
        // record i covers modes i+1 and i+2 (1-based)
        Some(i) if i + 3 <= lambdas_sq.len() => Some(i + 3),
        Some(_) => None,
    };
    GapProfile {
        m,
        records,
        inf_ratio,
        singleton_from,
    }
}

/// `Σ_N ‖P_N f‖²` computed window by window.
pub fn projected_norm_sqr(index: &ProjectorIndex, f: &CoefficientVector) -> f64 {
    index
        .bins()
        .values()
        .map(|members| members.iter().map(|&n| f.as_slice()[n].norm_sqr()).sum::<f64>())
        .sum()
}

/// Grid samples of `ΨP_N f`.
pub(crate) fn weighted_window_samples(
    eig: &EigenSystem,
    psi: &[f64],
    members: &[usize],
    f: &CoefficientVector,
) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
    for &n in members {
        let c = f.as_slice()[n];
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        out.iter_mut().zip(eig.vector(n)).for_each(|(o, p)| *o += c * p);
    }
    out.iter_mut().zip(psi).for_each(|(o, w)| *o *= w);
    out
}
