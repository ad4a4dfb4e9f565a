//! Grids, potentials, weights and the three-point finite-difference
//! Hamiltonian `H = -d²/dx² + V` on a truncated interval with Dirichlet ends.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::japanese_bracket;

/// Uniform interior grid on `(-L, L)`: `x_i = -L + i·h`, `i = 1..=n`,
/// `h = 2L / (n + 1)`. The endpoints carry the Dirichlet condition and are
/// not stored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    half_width: f64,
    spacing: f64,
    points: Vec<f64>,
}

impl Grid {
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Discrete inner product `h·Σ f_i g_i`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.spacing * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    pub(crate) fn same_as(&self, other: &Grid) -> bool {
        self.len() == other.len() && self.spacing == other.spacing && self.half_width == other.half_width
    }
}

pub fn build_grid(half_width: f64, n_points: usize) -> Result<Grid> {
    if !(half_width.is_finite() && half_width > 0.0) {
        return invalid(format!("half width must be positive and finite, got {half_width}"));
    }
    if n_points < 3 {
        return invalid(format!("need at least 3 grid points, got {n_points}"));
    }
    let spacing = 2.0 * half_width / (n_points as f64 + 1.0);
    let points = (1..=n_points).map(|i| -half_width + i as f64 * spacing).collect();
    Ok(Grid {
        half_width,
        spacing,
        points,
    })
}

/// Grid with the interior point count chosen so that `2L/h` is the nearest
/// integer to the requested ratio.
pub fn build_grid_with_spacing(half_width: f64, spacing: f64) -> Result<Grid> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return invalid(format!("spacing must be positive and finite, got {spacing}"));
    }
    if !(half_width.is_finite() && half_width > 0.0) {
        return invalid(format!("half width must be positive and finite, got {half_width}"));
    }
    let intervals = (2.0 * half_width / spacing).round();
    if intervals < 4.0 {
        return invalid(format!("spacing {spacing} too coarse for half width {half_width}"));
    }
    build_grid(half_width, intervals as usize - 1)
}

/// Confining potential.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    /// `V = 0`: the Dirichlet box.
    Zero,
    /// `V(x) = x²`.
    Harmonic,
    /// `V(x) = ⟨x⟩^k = (1 + x²)^{k/2}`.
    BracketPower { k: f64 },
    /// One nonnegative value per grid point, with the declared growth exponent.
    CustomSamples { samples: Vec<f64>, growth: f64 },
}

impl PotentialSpec {
    pub fn growth_exponent(&self) -> f64 {
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Harmonic => 2.0,
            PotentialSpec::BracketPower { k } => *k,
            PotentialSpec::CustomSamples { growth, .. } => *growth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialSpec::BracketPower { k } if !(k.is_finite() && *k > 0.0) => {
                invalid(format!("bracket_power exponent must be positive, got {k}"))
            }
            PotentialSpec::CustomSamples { samples, growth } => {
                if let Some(v) = samples.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return invalid(format!("custom potential samples must be finite and >= 0, found {v}"));
                }
                if !(growth.is_finite() && *growth > 0.0) {
                    return invalid(format!("custom potential growth exponent must be positive, got {growth}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Analytic `(V, V', V'')` at `x`, or `None` for sampled potentials.
    pub fn analytic(&self, x: f64) -> Option<(f64, f64, f64)> {
        match self {
            PotentialSpec::Zero => Some((0.0, 0.0, 0.0)),
            PotentialSpec::Harmonic => Some((x * x, 2.0 * x, 2.0)),
            PotentialSpec::BracketPower { k } => {
                let s = 1.0 + x * x;
                let v = s.powf(k / 2.0);
                let dv = k * x * s.powf(k / 2.0 - 1.0);
                let d2v = k * s.powf(k / 2.0 - 2.0) * (1.0 + (k - 1.0) * x * x);
                Some((v, dv, d2v))
            }
            PotentialSpec::CustomSamples { .. } => None,
        }
    }
}

pub fn sample_potential(spec: &PotentialSpec, grid: &Grid) -> Result<Vec<f64>> {
    spec.validate()?;
    match spec {
        PotentialSpec::CustomSamples { samples, .. } => {
            if samples.len() != grid.len() {
                return invalid(format!(
                    "custom potential has {} samples but the grid has {} points",
                    samples.len(),
                    grid.len()
                ));
            }
            Ok(samples.clone())
        }
        _ => Ok(grid
            .points()
            .iter()
            .map(|&x| spec.analytic(x).map(|(v, _, _)| v).unwrap_or(0.0))
            .collect()),
    }
}

/// Weight function `Ψ`.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    ConstantOne,
    /// `1` on the closed interval `[a, b]`, `0` elsewhere.
    Indicator { a: f64, b: f64 },
    /// `⟨x⟩^{-(1/2 + ν)}`.
    InversePower { nu: f64 },
    /// `exp(-x² / (2w²))`.
    Gaussian { width: f64 },
    CustomSamples(Vec<f64>),
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            WeightSpec::Indicator { a, b } if !(a.is_finite() && b.is_finite() && a < b) => {
                invalid(format!("indicator needs finite a < b, got [{a}, {b}]"))
            }
            WeightSpec::InversePower { nu } if !(nu.is_finite() && *nu > 0.0) => {
                invalid(format!("inverse_power needs nu > 0, got {nu}"))
            }
            WeightSpec::Gaussian { width } if !(width.is_finite() && *width > 0.0) => {
                invalid(format!("gaussian needs width > 0, got {width}"))
            }
            WeightSpec::CustomSamples(s) if s.iter().any(|v| !v.is_finite()) => {
                invalid("custom weight samples must be finite")
            }
            _ => Ok(()),
        }
    }

    /// Value at `x`; `None` for sampled weights.
    pub fn eval(&self, x: f64) -> Option<f64> {
        match self {
            WeightSpec::ConstantOne => Some(1.0),
            WeightSpec::Indicator { a, b } => Some(if *a <= x && x <= *b { 1.0 } else { 0.0 }),
            WeightSpec::InversePower { nu } => Some(japanese_bracket(x).powf(-(0.5 + nu))),
            WeightSpec::Gaussian { width } => Some((-x * x / (2.0 * width * width)).exp()),
            WeightSpec::CustomSamples(_) => None,
        }
    }
}

pub fn sample_weight(spec: &WeightSpec, grid: &Grid) -> Result<Vec<f64>> {
    spec.validate()?;
    match spec {
        WeightSpec::CustomSamples(s) => {
            if s.len() != grid.len() {
                return invalid(format!(
                    "custom weight has {} samples but the grid has {} points",
                    s.len(),
                    grid.len()
                ));
            }
            Ok(s.clone())
        }
        _ => Ok(grid.points().iter().map(|&x| spec.eval(x).unwrap_or(0.0)).collect()),
    }
}

/// Numerical check of the growth and convexity hypotheses on `V` over the
/// region `|x| ≥ x0`. Each condition is reported separately.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub x0: f64,
    pub growth_exponent: f64,
    pub convexity_exponent: f64,
    /// `inf x V'(x) / V(x)`.
    pub inf_virial_ratio: f64,
    /// `min V''(x)`.
    pub min_second_derivative: f64,
    /// Range of `V(x) / ⟨x⟩^k`.
    pub sandwich_min: f64,
    pub sandwich_max: f64,
    /// `sup |V^{(j)}(x)| / ⟨x⟩^{k-j}` for `j = 1, 2`.
    pub derivative_bounds: [f64; 2],
    pub points_checked: usize,
    pub sandwich_ok: bool,
    pub convexity_ok: bool,
    pub derivative_bounds_ok: bool,
    /// `inf xV'/V ≥ m` and `min V'' > 0`.
    pub pass: bool,
}

/// Checks the hypotheses on `V` for convexity exponent `m` over `|x| ≥ x0`.
///
/// Analytic derivatives are used for the closed-form kinds; sampled potentials
/// fall back on central differences at grid resolution.
pub fn check_assumption(spec: &PotentialSpec, m: f64, x0: f64, grid: &Grid) -> Result<AssumptionReport> {
    spec.validate()?;
    if !(m.is_finite() && m > 0.0) {
        return invalid(format!("convexity exponent must be positive, got {m}"));
    }
    let last = *grid.points().last().expect("grid has at least 3 points");
    if !(x0.is_finite() && x0 > 0.0 && x0 <= last) {
        return invalid(format!("x0 = {x0} must lie in (0, {last}]"));
    }
    let k = spec.growth_exponent();
    let samples = sample_potential(spec, grid)?;
    let h = grid.spacing();
    let xs = grid.points();

    let mut inf_ratio = f64::INFINITY;
    let mut min_d2 = f64::INFINITY;
    let mut sandwich_min = f64::INFINITY;
    let mut sandwich_max = 0.0_f64;
    let mut bounds = [0.0_f64; 2];
    let mut checked = 0;
    for i in 0..xs.len() {
        let x = xs[i];
        if x.abs() < x0 {
            continue;
        }
        let (v, dv, d2v) = match spec.analytic(x) {
            Some(t) => t,
            None => {
                if i == 0 || i + 1 == xs.len() {
                    continue;
                }
                let dv = (samples[i + 1] - samples[i - 1]) / (2.0 * h);
                let d2v = (samples[i + 1] - 2.0 * samples[i] + samples[i - 1]) / (h * h);
                (samples[i], dv, d2v)
            }
        };
        checked += 1;
        let bracket = japanese_bracket(x);
        inf_ratio = inf_ratio.min(if v > 0.0 { x * dv / v } else { f64::NEG_INFINITY });
        min_d2 = min_d2.min(d2v);
        let s = v / bracket.powf(k);
        sandwich_min = sandwich_min.min(s);
        sandwich_max = sandwich_max.max(s);
        bounds[0] = bounds[0].max(dv.abs() / bracket.powf(k - 1.0));
        bounds[1] = bounds[1].max(d2v.abs() / bracket.powf(k - 2.0));
    }
    if checked == 0 {
        return invalid(format!("no grid points with |x| >= {x0}"));
    }
    let sandwich_ok = sandwich_min > 0.0 && sandwich_max.is_finite();
    let convexity_ok = min_d2 > 0.0;
    let derivative_bounds_ok = bounds.iter().all(|b| b.is_finite());
    Ok(AssumptionReport {
        x0,
        growth_exponent: k,
        convexity_exponent: m,
        inf_virial_ratio: inf_ratio,
        min_second_derivative: min_d2,
        sandwich_min,
        sandwich_max,
        derivative_bounds: bounds,
        points_checked: checked,
        sandwich_ok,
        convexity_ok,
        derivative_bounds_ok,
        pass: inf_ratio >= m && convexity_ok,
    })
}

/// Symmetric tridiagonal discretisation of `-d²/dx² + V` with Dirichlet ends:
/// diagonal `2/h² + V(x_i)`, constant off-diagonal `-1/h²`.
#[derive(Debug, Clone)]
pub struct TridiagonalHamiltonian {
    diagonal: Vec<f64>,
    off_diagonal: f64,
    grid: Grid,
}

impl TridiagonalHamiltonian {
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn off_diagonal(&self) -> f64 {
        self.off_diagonal
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let e = self.off_diagonal;
        (0..n)
            .map(|i| {
                let mut y = self.diagonal[i] * v[i];
                if i > 0 {
                    y += e * v[i - 1];
                }
                if i + 1 < n {
                    y += e * v[i + 1];
                }
                y
            })
            .collect()
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum.
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let n = self.dim();
        let e = self.off_diagonal.abs();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, &d) in self.diagonal.iter().enumerate() {
            let r = e * ((i > 0) as u8 + (i + 1 < n) as u8) as f64;
            lo = lo.min(d - r);
            hi = hi.max(d + r);
        }
        (lo, hi)
    }

    /// Upper bound on the operator norm.
    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin_bounds();
        lo.abs().max(hi.abs())
    }
}

pub fn assemble_hamiltonian(spec: &PotentialSpec, grid: &Grid) -> Result<TridiagonalHamiltonian> {
    let v = sample_potential(spec, grid)?;
    let h2 = grid.spacing() * grid.spacing();
    Ok(TridiagonalHamiltonian {
        diagonal: v.iter().map(|vi| 2.0 / h2 + vi).collect(),
        off_diagonal: -1.0 / h2,
        grid: grid.clone(),
    })
}

/// Warns when the truncation is too tight for the requested energy: the
/// eigenfunctions up to `lambda_sq_max` are only negligible at the boundary
/// when `V(±L) ≥ 4·lambda_sq_max`.
pub fn truncation_warning(spec: &PotentialSpec, grid: &Grid, lambda_sq_max: f64) -> Option<String> {
    let edge = match spec {
        // the walls are the physical boundary
        PotentialSpec::Zero => return None,
        PotentialSpec::CustomSamples { samples, .. } => {
            samples.first().copied().unwrap_or(0.0).min(samples.last().copied().unwrap_or(0.0))
        }
        _ => {
            let l = grid.half_width();
            let (a, _, _) = spec.analytic(l)?;
            let (b, _, _) = spec.analytic(-l)?;
            a.min(b)
        }
    };
    (edge < 4.0 * lambda_sq_max).then(|| {
        format!(
            "V(±L) = {edge:.6e} is below 4 x the largest requested eigenvalue {lambda_sq_max:.6e}; \
             boundary truncation may affect the upper modes"
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_small() {
        let g = build_grid(1.0, 3).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.points(), &[-0.5, 0.0, 0.5]);
    }

    #[test]
    fn grid_desk_scale_spacing() {
        let g = build_grid(12.0, 2399).unwrap();
        assert!((g.spacing() - 0.01).abs() < 1e-15);
        let g2 = build_grid_with_spacing(12.0, 0.01).unwrap();
        assert_eq!(g2.len(), 2399);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(build_grid(0.0, 10), Err(crate::Error::InvalidArgument(_))));
        assert!(build_grid(1.0, 2).is_err());
        assert!(build_grid(f64::NAN, 10).is_err());
    }

    #[test]
    fn grid_is_symmetric_for_odd_counts() {
        let g = build_grid(3.0, 101).unwrap();
        let p = g.points();
        for i in 0..p.len() {
            assert!((p[i] + p[p.len() - 1 - i]).abs() < 1e-13);
        }
        assert!(p.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn potential_samples() {
        let g = build_grid(4.0, 7).unwrap(); // h = 1, points -3..=3
        let harm = sample_potential(&PotentialSpec::Harmonic, &g).unwrap();
        assert_eq!(harm[5], 4.0);
        let quartic = sample_potential(&PotentialSpec::BracketPower { k: 4.0 }, &g).unwrap();
        assert!((quartic[3] - 1.0).abs() < 1e-15);
        assert!((quartic[6] - 100.0).abs() < 1e-12);
        let bad = PotentialSpec::CustomSamples {
            samples: vec![0.0; 3],
            growth: 2.0,
        };
        assert!(sample_potential(&bad, &g).is_err());
    }

    #[test]
    fn weight_samples() {
        let g = build_grid(4.0, 7).unwrap();
        assert!(sample_weight(&WeightSpec::ConstantOne, &g).unwrap().iter().all(|&v| v == 1.0));
        let ind = sample_weight(&WeightSpec::Indicator { a: -1.0, b: 1.0 }, &g).unwrap();
        assert_eq!(ind, vec![0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        let ip = sample_weight(&WeightSpec::InversePower { nu: 0.5 }, &g).unwrap();
        assert_eq!(ip[3], 1.0);
        assert!(sample_weight(&WeightSpec::Indicator { a: 1.0, b: -1.0 }, &g).is_err());
    }

    #[test]
    fn assumption_quartic() {
        let g = build_grid(10.0, 1999).unwrap();
        let spec = PotentialSpec::BracketPower { k: 4.0 };
        let r = check_assumption(&spec, 3.0, 3.0, &g).unwrap();
        // xV'/V = 4x²/(1+x²) is minimal at the smallest |x| ≥ 3 on the grid.
        assert!((r.inf_virial_ratio - 3.6).abs() < 1e-12, "{}", r.inf_virial_ratio);
        assert!(r.pass);
        assert!(!check_assumption(&spec, 3.7, 3.0, &g).unwrap().pass);
        assert!(r.sandwich_ok && r.convexity_ok && r.derivative_bounds_ok);
        assert!(check_assumption(&spec, 3.0, 20.0, &g).is_err());
    }

    #[test]
    fn assumption_harmonic_fails_above_two() {
        let g = build_grid(10.0, 999).unwrap();
        let r = check_assumption(&PotentialSpec::Harmonic, 2.0, 1.0, &g).unwrap();
        assert!((r.inf_virial_ratio - 2.0).abs() < 1e-12);
        assert!(r.pass);
        assert!(!check_assumption(&PotentialSpec::Harmonic, 2.01, 1.0, &g).unwrap().pass);
    }

    #[test]
    fn assumption_ratio_increases_with_x0() {
        let g = build_grid(40.0, 7999).unwrap();
        let spec = PotentialSpec::BracketPower { k: 4.0 };
        let ratios: Vec<f64> = [1.0, 2.0, 5.0, 10.0, 30.0]
            .iter()
            .map(|&x0| check_assumption(&spec, 3.0, x0, &g).unwrap().inf_virial_ratio)
            .collect();
        assert!(ratios.windows(2).all(|w| w[0] <= w[1]));
        assert!((4.0 - ratios[4]).abs() < 5e-3);
    }

    #[test]
    fn assumption_custom_uses_central_differences() {
        let g = build_grid(10.0, 1999).unwrap();
        let samples = sample_potential(&PotentialSpec::BracketPower { k: 4.0 }, &g).unwrap();
        let custom = PotentialSpec::CustomSamples { samples, growth: 4.0 };
        let r = check_assumption(&custom, 3.0, 3.0, &g).unwrap();
        assert!((r.inf_virial_ratio - 3.6).abs() < 1e-4);
        assert!(r.pass);
    }

    #[test]
    fn hamiltonian_entries() {
        let g = build_grid(1.0, 3).unwrap();
        let h = assemble_hamiltonian(&PotentialSpec::Harmonic, &g).unwrap();
        assert_eq!(h.diagonal()[1], 8.0);
        assert_eq!(h.off_diagonal(), -4.0);
    }

    #[test]
    fn gershgorin_lower_bound_is_min_potential() {
        let g = build_grid(5.0, 200).unwrap();
        let h = assemble_hamiltonian(&PotentialSpec::BracketPower { k: 3.0 }, &g).unwrap();
        let v = sample_potential(&PotentialSpec::BracketPower { k: 3.0 }, &g).unwrap();
        let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let (lo, _) = h.gershgorin_bounds();
        assert!(lo >= vmin - 1e-9 && lo >= 0.0);
    }

    #[test]
    fn truncation_rule() {
        let g = build_grid(12.0, 2399).unwrap();
        assert!(truncation_warning(&PotentialSpec::Harmonic, &g, 30.0).is_none());
        assert!(truncation_warning(&PotentialSpec::Harmonic, &g, 59.0).is_some());
    }
}
