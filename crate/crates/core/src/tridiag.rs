//! Lowest eigenpairs of the symmetric tridiagonal Hamiltonian.
//!
//! Eigenvalues come from bisection on the Sturm sequence count, eigenvectors
//! from inverse iteration on a pivoted LU factorisation of `T - σI`. Only the
//! `count` smallest pairs are computed, which is all the projector binning
//! needs.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::operator::{assemble_hamiltonian, build_grid_with_spacing, Grid, PotentialSpec, TridiagonalHamiltonian};

/// Absolute bisection tolerance on `λ²`.
pub const BISECTION_ABS_TOL: f64 = 1e-12;
/// Relative bisection tolerance on `λ²`.
pub const BISECTION_REL_TOL: f64 = 1e-12;
/// Consecutive eigenvalues closer than this (relative to `max(1, |λ²|)`) are
/// treated as one cluster and explicitly orthogonalised.
pub const CLUSTER_REL_GAP: f64 = 1e-8;
/// Inverse iteration stops once `‖(T - σ)x‖ ≤ RESIDUAL_REL_TOL·‖T‖`.
pub const RESIDUAL_REL_TOL: f64 = 1e-11;

const MAX_INVERSE_ITERATIONS: usize = 8;
const MAX_RESTARTS: u64 = 3;

/// Sorted lowest eigenpairs, orthonormal in the discrete inner product
/// `⟨f, g⟩ = h·Σ f_i g_i`.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    lambdas_sq: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    residuals: Vec<f64>,
    grid: Grid,
}

impl EigenSystem {
    /// Builds an eigensystem from externally supplied data. Vectors must be
    /// sampled on `grid`; eigenvalues must be sorted ascending.
    pub fn from_parts(grid: Grid, lambdas_sq: Vec<f64>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if lambdas_sq.len() != vectors.len() {
            return invalid(format!("{} eigenvalues but {} vectors", lambdas_sq.len(), vectors.len()));
        }
        if vectors.iter().any(|v| v.len() != grid.len()) {
            return invalid("eigenvector length does not match the grid");
        }
        if lambdas_sq.iter().any(|l| !l.is_finite()) {
            return invalid("eigenvalues must be finite");
        }
        if lambdas_sq.windows(2).any(|w| w[0] > w[1]) {
            return invalid("eigenvalues must be sorted ascending");
        }
        let residuals = vec![0.0; lambdas_sq.len()];
        Ok(Self {
            lambdas_sq,
            vectors,
            residuals,
            grid,
        })
    }

    /// Exact harmonic oscillator basis: Hermite functions sampled on `grid`
    /// with eigenvalues `λ_n² = 2n - 1`, `n = 1..=count`.
    ///
    /// The samples are orthonormal in the discrete inner product to roughly
    /// machine precision as long as the grid resolves the oscillations and
    /// covers the classically allowed region.
    pub fn harmonic_exact(grid: &Grid, count: usize) -> Result<Self> {
        if count == 0 || count > grid.len() {
            return invalid(format!("count must be in 1..={}, got {count}", grid.len()));
        }
        let xs = grid.points();
        let mut vectors = vec![vec![0.0; xs.len()]; count];
        let c0 = std::f64::consts::PI.powf(-0.25);
        for (i, &x) in xs.iter().enumerate() {
            let mut prev = 0.0;
            let mut cur = c0 * (-0.5 * x * x).exp();
            vectors[0][i] = cur;
            for (j, v) in vectors.iter_mut().enumerate().skip(1) {
                let jf = j as f64;
                let next = (2.0 / jf).sqrt() * x * cur - ((jf - 1.0) / jf).sqrt() * prev;
                prev = cur;
                cur = next;
                v[i] = cur;
            }
        }
        for v in &mut vectors {
            fix_sign(v);
        }
        let lambdas_sq = (1..=count).map(|n| (2 * n - 1) as f64).collect();
        Ok(Self {
            lambdas_sq,
            vectors,
            residuals: vec![0.0; count],
            grid: grid.clone(),
        })
    }

    pub fn count(&self) -> usize {
        self.lambdas_sq.len()
    }

    /// Eigenvalues `λ_n²`, ascending.
    pub fn lambdas_sq(&self) -> &[f64] {
        &self.lambdas_sq
    }

    /// `λ_n = sqrt(λ_n²)`.
    pub fn lambda(&self, n: usize) -> f64 {
        self.lambdas_sq[n].max(0.0).sqrt()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn vector(&self, n: usize) -> &[f64] {
        &self.vectors[n]
    }

    /// Per-pair residual `‖Hφ_n - λ_n²φ_n‖` recorded at solve time.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Keeps only the lowest `count` pairs.
    pub fn truncate(&self, count: usize) -> Self {
        let k = count.min(self.count());
        Self {
            lambdas_sq: self.lambdas_sq[..k].to_vec(),
            vectors: self.vectors[..k].to_vec(),
            residuals: self.residuals[..k].to_vec(),
            grid: self.grid.clone(),
        }
    }

    /// Largest `|⟨φ_m, φ_n⟩ - δ_mn|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.count();
        (0..n)
            .into_par_iter()
            .map(|i| {
                (0..=i)
                    .map(|j| {
                        let g = self.grid.inner(&self.vectors[i], &self.vectors[j]);
                        (g - if i == j { 1.0 } else { 0.0 }).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Number of eigenvalues of `T` strictly below `sigma`.
pub fn sturm_count(diagonal: &[f64], off_diagonal: f64, sigma: f64) -> usize {
    let e2 = off_diagonal * off_diagonal;
    let pivmin = f64::MIN_POSITIVE * e2.max(1.0);
    let mut count = 0;
    let mut q = diagonal[0] - sigma;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    if q < 0.0 {
        count += 1;
    }
    for &d in &diagonal[1..] {
        q = d - sigma - e2 / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn bisect(h: &TridiagonalHamiltonian, index: usize, lo: f64, hi: f64) -> f64 {
    let d = h.diagonal();
    let e = h.off_diagonal();
    let (mut lo, mut hi) = (lo, hi);
    loop {
        let tol = BISECTION_ABS_TOL + BISECTION_REL_TOL * lo.abs().max(hi.abs());
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return mid;
        }
        if sturm_count(d, e, mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// Pivoted LU of the shifted tridiagonal `T - σI` (same layout as LAPACK's
/// `gttrf`: unit lower bidiagonal times upper with two superdiagonals).
struct ShiftedLu {
    d: Vec<f64>,
    dl: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn new(h: &TridiagonalHamiltonian, sigma: f64, tiny: f64) -> Self {
        let n = h.dim();
        let e = h.off_diagonal();
        let mut d: Vec<f64> = h.diagonal().iter().map(|x| x - sigma).collect();
        let mut dl = vec![e; n.saturating_sub(1)];
        let mut du = vec![e; n.saturating_sub(1)];
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        for di in &mut d {
            if di.abs() < tiny {
                *di = if *di < 0.0 { -tiny } else { tiny };
            }
        }
        Self { d, dl, du, du2, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn start_vector(n: usize, index: usize, restart: u64) -> Vec<f64> {
    let mut state = (index as u64).wrapping_mul(0x2545_F491_4F6C_DD1D) ^ (restart << 48) ^ 0x5EED;
    (0..n)
        .map(|_| (splitmix64(&mut state) >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        .collect()
}

fn euclid_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn orthogonalize(v: &mut [f64], against: &[Vec<f64>]) {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for u in against {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
    }
}

fn shifted_residual(h: &TridiagonalHamiltonian, x: &[f64], sigma: f64) -> f64 {
    let hx = h.apply(x);
    hx.iter().zip(x).map(|(a, b)| (a - sigma * b).powi(2)).sum::<f64>().sqrt()
}

/// Makes the first component of magnitude above `1e-8` positive.
fn fix_sign(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|x| x.abs() > 1e-8) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Eigenvectors (Euclidean-normalised) for one cluster of close eigenvalues.
fn cluster_vectors(h: &TridiagonalHamiltonian, first: usize, values: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = h.dim();
    let norm = h.norm_bound().max(1.0);
    let tiny = f64::EPSILON * norm;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(values.len());
    let mut prev_sigma = f64::NEG_INFINITY;
    for (j, &lambda) in values.iter().enumerate() {
        let index = first + j;
        // separate shifts inside a cluster so the factorisations differ
        let mut sigma = lambda;
        if sigma <= prev_sigma {
            sigma = prev_sigma + 10.0 * f64::EPSILON * lambda.abs().max(1.0);
        }
        prev_sigma = sigma;
        let lu = ShiftedLu::new(h, sigma, tiny);

        let mut found = None;
        'restart: for restart in 0..MAX_RESTARTS {
            let mut x = start_vector(n, index, restart);
            orthogonalize(&mut x, &out);
            let nx = euclid_norm(&x);
            if nx == 0.0 {
                continue;
            }
            x.iter_mut().for_each(|v| *v /= nx);
            let mut converged_at = None;
            for it in 0..MAX_INVERSE_ITERATIONS {
                lu.solve(&mut x);
                orthogonalize(&mut x, &out);
                let ny = euclid_norm(&x);
                if !(ny.is_finite() && ny > 0.0) {
                    continue 'restart;
                }
                x.iter_mut().for_each(|v| *v /= ny);
                if let Some(at) = converged_at {
                    if it > at {
                        found = Some(x);
                        break 'restart;
                    }
                } else if shifted_residual(h, &x, lambda) <= RESIDUAL_REL_TOL * norm {
                    // one extra sweep after the residual test passes
                    converged_at = Some(it);
                }
            }
        }
        match found {
            Some(x) => out.push(x),
            None => {
                return Err(Error::NumericalFailure {
                    index: Some(index),
                    message: format!("inverse iteration did not converge for eigenvalue {lambda:.17e}"),
                })
            }
        }
    }
    Ok(out)
}

/// The `count` smallest eigenpairs of `h`.
pub fn eigen_lowest(h: &TridiagonalHamiltonian, count: usize) -> Result<EigenSystem> {
    let n = h.dim();
    if count == 0 || count > n {
        return invalid(format!("count must be in 1..={n}, got {count}"));
    }
    let (glo, ghi) = h.gershgorin_bounds();
    let pad = f64::EPSILON * glo.abs().max(ghi.abs()).max(1.0) * 4.0;
    let (lo, hi) = (glo - pad, ghi + pad);

    let lambdas_sq: Vec<f64> = (0..count).into_par_iter().map(|k| bisect(h, k, lo, hi)).collect();

    // group near-degenerate eigenvalues
    let mut clusters: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for k in 1..=count {
        let split = k == count || {
            let gap = lambdas_sq[k] - lambdas_sq[k - 1];
            gap >= CLUSTER_REL_GAP * lambdas_sq[k].abs().max(1.0)
        };
        if split {
            clusters.push((start, k));
            start = k;
        }
    }

    let blocks: Vec<Vec<Vec<f64>>> = clusters
        .par_iter()
        .map(|&(a, b)| cluster_vectors(h, a, &lambdas_sq[a..b]))
        .collect::<Result<_>>()?;

    let scale = 1.0 / h.grid().spacing().sqrt();
    let mut vectors: Vec<Vec<f64>> = blocks.into_iter().flatten().collect();
    let lambdas_sq = refine_with_rayleigh(h, &vectors, lambdas_sq);
    for v in &mut vectors {
        v.iter_mut().for_each(|x| *x *= scale);
        fix_sign(v);
    }
    let residuals = vectors
        .par_iter()
        .zip(&lambdas_sq)
        .map(|(v, &l)| pair_residual(h, v, l))
        .collect();
    Ok(EigenSystem {
        lambdas_sq,
        vectors,
        residuals,
        grid: h.grid().clone(),
    })
}

/// Replaces each bisection midpoint by the Rayleigh quotient of its
/// (unit) eigenvector when the quotient lies inside the bisection tolerance,
/// keeping the sequence sorted.
fn refine_with_rayleigh(h: &TridiagonalHamiltonian, vectors: &[Vec<f64>], bisected: Vec<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = vectors
        .par_iter()
        .zip(&bisected)
        .map(|(x, &l)| {
            let rq: f64 = h.apply(x).iter().zip(x).map(|(a, b)| a * b).sum();
            let tol = BISECTION_ABS_TOL + BISECTION_REL_TOL * l.abs();
            if (rq - l).abs() <= tol {
                rq
            } else {
                l
            }
        })
        .collect();
    for k in 1..out.len() {
        if out[k] < out[k - 1] {
            out[k] = out[k - 1];
        }
    }
    out
}

fn pair_residual(h: &TridiagonalHamiltonian, v: &[f64], lambda_sq: f64) -> f64 {
    let hv = h.apply(v);
    let r: Vec<f64> = hv.iter().zip(v).map(|(a, b)| a - lambda_sq * b).collect();
    h.grid().norm(&r)
}

/// Largest `‖Hφ_n - λ_n²φ_n‖` (discrete L²) over the eigensystem.
pub fn residual_check(h: &TridiagonalHamiltonian, eig: &EigenSystem) -> Result<f64> {
    if !h.grid().same_as(eig.grid()) {
        return invalid(format!(
            "Hamiltonian has {} grid points, eigensystem has {}",
            h.dim(),
            eig.grid().len()
        ));
    }
    Ok(eig
        .vectors()
        .iter()
        .zip(eig.lambdas_sq())
        .map(|(v, &l)| pair_residual(h, v, l))
        .fold(0.0, f64::max))
}

/// Eigenvalues on a sequence of refined grids with the observed order of
/// convergence from the three finest.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub spacings: Vec<f64>,
    pub n_points: Vec<usize>,
    /// `values[j][n]` is `λ_{n+1}²` on grid `j`.
    pub values: Vec<Vec<f64>>,
    /// Richardson order estimate `log(|Δ_coarse| / |Δ_fine|) / log(r)` per mode.
    pub observed_order: Vec<f64>,
    /// Richardson-extrapolated eigenvalues per mode.
    pub extrapolated: Vec<f64>,
}

pub fn convergence_table(spec: &PotentialSpec, half_width: f64, spacings: &[f64], count: usize) -> Result<ConvergenceTable> {
    if spacings.len() < 3 {
        return invalid(format!("need at least 3 spacings, got {}", spacings.len()));
    }
    if spacings.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("spacings must be strictly decreasing");
    }
    let m = spacings.len();
    let r = spacings[m - 3] / spacings[m - 2];
    let r2 = spacings[m - 2] / spacings[m - 1];
    if ((r - r2) / r).abs() > 1e-6 {
        return invalid("the three finest spacings must share a common refinement ratio");
    }
    let mut n_points = Vec::with_capacity(m);
    let mut values = Vec::with_capacity(m);
    for &h in spacings {
        let grid = build_grid_with_spacing(half_width, h)?;
        let ham = assemble_hamiltonian(spec, &grid)?;
        let eig = eigen_lowest(&ham, count)?;
        n_points.push(grid.len());
        values.push(eig.lambdas_sq().to_vec());
    }
    let (a, b, c) = (&values[m - 3], &values[m - 2], &values[m - 1]);
    let mut observed_order = Vec::with_capacity(count);
    let mut extrapolated = Vec::with_capacity(count);
    for n in 0..count {
        let p = ((a[n] - b[n]).abs() / (b[n] - c[n]).abs()).ln() / r.ln();
        observed_order.push(p);
        extrapolated.push(c[n] + (c[n] - b[n]) / (r.powf(p) - 1.0));
    }
    Ok(ConvergenceTable {
        spacings: spacings.to_vec(),
        n_points,
        values,
        observed_order,
        extrapolated,
    })
}
