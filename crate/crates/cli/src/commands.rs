use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use specsmooth_core::free::UniformBound;
use specsmooth_core::operator::truncation_warning;
use specsmooth_core::projectors::{default_fit_range, fit_decay_exponent, gap_profile, weighted_decay};
use specsmooth_core::smoothing::{
    smoothing_constant, smoothing_quadrature_weighted, FormDiagnostics, QuadratureCheck, TruncationRow,
};
use specsmooth_core::tridiag::convergence_table;
use specsmooth_core::{
    assemble_hamiltonian, band_params, bin_spectrum, check_assumption, eigen_lowest, japanese_bracket, kernel_f,
    sample_weight, theta_exponent, uniform_bound_check, AssumptionReport, CoefficientVector, Complex64,
    ConvergenceTable, DecayFit, Dynamics, EigenSystem, GapProfile, KernelMethod, PotentialSpec, SmoothingForm,
    SmoothingReport, WeightMode, WeightSpec,
};

use crate::config::{section, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::output::{config_hash, OutputDir, Summary, Table, CSV_SCHEMA};

/// Largest admissible `λ²h²`: about nine grid points per wavelength at the
/// top of the requested spectrum.
pub const RESOLUTION_LIMIT: f64 = 0.5;

pub struct Context<'a> {
    pub raw: &'a [u8],
    pub config: &'a ExperimentConfig,
    pub out: &'a Path,
}

impl Context<'_> {
    fn finish<R: Serialize>(&self, command: &str, file: &str, results: R, warnings: Vec<String>) -> CliResult<()> {
        let dir = OutputDir::create(self.out)?;
        dir.summary(
            file,
            &Summary {
                command,
                config_hash: config_hash(self.raw),
                results,
                warnings,
                version: env!("CARGO_PKG_VERSION"),
                csv_schema: CSV_SCHEMA,
            },
        )?;
        Ok(())
    }

    fn dir(&self) -> CliResult<OutputDir> {
        OutputDir::create(self.out)
    }
}

struct Solved {
    potential: PotentialSpec,
    eig: EigenSystem,
    max_residual: f64,
    warnings: Vec<String>,
}

fn solve(config: &ExperimentConfig, count: usize) -> CliResult<Solved> {
    let grid = section(&config.grid, "grid")?.build()?;
    let potential: PotentialSpec = section(&config.potential, "potential")?.clone().into();
    let ham = assemble_hamiltonian(&potential, &grid)?;
    if count > grid.len() {
        return Err(CliError::Config(format!(
            "grid too coarse: {count} modes requested but the grid has {} points",
            grid.len()
        )));
    }
    let eig = eigen_lowest(&ham, count)?;
    let top = *eig.lambdas_sq().last().expect("count >= 1");
    let h = grid.spacing();
    if top * h * h > RESOLUTION_LIMIT {
        return Err(CliError::Config(format!(
            "grid too coarse for {count} modes: lambda^2 h^2 = {:.3e} exceeds {RESOLUTION_LIMIT}",
            top * h * h
        )));
    }
    let mut warnings = Vec::new();
    warnings.extend(truncation_warning(&potential, &grid, top));
    let max_residual = eig.residuals().iter().copied().fold(0.0, f64::max);
    Ok(Solved {
        potential,
        eig,
        max_residual,
        warnings,
    })
}

fn weight(config: &ExperimentConfig, eig: &EigenSystem) -> CliResult<Vec<f64>> {
    let spec: WeightSpec = section(&config.weight, "weight")?.clone().into();
    Ok(sample_weight(&spec, eig.grid())?)
}

fn residual_gate(s: &Solved, tol: f64) -> CliResult<()> {
    let scale = s.eig.lambdas_sq().last().copied().unwrap_or(1.0).abs().max(1.0);
    if s.max_residual > tol * scale {
        return Err(CliError::SelfCheck(format!(
            "eigenpair residual {:.3e} exceeds {tol:e} x {scale:.3e}",
            s.max_residual
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct EigenResults {
    count: usize,
    n_points: usize,
    spacing: f64,
    half_width: f64,
    lambda_sq: Vec<f64>,
    max_residual: f64,
    orthonormality_defect: f64,
    convergence: Option<ConvergenceTable>,
    assumption: Option<AssumptionReport>,
}

pub fn eigen(ctx: &Context) -> CliResult<()> {
    let cfg = section(&ctx.config.eigen, "eigen")?;
    let s = solve(ctx.config, cfg.count)?;
    let grid = s.eig.grid();
    let index = bin_spectrum(&s.eig)?;
    let dir = ctx.dir()?;

    let mut table = Table::new(&["n", "lambda_sq", "lambda", "residual", "bin"]);
    for (i, &l) in s.eig.lambdas_sq().iter().enumerate() {
        table.push(vec![
            (i + 1).into(),
            l.into(),
            s.eig.lambda(i).into(),
            s.eig.residuals()[i].into(),
            index.bin_of(i).into(),
        ]);
    }
    dir.table("eigen.csv", &table)?;

    let convergence = match &cfg.convergence_spacings {
        Some(spacings) => {
            let t = convergence_table(&s.potential, grid.half_width(), spacings, cfg.count)?;
            let mut rows = Table::new(&["spacing", "n_points", "n", "lambda_sq"]);
            for (j, values) in t.values.iter().enumerate() {
                for (i, &l) in values.iter().enumerate() {
                    rows.push(vec![t.spacings[j].into(), t.n_points[j].into(), (i + 1).into(), l.into()]);
                }
            }
            dir.table("eigen_convergence.csv", &rows)?;
            let mut rich = Table::new(&["n", "observed_order", "extrapolated"]);
            for i in 0..cfg.count {
                rich.push(vec![(i + 1).into(), t.observed_order[i].into(), t.extrapolated[i].into()]);
            }
            dir.table("eigen_richardson.csv", &rich)?;
            Some(t)
        }
        None => None,
    };

    let mut warnings = s.warnings.clone();
    let assumption = match &cfg.assumption {
        Some(a) => {
            let r = check_assumption(&s.potential, a.m, a.x0, grid)?;
            if !r.pass {
                warnings.push(format!("potential fails the growth/convexity check with m = {}", a.m));
            }
            Some(r)
        }
        None => None,
    };
    let results = EigenResults {
        count: cfg.count,
        n_points: grid.len(),
        spacing: grid.spacing(),
        half_width: grid.half_width(),
        lambda_sq: s.eig.lambdas_sq().to_vec(),
        max_residual: s.max_residual,
        orthonormality_defect: s.eig.orthonormality_defect(),
        convergence,
        assumption,
    };
    ctx.finish("eigen", "eigen.json", results, warnings)?;
    residual_gate(&s, cfg.residual_tol)
}

#[derive(Serialize)]
struct DecayResults {
    count: usize,
    gamma_hat: f64,
    c2_hat: f64,
    fit: DecayFit,
    bins: usize,
    gaps: Option<GapSummary>,
}

#[derive(Serialize)]
struct GapSummary {
    m: f64,
    inf_ratio: Option<f64>,
    singleton_from: Option<usize>,
}

impl From<&GapProfile> for GapSummary {
    fn from(g: &GapProfile) -> Self {
        Self {
            m: g.m,
            inf_ratio: g.inf_ratio,
            singleton_from: g.singleton_from,
        }
    }
}

pub fn decay(ctx: &Context) -> CliResult<()> {
    let cfg = section(&ctx.config.decay, "decay")?;
    let (n_lo, n_hi) = match cfg.fit_range {
        Some([a, b]) => (a, b),
        None => default_fit_range(cfg.count),
    };
    if n_lo == 0 || n_hi > cfg.count || n_hi < n_lo + 10 {
        return Err(CliError::Config(format!(
            "fit_range [{n_lo}, {n_hi}] is empty or too short for {} modes (need 1 <= lo, hi <= count, hi - lo >= 10)",
            cfg.count
        )));
    }
    let s = solve(ctx.config, cfg.count)?;
    let psi = weight(ctx.config, &s.eig)?;
    let index = bin_spectrum(&s.eig)?;
    let mut report = weighted_decay(&s.eig, &psi, &index)?;
    let fit = fit_decay_exponent(&report, n_lo, n_hi)?;
    report.fit = Some(fit.clone());
    if let Some(m) = cfg.gap_m {
        report.gaps = Some(gap_profile(&s.eig, m));
    }
    let dir = ctx.dir()?;

    let mut modes = Table::new(&["n", "lambda", "lambda_sq", "bin", "weighted_norm"]);
    for m in &report.modes {
        modes.push(vec![
            (m.mode + 1).into(),
            m.lambda.into(),
            s.eig.lambdas_sq()[m.mode].into(),
            index.bin_of(m.mode).into(),
            m.weighted_norm.into(),
        ]);
    }
    dir.table("decay_modes.csv", &modes)?;

    let mut bins = Table::new(&["bin", "size", "first_n", "op_norm"]);
    for b in &report.bins {
        bins.push(vec![
            b.n_bin.into(),
            b.modes.len().into(),
            (b.modes[0] + 1).into(),
            b.op_norm.into(),
        ]);
    }
    dir.table("decay_bins.csv", &bins)?;

    if let Some(g) = &report.gaps {
        let mut gaps = Table::new(&["n", "gap", "ratio", "distinct_bins"]);
        for r in &g.records {
            gaps.push(vec![r.n.into(), r.gap.into(), r.ratio.into(), (r.distinct_bins as usize).into()]);
        }
        dir.table("decay_gaps.csv", &gaps)?;
    }

    let mut warnings = s.warnings.clone();
    warnings.extend(report.warnings.iter().cloned());
    let results = DecayResults {
        count: cfg.count,
        gamma_hat: fit.gamma,
        c2_hat: fit.c2,
        fit,
        bins: report.bins.len(),
        gaps: report.gaps.as_ref().map(GapSummary::from),
    };
    ctx.finish("decay", "decay.json", results, warnings)?;
    residual_gate(&s, 1e-8)
}

/// Test states for the quadrature self-check: a few single modes, whose
/// integrand is constant in time, and a two-mode superposition. Modes 1 and 3
/// share parity, so the cross term survives symmetric weights.
fn check_states(count: usize) -> Vec<(String, CoefficientVector)> {
    let mut picks = vec![0, count / 2, count - 1];
    picks.dedup();
    let mut out: Vec<_> = picks
        .into_iter()
        .map(|n| (format!("mode {}", n + 1), CoefficientVector::unit(count, n)))
        .collect();
    let second = if count >= 3 { 2 } else { 1 };
    let mut mix = CoefficientVector::zeros(count);
    mix.as_mut_slice()[0] = Complex64::new(1.0, 0.0);
    mix.as_mut_slice()[second] = Complex64::new(0.0, 0.5);
    out.push((format!("modes 1+{}", second + 1), mix));
    out
}

pub fn smoothing(ctx: &Context) -> CliResult<()> {
    let cfg = section(&ctx.config.smoothing, "smoothing")?;
    if cfg.count < 2 {
        return Err(CliError::Config("[smoothing] count must be at least 2".into()));
    }
    if cfg.quadrature_nodes < 8 {
        return Err(CliError::Config("[smoothing] quadrature_nodes must be at least 8".into()));
    }
    let truncations: Vec<usize> = match &cfg.truncations {
        Some(t) => {
            if let Some(&bad) = t.iter().find(|&&k| k < 2 || k > cfg.count) {
                return Err(CliError::Config(format!(
                    "truncation {bad} outside 2..={}",
                    cfg.count
                )));
            }
            t.clone()
        }
        None => {
            let mut t: Vec<usize> = [cfg.count / 4, cfg.count / 2, cfg.count]
                .into_iter()
                .filter(|&k| k >= 2)
                .collect();
            t.dedup();
            t
        }
    };
    let s = solve(ctx.config, cfg.count)?;
    let psi = weight(ctx.config, &s.eig)?;
    let dynamics: Dynamics = cfg.dynamics.into();
    let mode: WeightMode = cfg.weights.into();
    let form = SmoothingForm::new(&s.eig, &psi, cfg.gamma, dynamics, mode)?;
    let constant = form.constant()?;

    let truncation_table: Vec<TruncationRow> = truncations
        .iter()
        .map(|&k| {
            let c = smoothing_constant(&s.eig.truncate(k), &psi, cfg.gamma, dynamics, mode)?;
            Ok(TruncationRow { count: k, c1: c.c1 })
        })
        .collect::<CliResult<_>>()?;

    let mut checks = Vec::new();
    for (label, f) in check_states(cfg.count) {
        let closed = form.value(&f)?;
        let quadrature =
            smoothing_quadrature_weighted(&s.eig, &psi, cfg.gamma, &f, dynamics, mode, cfg.quadrature_nodes)?;
        let relative_error = (quadrature - closed).abs() / closed.max(f64::MIN_POSITIVE);
        checks.push(QuadratureCheck {
            label,
            closed_form: closed,
            quadrature,
            relative_error,
        });
    }

    let dir = ctx.dir()?;
    let mut trunc = Table::new(&["count", "c1"]);
    for r in &truncation_table {
        trunc.push(vec![r.count.into(), r.c1.into()]);
    }
    dir.table("smoothing_truncation.csv", &trunc)?;
    let maximizer_abs: Vec<f64> = constant.maximizer.as_slice().iter().map(|c| c.norm()).collect();
    let mut maxi = Table::new(&["n", "lambda_sq", "abs_coefficient"]);
    for (i, a) in maximizer_abs.iter().enumerate() {
        maxi.push(vec![(i + 1).into(), s.eig.lambdas_sq()[i].into(), (*a).into()]);
    }
    dir.table("smoothing_maximizer.csv", &maxi)?;

    let mut warnings = s.warnings.clone();
    if constant.stationary {
        warnings.push(format!(
            "power iteration stopped on a stationary Rayleigh quotient after {} iterations (residual {:.3e})",
            constant.iterations, constant.final_residual
        ));
    }
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| c.relative_error.is_nan() || c.relative_error > cfg.self_check_tol)
        .map(|c| format!("{}: relative error {:.3e}", c.label, c.relative_error))
        .collect();
    let report = SmoothingReport {
        gamma: cfg.gamma,
        dynamics,
        weights: mode,
        truncation: cfg.count,
        c1: constant.c1,
        power_iterations: constant.iterations,
        maximizer_abs,
        truncation_table,
        checks,
        diagnostics: FormDiagnostics::of(&form),
    };
    ctx.finish("smoothing", "smoothing.json", report, warnings)?;
    residual_gate(&s, 1e-8)?;
    if !failed.is_empty() {
        return Err(CliError::SelfCheck(format!(
            "quadrature disagrees with the closed form beyond {:e}: {}",
            cfg.self_check_tol,
            failed.join("; ")
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct EquivalenceResults {
    count: usize,
    gamma: f64,
    /// Sharp constant, `A`-dynamics and `⟨A⟩` weights.
    c1_a: f64,
    /// `√(2π)·max_N ⟨N⟩^{γ/2}‖ΨP_N‖`.
    bin_side: f64,
    ratio: f64,
    argmax_bin: u64,
    /// Sharp constant, `H`-dynamics and `⟨H⟩` weights.
    c1_h: f64,
    c2_hat: Option<f64>,
    gamma_hat: Option<f64>,
}

pub fn equivalence(ctx: &Context) -> CliResult<()> {
    let cfg = section(&ctx.config.equivalence, "equivalence")?;
    if cfg.count < 2 {
        return Err(CliError::Config("[equivalence] count must be at least 2".into()));
    }
    let s = solve(ctx.config, cfg.count)?;
    let psi = weight(ctx.config, &s.eig)?;
    let index = bin_spectrum(&s.eig)?;
    let report = weighted_decay(&s.eig, &psi, &index)?;
    let c1_a = smoothing_constant(&s.eig, &psi, cfg.gamma, Dynamics::EntirePart, WeightMode::EntirePart)?.c1;
    let c1_h = smoothing_constant(&s.eig, &psi, cfg.gamma, Dynamics::Hamiltonian, WeightMode::Hamiltonian)?.c1;

    let mut table = Table::new(&["bin", "size", "weight", "op_norm", "weighted_op_norm"]);
    let mut best = (0u64, 0.0f64);
    for b in &report.bins {
        let w = japanese_bracket(b.n_bin as f64).powf(cfg.gamma / 2.0);
        let v = w * b.op_norm;
        if v > best.1 {
            best = (b.n_bin, v);
        }
        table.push(vec![b.n_bin.into(), b.modes.len().into(), w.into(), b.op_norm.into(), v.into()]);
    }
    ctx.dir()?.table("equivalence_bins.csv", &table)?;
    let bin_side = (2.0 * PI).sqrt() * best.1;
    let ratio = c1_a / bin_side;

    let mut warnings = s.warnings.clone();
    let (lo, hi) = match cfg.fit_range {
        Some([a, b]) => (a, b),
        None => default_fit_range(cfg.count),
    };
    let fit = match fit_decay_exponent(&report, lo, hi) {
        Ok(f) => Some(f),
        Err(e) => {
            warnings.push(format!("decay fit skipped: {e}"));
            None
        }
    };
    let results = EquivalenceResults {
        count: cfg.count,
        gamma: cfg.gamma,
        c1_a,
        bin_side,
        ratio,
        argmax_bin: best.0,
        c1_h,
        c2_hat: fit.as_ref().map(|f| f.c2),
        gamma_hat: fit.as_ref().map(|f| f.gamma),
    };
    ctx.finish("equivalence", "equivalence.json", results, warnings)?;
    residual_gate(&s, 1e-8)?;
    if ratio.is_nan() || (ratio - 1.0).abs() > cfg.tolerance {
        return Err(CliError::SelfCheck(format!(
            "C1,A / bin side = {ratio:.17e} differs from 1 by more than {:e}",
            cfg.tolerance
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct BandSummary {
    n: u64,
    c: f64,
    d: f64,
    sqrt_n_c: f64,
    f_at_zero: f64,
    f_at_zero_exact: f64,
    max_abs_diff: f64,
}

#[derive(Serialize)]
struct FreeResults {
    bands: Vec<BandSummary>,
    uniform_bound: UniformBound,
    variation_within_tolerance: bool,
    variation_tol: f64,
    kernel_tol: f64,
}

pub fn free(ctx: &Context) -> CliResult<()> {
    let cfg = section(&ctx.config.free, "free")?;
    if cfg.bands.is_empty() {
        return Err(CliError::Config("[free] bands is empty".into()));
    }
    if let Some(bad) = cfg.bands.iter().find(|&&n| n == 0) {
        return Err(CliError::Config(format!("[free] band index must be >= 1, got {bad}")));
    }
    if cfg.u_points < 2 || !cfg.u_min.is_finite() || !cfg.u_max.is_finite() || cfg.u_min >= cfg.u_max {
        return Err(CliError::Config("[free] needs u_min < u_max and u_points >= 2".into()));
    }
    let grid = section(&ctx.config.grid, "grid")?.build()?;
    let wspec: WeightSpec = section(&ctx.config.weight, "weight")?.clone().into();
    let psi = sample_weight(&wspec, &grid)?;

    let step = (cfg.u_max - cfg.u_min) / (cfg.u_points - 1) as f64;
    let us: Vec<f64> = (0..cfg.u_points).map(|i| cfg.u_min + i as f64 * step).collect();
    let mut table = Table::new(&["band", "u", "closed_form", "quadrature", "abs_diff"]);
    let mut bands = Vec::with_capacity(cfg.bands.len());
    for &n in &cfg.bands {
        let p = band_params(n)?;
        let rows: Vec<(f64, f64)> = us
            .par_iter()
            .map(|&u| Ok((kernel_f(n, u, KernelMethod::ClosedForm)?, kernel_f(n, u, KernelMethod::Quadrature)?)))
            .collect::<specsmooth_core::Result<_>>()?;
        let mut worst: f64 = 0.0;
        for (&u, &(a, b)) in us.iter().zip(&rows) {
            worst = worst.max((a - b).abs());
            table.push(vec![n.into(), u.into(), a.into(), b.into(), (a - b).abs().into()]);
        }
        bands.push(BandSummary {
            n,
            c: p.c,
            d: p.d,
            sqrt_n_c: (n as f64).sqrt() * p.c,
            f_at_zero: kernel_f(n, 0.0, KernelMethod::ClosedForm)?,
            f_at_zero_exact: (((n + 1) as f64).sqrt() - (n as f64).sqrt()) / PI,
            max_abs_diff: worst,
        });
    }
    let bound = uniform_bound_check(&cfg.bands, &psi, &grid)?;
    let dir = ctx.dir()?;
    dir.table("free_kernel.csv", &table)?;
    let mut sups = Table::new(&["band", "sup"]);
    for b in &bound.per_band {
        sups.push(vec![b.n.into(), b.sup.into()]);
    }
    dir.table("free_bound.csv", &sups)?;

    let mut warnings = Vec::new();
    let within = bound.relative_variation <= cfg.variation_tol;
    if !within {
        warnings.push(format!(
            "normalised kernel supremum varies by {:.4} across bands (tolerance {})",
            bound.relative_variation, cfg.variation_tol
        ));
    }
    let worst = bands.iter().map(|b| b.max_abs_diff).fold(0.0, f64::max);
    let results = FreeResults {
        bands,
        uniform_bound: bound,
        variation_within_tolerance: within,
        variation_tol: cfg.variation_tol,
        kernel_tol: cfg.kernel_tol,
    };
    ctx.finish("free", "free.json", results, warnings)?;
    if worst.is_nan() || worst > cfg.kernel_tol {
        return Err(CliError::SelfCheck(format!(
            "closed form and quadrature differ by {worst:.3e} (tolerance {:e})",
            cfg.kernel_tol
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct ThetaResults {
    /// `null` encodes `q = ∞`.
    q: Option<f64>,
    k: f64,
    eta: Option<f64>,
    theta: f64,
}

/// Evaluates `θ`, prints it, and writes `theta.json` when an output
/// directory is given.
pub fn theta(q: f64, k: f64, eta: Option<f64>, raw: &[u8], out: Option<&Path>) -> CliResult<f64> {
    let value = theta_exponent(q, k, eta)?;
    println!("{value}");
    if let Some(out) = out {
        let dir = OutputDir::create(out)?;
        dir.summary(
            "theta.json",
            &Summary {
                command: "theta",
                config_hash: config_hash(raw),
                results: ThetaResults {
                    q: q.is_finite().then_some(q),
                    k,
                    eta,
                    theta: value,
                },
                warnings: Vec::new(),
                version: env!("CARGO_PKG_VERSION"),
                csv_schema: CSV_SCHEMA,
            },
        )?;
    }
    Ok(value)
}
