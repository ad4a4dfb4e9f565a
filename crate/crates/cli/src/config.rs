//! Experiment configuration. One TOML file holds shared `[grid]`,
//! `[potential]` and `[weight]` sections plus one section per command.
//! Unknown keys anywhere are rejected.

use serde::Deserialize;
use specsmooth_core::operator::build_grid_with_spacing;
use specsmooth_core::smoothing::{Dynamics, WeightMode};
use specsmooth_core::{build_grid, Grid, PotentialSpec, WeightSpec};

use crate::error::{CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: Option<GridConfig>,
    pub potential: Option<PotentialConfig>,
    pub weight: Option<WeightConfig>,
    pub eigen: Option<EigenConfig>,
    pub decay: Option<DecayConfig>,
    pub smoothing: Option<SmoothingConfig>,
    pub equivalence: Option<EquivalenceConfig>,
    pub free: Option<FreeConfig>,
    pub theta: Option<ThetaConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub spacing: Option<f64>,
    pub n_points: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    // empty braces so that stray keys are still rejected
    Zero {},
    Harmonic {},
    BracketPower { k: f64 },
    Custom { samples: Vec<f64>, growth: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightConfig {
    ConstantOne {},
    Indicator { a: f64, b: f64 },
    InversePower { nu: f64 },
    Gaussian { width: f64 },
    Custom { samples: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    pub count: usize,
    /// Relative residual tolerance for the self-check.
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    pub convergence_spacings: Option<Vec<f64>>,
    pub assumption: Option<AssumptionConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionConfig {
    pub m: f64,
    pub x0: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub count: usize,
    /// 1-based inclusive `[n_lo, n_hi]`.
    pub fit_range: Option<[usize; 2]>,
    pub gap_m: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsConfig {
    Hamiltonian,
    EntirePart,
}

impl From<DynamicsConfig> for Dynamics {
    fn from(d: DynamicsConfig) -> Self {
        match d {
            DynamicsConfig::Hamiltonian => Dynamics::Hamiltonian,
            DynamicsConfig::EntirePart => Dynamics::EntirePart,
        }
    }
}

impl From<DynamicsConfig> for WeightMode {
    fn from(d: DynamicsConfig) -> Self {
        match d {
            DynamicsConfig::Hamiltonian => WeightMode::Hamiltonian,
            DynamicsConfig::EntirePart => WeightMode::EntirePart,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingConfig {
    pub count: usize,
    pub gamma: f64,
    #[serde(default = "default_dynamics")]
    pub dynamics: DynamicsConfig,
    #[serde(default = "default_dynamics")]
    pub weights: DynamicsConfig,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
    pub truncations: Option<Vec<usize>>,
    /// Relative tolerance for quadrature against the closed form.
    #[serde(default = "default_self_check_tol")]
    pub self_check_tol: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceConfig {
    pub count: usize,
    pub gamma: f64,
    #[serde(default = "default_equivalence_tol")]
    pub tolerance: f64,
    pub fit_range: Option<[usize; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeConfig {
    pub bands: Vec<u64>,
    #[serde(default = "default_u_min")]
    pub u_min: f64,
    #[serde(default = "default_u_max")]
    pub u_max: f64,
    #[serde(default = "default_u_points")]
    pub u_points: usize,
    /// Absolute tolerance for closed form against quadrature.
    #[serde(default = "default_kernel_tol")]
    pub kernel_tol: f64,
    /// Allowed relative spread of the per-band suprema.
    #[serde(default = "default_variation_tol")]
    pub variation_tol: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaConfig {
    pub q: f64,
    pub k: f64,
    pub eta: Option<f64>,
}

fn default_residual_tol() -> f64 {
    1e-8
}
fn default_dynamics() -> DynamicsConfig {
    DynamicsConfig::Hamiltonian
}
fn default_nodes() -> usize {
    4096
}
fn default_self_check_tol() -> f64 {
    1e-5
}
fn default_equivalence_tol() -> f64 {
    1e-8
}
fn default_u_min() -> f64 {
    -20.0
}
fn default_u_max() -> f64 {
    20.0
}
fn default_u_points() -> usize {
    401
}
fn default_kernel_tol() -> f64 {
    1e-8
}
fn default_variation_tol() -> f64 {
    0.05
}

pub fn parse(text: &str) -> CliResult<ExperimentConfig> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
}

pub fn section<'a, T>(s: &'a Option<T>, name: &str) -> CliResult<&'a T> {
    s.as_ref()
        .ok_or_else(|| CliError::Config(format!("config has no [{name}] section")))
}

impl GridConfig {
    pub fn build(&self) -> CliResult<Grid> {
        Ok(match (self.spacing, self.n_points) {
            (Some(h), None) => build_grid_with_spacing(self.half_width, h)?,
            (None, Some(n)) => build_grid(self.half_width, n)?,
            _ => {
                return Err(CliError::Config(
                    "[grid] needs exactly one of `spacing` and `n_points`".into(),
                ))
            }
        })
    }
}

impl From<PotentialConfig> for PotentialSpec {
    fn from(p: PotentialConfig) -> Self {
        match p {
            PotentialConfig::Zero {} => PotentialSpec::Zero,
            PotentialConfig::Harmonic {} => PotentialSpec::Harmonic,
            PotentialConfig::BracketPower { k } => PotentialSpec::BracketPower { k },
            PotentialConfig::Custom { samples, growth } => PotentialSpec::CustomSamples { samples, growth },
        }
    }
}

impl From<WeightConfig> for WeightSpec {
    fn from(w: WeightConfig) -> Self {
        match w {
            WeightConfig::ConstantOne {} => WeightSpec::ConstantOne,
            WeightConfig::Indicator { a, b } => WeightSpec::Indicator { a, b },
            WeightConfig::InversePower { nu } => WeightSpec::InversePower { nu },
            WeightConfig::Gaussian { width } => WeightSpec::Gaussian { width },
            WeightConfig::Custom { samples } => WeightSpec::CustomSamples(samples),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = parse(
            r#"
            [grid]
            half_width = 12.0
            spacing = 0.01
            [potential]
            kind = "bracket_power"
            k = 4.0
            [weight]
            kind = "indicator"
            a = -1.0
            b = 1.0
            [smoothing]
            count = 50
            gamma = 0.5
            dynamics = "entire_part"
            [theta]
            q = inf
            k = 4.0
            "#,
        )
        .unwrap();
        assert!(matches!(cfg.potential, Some(PotentialConfig::BracketPower { k }) if k == 4.0));
        let s = cfg.smoothing.unwrap();
        assert!(matches!(s.dynamics, DynamicsConfig::EntirePart));
        assert!(matches!(s.weights, DynamicsConfig::Hamiltonian));
        assert_eq!(s.quadrature_nodes, 4096);
        assert!(cfg.theta.unwrap().q.is_infinite());
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse("[grid]\nhalf_width = 1.0\nspaceing = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("spaceing"), "{err}");
        let err = parse("[potential]\nkind = \"harmonic\"\nk = 2.0\n").unwrap_err();
        assert!(err.to_string().contains("`k`"), "{err}");
        assert!(parse("[weight]\nkind = \"constant_one\"\nwidth = 2.0\n").is_err());
        assert!(parse("[bogus]\n").is_err());
    }

    #[test]
    fn grid_needs_one_resolution_key() {
        let g = GridConfig {
            half_width: 1.0,
            spacing: Some(0.1),
            n_points: Some(19),
        };
        assert!(g.build().is_err());
        let g = GridConfig {
            half_width: 1.0,
            spacing: None,
            n_points: Some(19),
        };
        assert_eq!(g.build().unwrap().len(), 19);
    }
}
