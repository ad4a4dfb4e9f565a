//! Fixtures shared by the benchmarks.

use specsmooth_core::operator::build_grid_with_spacing;
use specsmooth_core::{assemble_hamiltonian, PotentialSpec, TridiagonalHamiltonian};

pub fn quartic_hamiltonian(half_width: f64, spacing: f64) -> TridiagonalHamiltonian {
    let grid = build_grid_with_spacing(half_width, spacing).expect("valid grid");
    assemble_hamiltonian(&PotentialSpec::BracketPower { k: 4.0 }, &grid).expect("valid potential")
}
