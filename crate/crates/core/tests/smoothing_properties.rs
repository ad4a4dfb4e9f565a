mod common;

use common::{fd_system, random_coefficients, rel, rng};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use specsmooth_core::projectors::{projected_norm_sqr, weighted_decay};
use specsmooth_core::smoothing::{
    duhamel_discrepancy, evolve, parseval_identity_a, smoothing_closed_form, smoothing_constant,
    smoothing_quadrature, weight_ratio_bound,
};
use specsmooth_core::{
    bin_spectrum, build_grid, japanese_bracket, sample_weight, CoefficientVector, Dynamics, EigenSystem,
    PotentialSpec, SmoothingForm, WeightMode, WeightSpec,
};
use std::f64::consts::PI;

fn indicator(eig: &EigenSystem) -> Vec<f64> {
    sample_weight(&WeightSpec::Indicator { a: -1.0, b: 1.0 }, eig.grid()).unwrap()
}

/// Eigenvalues of the real `2n × 2n` embedding `[[Re Q, -Im Q], [Im Q, Re Q]]`.
fn embedded_spectrum(form: &SmoothingForm) -> Vec<f64> {
    let n = form.dim();
    let q = form.matrix();
    let m = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = q[(i % n) * n + (j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[test]
fn form_is_hermitian_psd_and_power_iteration_agrees_with_full_diagonalisation() {
    let cases = [
        (fd_system(&PotentialSpec::Harmonic, 10.0, 0.02, 40), 0.5),
        (fd_system(&PotentialSpec::BracketPower { k: 4.0 }, 8.0, 0.01, 40), 0.25),
    ];
    for (eig, gamma) in &cases {
        let psi = sample_weight(&WeightSpec::InversePower { nu: 0.3 }, eig.grid()).unwrap();
        for dynamics in [Dynamics::Hamiltonian, Dynamics::EntirePart] {
            let form = SmoothingForm::new(eig, &psi, *gamma, dynamics, WeightMode::Hamiltonian).unwrap();
            assert!(form.hermitian_defect() < 1e-12);
            let ev = embedded_spectrum(&form);
            let top = *ev.last().unwrap();
            assert!(ev[0] >= -1e-10 * top, "min eigenvalue {}", ev[0]);
            let c = form.constant().unwrap();
            assert!(rel(c.top_eigenvalue, top) < 1e-8, "{} vs {top}", c.top_eigenvalue);
            assert!(rel(c.c1, top.sqrt()) < 1e-8);
        }
    }
}

#[test]
fn constant_dominates_random_ratios_and_scaling_is_exact() {
    let eig = fd_system(&PotentialSpec::BracketPower { k: 4.0 }, 8.0, 0.01, 60);
    let psi = indicator(&eig);
    let form = SmoothingForm::new(&eig, &psi, 0.5, Dynamics::Hamiltonian, WeightMode::Hamiltonian).unwrap();
    let c1 = form.constant().unwrap().c1;
    let mut r = rng(11);
    for _ in 0..100 {
        let f = random_coefficients(&mut r, eig.count());
        let s = form.value(&f).unwrap();
        assert!(s / f.norm() <= c1 * (1.0 + 1e-10));
        let alpha = Complex64::new(-1.7, 0.4);
        let scaled = form.value(&f.scale(alpha)).unwrap();
        assert!(rel(scaled, alpha.norm() * s) < 1e-12);
    }
}

#[test]
fn constant_one_weight_gives_sqrt_two_pi() {
    let eig = fd_system(&PotentialSpec::Harmonic, 10.0, 0.02, 30);
    let psi = vec![1.0; eig.grid().len()];
    let c = smoothing_constant(&eig, &psi, 0.0, Dynamics::Hamiltonian, WeightMode::Hamiltonian).unwrap();
    assert!((c.c1 - (2.0 * PI).sqrt()).abs() < 1e-8);
}

#[test]
fn evolution_is_unitary_and_a_dynamics_is_two_pi_periodic() {
    let eig = fd_system(&PotentialSpec::BracketPower { k: 4.0 }, 8.0, 0.01, 50);
    let mut r = rng(3);
    let f = random_coefficients(&mut r, eig.count());
    for t in [0.0, 0.37, 2.0, 2.0 * PI, 17.5] {
        let u = evolve(&eig, &f, t, Dynamics::Hamiltonian).unwrap();
        assert!(rel(u.norm(), f.norm()) < 1e-14);
    }
    let back = evolve(&eig, &f, 2.0 * PI, Dynamics::EntirePart).unwrap();
    let err = back.as_slice().iter().zip(f.as_slice()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-12);
}

#[test]
fn single_mode_identity_closed_form_and_quadrature() {
    let eig = fd_system(&PotentialSpec::BracketPower { k: 4.0 }, 8.0, 0.01, 30);
    let psi = indicator(&eig);
    let rep = weighted_decay(&eig, &psi, &bin_spectrum(&eig).unwrap()).unwrap();
    for n in [0usize, 4, 17, 29] {
        let f = CoefficientVector::unit(eig.count(), n);
        for gamma in [0.0, 0.5, 1.3] {
            let expected =
                (2.0 * PI).sqrt() * japanese_bracket(eig.lambdas_sq()[n]).powf(gamma / 2.0) * rep.modes[n].weighted_norm;
            let closed = smoothing_closed_form(&eig, &psi, gamma, &f, Dynamics::Hamiltonian).unwrap();
            assert!(rel(closed, expected) < 1e-10);
            let quad = smoothing_quadrature(&eig, &psi, gamma, &f, Dynamics::Hamiltonian, 64).unwrap();
            assert!(rel(quad, expected) < 1e-10);
        }
    }
}

#[test]
fn quadrature_converges_at_second_order_for_mixed_states() {
    let eig = fd_system(&PotentialSpec::BracketPower { k: 4.0 }, 8.0, 0.01, 20);
    let psi = indicator(&eig);
    let mut r = rng(5);
    let f = random_coefficients(&mut r, eig.count());
    let exact = smoothing_closed_form(&eig, &psi, 0.5, &f, Dynamics::Hamiltonian).unwrap();
    let errs: Vec<f64> = [64usize, 128, 256, 512]
        .iter()
        .map(|&m| (smoothing_quadrature(&eig, &psi, 0.5, &f, Dynamics::Hamiltonian, m).unwrap() - exact).abs())
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    let order = (errs[2] / errs[3]).log2();
    assert!((order - 2.0).abs() < 0.2, "order {order}, errors {errs:?}");
}

#[test]
fn parseval_identity_for_entire_part_dynamics() {
    for spec in [PotentialSpec::Harmonic, PotentialSpec::BracketPower { k: 4.0 }] {
        let eig = fd_system(&spec, 10.0, 0.01, 60);
        let psi = indicator(&eig);
        let index = bin_spectrum(&eig).unwrap();
        let mut r = rng(21);
        for _ in 0..20 {
            let f = random_coefficients(&mut r, eig.count());
            let (lhs, rhs) = parseval_identity_a(&eig, &psi, 0.5, &f, &index).unwrap();
            assert!(rel(lhs, rhs) < 1e-10, "{spec:?}: {lhs} vs {rhs}");
        }
        let f = random_coefficients(&mut r, eig.count());
        assert!(rel(projected_norm_sqr(&index, &f), f.norm_sqr()) < 1e-14);
    }
}

#[test]
fn single_window_reduces_to_bin_norm() {
    // f supported in one window: S_A(f) = √(2π)⟨N⟩^{γ/2}‖ΨP_N f‖
    let eig = fd_system(&PotentialSpec::Zero, PI / 2.0, PI / 400.0, 30);
    let psi = indicator(&eig);
    let index = bin_spectrum(&eig).unwrap();
    let form = SmoothingForm::new(&eig, &psi, 0.5, Dynamics::EntirePart, WeightMode::EntirePart).unwrap();
    let rep = weighted_decay(&eig, &psi, &index).unwrap();
    for bin in rep.bins.iter().take(10) {
        let mut f = CoefficientVector::zeros(eig.count());
        f.as_mut_slice()[bin.modes[0]] = Complex64::new(0.6, -0.8);
        let s = form.value(&f).unwrap();
        let expected = (2.0 * PI).sqrt() * japanese_bracket(bin.n_bin as f64).powf(0.25) * bin.op_norm;
        assert!(rel(s, expected) < 1e-12);
    }
}

#[test]
fn duhamel_bound_holds_for_random_states() {
    let box_eig = fd_system(&PotentialSpec::Zero, PI / 2.0, PI / 400.0, 40);
    let quartic = fd_system(&PotentialSpec::BracketPower { k: 4.0 }, 8.0, 0.01, 40);
    for eig in [&box_eig, &quartic] {
        let psi = indicator(eig);
        let mut r = rng(8);
        for _ in 0..20 {
            let f = random_coefficients(&mut r, eig.count());
            let rep = duhamel_discrepancy(eig, &psi, 0.5, &f, 64).unwrap();
            assert!(rep.holds, "{rep:?}");
            assert!(rep.discrepancy <= rep.bound * (1.0 + 1e-12) + 1e-14);
        }
    }
}

#[test]
fn duhamel_discrepancy_vanishes_for_integer_spectrum() {
    let grid = build_grid(12.0, 2399).unwrap();
    let eig = EigenSystem::harmonic_exact(&grid, 30).unwrap();
    let psi = indicator(&eig);
    let mut r = rng(2);
    for _ in 0..5 {
        let f = random_coefficients(&mut r, eig.count());
        let rep = duhamel_discrepancy(&eig, &psi, 0.5, &f, 64).unwrap();
        assert_eq!(rep.discrepancy, 0.0);
        assert_eq!(rep.defect_norm, 0.0);
    }
}

#[test]
fn weight_ratio_is_bounded_by_two_to_the_half_gamma() {
    let eig = fd_system(&PotentialSpec::BracketPower { k: 4.0 }, 8.0, 0.01, 80);
    for gamma in [0.25, 0.5, 1.0, 2.0] {
        let b = weight_ratio_bound(&eig, gamma);
        assert!(b >= 1.0 && b <= 2f64.powf(gamma / 2.0), "gamma {gamma}: {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn value_sqr_is_nonnegative_and_bounded(
        re in prop::collection::vec(-1.0f64..1.0, 12),
        im in prop::collection::vec(-1.0f64..1.0, 12),
        gamma in 0.0f64..2.0,
    ) {
        let eig = fd_system(&PotentialSpec::Harmonic, 6.0, 0.05, 12);
        let psi = sample_weight(&WeightSpec::Gaussian { width: 1.2 }, eig.grid()).unwrap();
        let form = SmoothingForm::new(&eig, &psi, gamma, Dynamics::Hamiltonian, WeightMode::Hamiltonian).unwrap();
        let f = CoefficientVector::new(re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect()).unwrap();
        let s2 = form.value_sqr(&f).unwrap();
        let top = form.constant().unwrap().top_eigenvalue;
        prop_assert!(s2 >= 0.0);
        prop_assert!(s2 <= top * f.norm_sqr() * (1.0 + 1e-9) + 1e-14);
    }
}
