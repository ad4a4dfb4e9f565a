use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use specsmooth_bench::quartic_hamiltonian;
use specsmooth_core::smoothing::smoothing_constant;
use specsmooth_core::{eigen_lowest, kernel_f, sample_weight, Dynamics, KernelMethod, WeightMode, WeightSpec};
use std::hint::black_box;

fn bench_eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigen_lowest");
    group.sample_size(10);
    let ham = quartic_hamiltonian(10.0, 0.005);
    for count in [50usize, 200] {
        group.bench_with_input(BenchmarkId::from_parameter(count), &count, |b, &count| {
            b.iter(|| eigen_lowest(black_box(&ham), count).unwrap())
        });
    }
    group.finish();
}

fn bench_smoothing(c: &mut Criterion) {
    let mut group = c.benchmark_group("smoothing_constant");
    group.sample_size(10);
    let ham = quartic_hamiltonian(10.0, 0.01);
    let eig = eigen_lowest(&ham, 100).unwrap();
    let psi = sample_weight(&WeightSpec::Indicator { a: -1.0, b: 1.0 }, eig.grid()).unwrap();
    for (name, dynamics) in [("hamiltonian", Dynamics::Hamiltonian), ("entire_part", Dynamics::EntirePart)] {
        group.bench_function(name, |b| {
            b.iter(|| smoothing_constant(&eig, black_box(&psi), 0.5, dynamics, WeightMode::Hamiltonian).unwrap())
        });
    }
    group.finish();
}

fn bench_kernel(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel_f");
    for (name, method) in [("closed_form", KernelMethod::ClosedForm), ("quadrature", KernelMethod::Quadrature)] {
        group.bench_function(name, |b| b.iter(|| kernel_f(black_box(50), black_box(7.3), method).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_eigen, bench_smoothing, bench_kernel);
criterion_main!(benches);
