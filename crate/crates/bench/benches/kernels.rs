use std::hint::black_box;

use chb_core::solver::{Preset, PresetParams};
use chb_core::{Boundary, DiskGrid, GraphSpec, NormToolkit, Solver, SolverConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn resolvent(c: &mut Criterion) {
    let mut group = c.benchmark_group("resolvent");
    let samples: Vec<f64> = (0..1000).map(|k| -3.0 + 6.0 * k as f64 / 999.0).collect();
    let graphs = [
        ("cubic", GraphSpec::CUBIC),
        ("logarithmic", GraphSpec::Logarithmic { scale: 1.0 }),
        ("obstacle", GraphSpec::DoubleObstacle { lower: -1.0, upper: 1.0 }),
    ];
    for (name, g) in graphs {
        group.bench_function(name, |b| {
            b.iter(|| samples.iter().map(|&r| g.resolvent(black_box(r), 1e-3).unwrap()).sum::<f64>())
        });
    }
    group.finish();
}

fn dual_norms(c: &mut Criterion) {
    let mut group = c.benchmark_group("dual_norm_bulk");
    for (n_r, n_theta) in [(16, 32), (32, 64), (64, 128)] {
        let grid = DiskGrid::new(n_r, n_theta).unwrap();
        let norms = NormToolkit::new(&grid);
        let z = grid.bulk_from_fn(|r, t| r * r * (2.0 * t).cos() + r.powi(3) * t.sin());
        let mean = grid.mean_bulk(&z).unwrap();
        let z = z.map(|x| x - mean);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n_r}x{n_theta}")), &z, |b, z| {
            b.iter(|| norms.dual_norm_bulk(black_box(z)).unwrap())
        });
    }
    group.finish();

    let grid = DiskGrid::new(64, 128).unwrap();
    let u = grid.bulk_from_fn(|r, t| r * t.cos());
    let v = grid.trace_from_fn(|t| t.cos());
    c.bench_function("laplacian_bulk/64x128", |b| {
        b.iter(|| grid.laplacian_bulk(black_box(&u), Boundary::Dirichlet(&v)).unwrap())
    });
}

fn solver_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("solver_step");
    group.sample_size(10);
    for (n_r, n_theta) in [(16, 32), (32, 64)] {
        let grid = DiskGrid::new(n_r, n_theta).unwrap();
        let problem = Preset::Cubic.spec(&PresetParams::default()).build(&grid, 0).unwrap();
        let mut solver = Solver::new(&problem, SolverConfig::new(0.1, 1e-3, 1e-3, 1.0)).unwrap();
        let state = solver.initial_state().unwrap();
        // the first step builds the cached factorization
        let state = solver.step(&state).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n_r}x{n_theta}")), &state, |b, s| {
            b.iter(|| solver.step(black_box(s)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, resolvent, dual_norms, solver_step);
criterion_main!(benches);
