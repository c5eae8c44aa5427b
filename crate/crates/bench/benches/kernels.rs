use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use glpattern_core::solvers::linalg::SparseLu;
use glpattern_core::solvers::newton::BorderedSystem;
use glpattern_core::solvers::{evolve, EvolveConfig};
use glpattern_core::spectral::{symbol_table, ModeGrid};
use glpattern_core::{ApModel, Cutoff, GLParams, Grid2D, Inhomogeneity};
use num_complex::Complex64;

fn model(n: usize) -> ApModel {
    let p = GLParams::new(0.3, 0.02, 0.5).unwrap();
    ApModel::with_cutoff(p, &Inhomogeneity::unit_gaussian(), Grid2D::new(20.0, n).unwrap(), Cutoff::wide())
        .unwrap()
}

fn residual_and_jacobian(c: &mut Criterion) {
    let mut group = c.benchmark_group("bordered");
    group.sample_size(10);
    for n in [101, 201] {
        let m = model(n);
        let sys = BorderedSystem::new(&m);
        let z = sys.pack(&m.zero_state());
        group.bench_with_input(BenchmarkId::new("residual", n), &z, |b, z| b.iter(|| sys.residual(z)));
        group.bench_with_input(BenchmarkId::new("jacobian", n), &z, |b, z| b.iter(|| sys.jacobian(z)));
        let jac = sys.jacobian(&z);
        group.bench_with_input(BenchmarkId::new("lu_factor", n), &jac, |b, j| {
            b.iter(|| SparseLu::factor(j).unwrap())
        });
    }
    group.finish();
}

fn evolve_steps(c: &mut Criterion) {
    let p = GLParams::new(0.3, 0.02, 0.5).unwrap();
    let grid = Grid2D::new(20.0, 201).unwrap();
    let a0 = grid.sample_complex(|x, _| Complex64::from_polar(p.tau, p.k * x + p.phi0));
    let cfg = EvolveConfig { dt: 0.1, t_end: 1.0, threshold: 1e-30, snapshot_every: 10.0, ..EvolveConfig::default() };
    let g = Inhomogeneity::unit_gaussian();
    c.bench_function("evolve_10_steps_n201", |b| b.iter(|| evolve(&a0, &p, &g, &grid, &cfg).unwrap()));
}

fn symbols(c: &mut Criterion) {
    let p = GLParams::new(0.3, 0.0, 0.0).unwrap();
    let modes = ModeGrid::standard();
    c.bench_function("symbol_table", |b| b.iter(|| symbol_table(&p, &modes)));
}

criterion_group!(benches, residual_and_jacobian, evolve_steps, symbols);
criterion_main!(benches);
