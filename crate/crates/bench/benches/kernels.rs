use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;
use rand::Rng;
use std::hint::black_box;

use floodda::catchment::{make_synthetic_catchment, SyntheticSpec};
use floodda::enkf::kalman_gain;
use floodda::flood_extent::{majority_filter, BinaryFloodRaster, RasterGeometry};
use floodda::harness::spin_up;
use floodda::rng::stream;
use floodda::swe::Solver;
use floodda::{ControlVector, PhysicsParams};

fn solver_step(c: &mut Criterion) {
    let catchment = make_synthetic_catchment(&SyntheticSpec::default()).unwrap();
    let params = PhysicsParams::default();
    let x = ControlVector::default();
    let state = spin_up(&catchment, &x, &params, 6.0).unwrap();
    let friction = x.friction(&catchment.zoning);
    let mut solver = Solver::new(&catchment.grid, &friction, params, Some(&catchment.boundary)).unwrap();
    let dt = solver.stable_dt(&state).unwrap();
    c.bench_function("solver_step_20x7", |b| {
        b.iter_batched_ref(
            || state.clone(),
            |s| solver.advance(s, black_box(dt)).unwrap(),
            criterion::BatchSize::SmallInput,
        )
    });
}

fn gain(c: &mut Criterion) {
    let mut rng = stream(1, "bench", &[]);
    let x = DMatrix::from_fn(7, 24, |_, _| rng.random::<f64>());
    let y = DMatrix::from_fn(144, 24, |_, _| rng.random::<f64>());
    let r = vec![0.01; 144];
    c.bench_function("kalman_gain_7x24_144obs", |b| b.iter(|| kalman_gain(black_box(&x), black_box(&y), &r).unwrap()));
}

fn filter(c: &mut Criterion) {
    let g = RasterGeometry { ncols: 400, nrows: 300, xll: 0.0, yll: 0.0, cellsize: 10.0 };
    let mut rng = stream(2, "bench", &[]);
    let mut r = BinaryFloodRaster::filled(g, false);
    for p in r.pixels.iter_mut() {
        *p = Some(rng.random_bool(0.4));
    }
    c.bench_function("majority_filter_400x300", |b| b.iter(|| majority_filter(black_box(&r), 3).unwrap()));
}

criterion_group!(benches, solver_step, gain, filter);
criterion_main!(benches);
