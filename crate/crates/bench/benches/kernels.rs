use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use psdyn::beam::{beam_field, build_beam_cache, LagrangianChart};
use psdyn::*;

fn variational(c: &mut Criterion) {
    let model = HamiltonianModel::harmonic();
    c.bench_function("variational t=1", |b| {
        b.iter(|| {
            integrate_variational(&model, &PhasePoint::new1(0.3, -0.2), 1.0, DEFAULT_DT).unwrap()
        })
    });
}

fn transform(c: &mut Criterion) {
    let hbar = 0.1;
    let data = GaussianWkb::scenario();
    let grid = GridSpec::square(-4.0, 4.0, 41).unwrap();
    let quad = TransformQuadrature::for_wkb(&data);
    let psi = |x: f64| data.psi0(&[x], hbar);
    c.bench_function("transform 41x41", |b| {
        b.iter(|| wave_packet_transform(&psi, &grid, hbar, &quad).unwrap())
    });
}

fn aga(c: &mut Criterion) {
    let hbar = 0.1;
    let targets = GridSpec::square(-3.0, 3.0, 31).unwrap();
    let quad = PhaseSpaceQuadrature::square(-5.5, 5.5);
    let psi0 = |q: f64, p: f64| exact_value(ScenarioKind::Free, q, p, 0.0, hbar);
    let model = HamiltonianModel::linear_field();
    let mut g = c.benchmark_group("propagation");
    g.sample_size(10);
    g.bench_function("aga 31x31", |b| {
        b.iter(|| propagate_aga(&psi0, &targets, 0.5, &model, hbar, &quad, DEFAULT_DT).unwrap())
    });
    g.bench_function("frozen 31x31", |b| {
        b.iter(|| propagate_frozen(&psi0, &targets, 0.5, &model, hbar, &quad, DEFAULT_DT).unwrap())
    });
    g.finish();
}

fn beam(c: &mut Criterion) {
    let chart = LagrangianChart::new(Arc::new(GaussianWkb::scenario()), (-4.0, 4.0)).unwrap();
    let model = HamiltonianModel::harmonic();
    let cache = build_beam_cache(&chart, 512, 0.5, DEFAULT_DT, &model).unwrap();
    let grid = GridSpec::square(-2.0, 2.0, 21).unwrap();
    let mut g = c.benchmark_group("beam");
    g.sample_size(10);
    g.bench_function("cache 512", |b| {
        b.iter(|| build_beam_cache(&chart, 512, 0.5, DEFAULT_DT, &model).unwrap())
    });
    g.bench_function("field 21x21", |b| {
        b.iter(|| beam_field(&cache, &grid, 0.5, 0.05).unwrap())
    });
    g.finish();
}

criterion_group!(benches, variational, transform, aga, beam);
criterion_main!(benches);
