//! Criterion benchmarks for the forward solver, the adjoint solve, assembly
//! and one conjugate-gradient step.

use std::hint::black_box;

use criterion::{BenchmarkId, Criterion};
use subdiff::harness::{make_example, ExampleId};
use subdiff::inversion::{CgState, InverseProblem};
use subdiff::{
    build_mesh, cq_weights, solve_direct, trace_top, BcVariant, CoefficientSet, ForwardModel,
    Mesh2D, SourceGrid,
};

fn model(id: ExampleId, m: usize, n: usize) -> (ForwardModel, SourceGrid) {
    let example = make_example(id, 1.0).expect("example");
    let model = ForwardModel::build(m, n, 1.0, 0.5, example.coeffs.clone()).expect("model");
    let f = example.f_dagger(&model);
    (model, f)
}

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assembly");
    let coeffs: CoefficientSet = make_example(ExampleId::Ex52i, 1.0).expect("example").coeffs;
    for m in [32, 64] {
        let mesh: Mesh2D = build_mesh(m).expect("mesh");
        group.bench_with_input(BenchmarkId::new("stiffness", m), &mesh, |b, mesh| {
            b.iter(|| {
                subdiff::assemble_stiffness(black_box(mesh), &coeffs, 0.5).expect("stiffness")
            })
        });
    }
    group.finish();
}

fn weights(c: &mut Criterion) {
    c.bench_function("cq_weights/10000", |b| {
        b.iter(|| cq_weights(black_box(0.5), 10_000))
    });
}

fn forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward");
    group.sample_size(10);
    for (id, m, n) in [(ExampleId::Ex51, 24, 200), (ExampleId::Ex52i, 24, 200)] {
        let (model, f) = model(id, m, n);
        group.bench_function(BenchmarkId::new(id.as_str(), format!("M{m}_N{n}")), |b| {
            b.iter(|| solve_direct(&model, black_box(&f), BcVariant::Ispn, None).expect("solve"))
        });
    }
    group.finish();
}

fn adjoint(c: &mut Criterion) {
    let mut group = c.benchmark_group("adjoint");
    group.sample_size(10);
    let (model, f) = model(ExampleId::Ex52i, 24, 200);
    let u = solve_direct(&model, &f, BcVariant::Ispn, None).expect("solve");
    let residual = trace_top(&u, model.mesh()).values;
    group.bench_function("5.2i/M24_N200", |b| {
        b.iter(|| model.solve_adjoint(black_box(&residual)).expect("adjoint"))
    });
    group.finish();
}

fn cg_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("cg");
    group.sample_size(10);
    let (model, f) = model(ExampleId::Ex51, 24, 200);
    let u = solve_direct(&model, &f, BcVariant::Ispn, None).expect("solve");
    let obs = trace_top(&u, model.mesh());
    let problem = InverseProblem::new(&model, &obs).expect("problem");
    group.bench_function("step/5.1/M24_N200", |b| {
        b.iter_batched(
            || CgState::new(&problem, None).expect("state"),
            |mut state| state.step(&problem).expect("step"),
            criterion::BatchSize::LargeInput,
        )
    });
    group.finish();
}

pub fn benchmarks(c: &mut Criterion) {
    assembly(c);
    weights(c);
    forward(c);
    adjoint(c);
    cg_step(c);
}
