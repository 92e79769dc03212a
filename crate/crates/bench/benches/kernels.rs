use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use dyadtf::enumerate_dyadic;
use dyadtf::harness::checks::{cascade_symbol_a, cascade_symbol_b, random_sequence};
use dyadtf::maximal::{maximal_function, ScaleWindow};
use dyadtf::model::{model_operator, oracle_model_operator};
use dyadtf::multiplier::{apply_multiplier, special_symbol_cascade, MultiplierOptions};
use dyadtf::size_energy::stopping_time_maximal;
use dyadtf::stopping::{level_set_decomposition_1d, Fraction};
use dyadtf::wavelets::HaarPyramid;
use dyadtf::ModelKind;
use dyadtf_bench::{grid, noise, signal, small_spec};

fn haar_pyramid(c: &mut Criterion) {
    let mut group = c.benchmark_group("haar_pyramid");
    for m in [8, 12] {
        let f = signal(grid(0, m));
        group.bench_with_input(BenchmarkId::from_parameter(m), &f, |b, f| b.iter(|| HaarPyramid::new(black_box(f))));
    }
    group.finish();
}

fn maximal(c: &mut Criterion) {
    let g = grid(0, 10);
    let f = signal(g);
    c.bench_function("maximal_function/m10", |b| b.iter(|| maximal_function(black_box(&f), ScaleWindow::full(g)).unwrap()));
}

fn decompositions(c: &mut Criterion) {
    let g = grid(4, 10);
    let f = signal(g).abs();
    let coll = enumerate_dyadic(g.box_exp, g.cell_scale(), g.box_exp);
    c.bench_function("level_set_decomposition_1d/J4m10", |b| {
        b.iter(|| level_set_decomposition_1d(&coll, black_box(&f), 1.0, 1024.0, Fraction::TENTH).unwrap())
    });
    let (seq, coll) = random_sequence(3, 0, 6);
    c.bench_function("stopping_time_maximal/depth6", |b| {
        b.iter(|| stopping_time_maximal(black_box(&seq), &coll, true, 4.0).unwrap())
    });
}

fn model_operators(c: &mut Criterion) {
    let g = grid(0, 4);
    let five = noise(g);
    let mut group = c.benchmark_group("model_operator");
    for model in [ModelKind::Flag0Paraproduct, ModelKind::Flag0Flag0] {
        let spec = small_spec(model);
        group.bench_function(BenchmarkId::new("fast", model.name()), |b| {
            b.iter(|| model_operator(&spec, black_box(five.inputs())).unwrap())
        });
        group.bench_function(BenchmarkId::new("oracle", model.name()), |b| {
            b.iter(|| oracle_model_operator(&spec, black_box(five.inputs())).unwrap())
        });
    }
    group.finish();
}

fn multipliers(c: &mut Criterion) {
    let g = grid(0, 5);
    let five = noise(g);
    let (a, s) = (cascade_symbol_a(), cascade_symbol_b());
    let opts = MultiplierOptions::default();
    c.bench_function("apply_multiplier/N32", |b| b.iter(|| apply_multiplier(&a, &s, &opts, black_box(five.inputs())).unwrap()));
    c.bench_function("special_symbol_cascade/N32", |b| {
        b.iter(|| special_symbol_cascade(&a, &s, opts.gap, black_box(five.inputs())).unwrap())
    });
}

criterion_group!(kernels, haar_pyramid, maximal, decompositions, model_operators, multipliers);
criterion_main!(kernels);
