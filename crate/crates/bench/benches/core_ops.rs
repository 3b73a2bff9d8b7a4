use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use conjdense::conjugacy::{certify_conjugate, ConjugacyParams};
use conjdense::independence::{well_deviation, SetFamily};
use conjdense::measure::GridMap;
use conjdense::rational::ratio;
use conjdense::symbolic::{AtomUnion, BernoulliShift};
use conjdense::towers::{approximation_accuracy, build_tower};
use conjdense_bench::{half_set, random_map, space};

fn set_ops(c: &mut Criterion) {
    let mut group = c.benchmark_group("cell_sets");
    for log2 in [12u32, 16] {
        let a = half_set(log2, 1);
        let b = half_set(log2, 2);
        group.bench_with_input(BenchmarkId::new("symmetric_difference_measure", log2), &log2, |bench, _| {
            bench.iter(|| black_box(&a).symmetric_difference_measure(black_box(&b)).unwrap())
        });
        let map = random_map(log2, 3);
        group.bench_with_input(BenchmarkId::new("correlation_n5", log2), &log2, |bench, _| {
            bench.iter(|| map.correlation(black_box(5), &a, &b).unwrap())
        });
    }
    group.finish();
}

fn cylinder_calculus(c: &mut Criterion) {
    let a = AtomUnion::new(2, (0..32).step_by(3)).unwrap();
    let b = AtomUnion::new(2, (0..32).step_by(5)).unwrap();
    c.bench_function("bernoulli_correlation_rank2", |bench| {
        bench.iter(|| BernoulliShift.correlation(black_box(1), &a, &b))
    });
}

fn independence_scan(c: &mut Criterion) {
    let map = GridMap::hash_scrambler(space(14));
    let family = SetFamily::orbit(&map, &half_set(14, 4), 3).unwrap();
    c.bench_function("well_deviation_2^14_M3_c4", |bench| bench.iter(|| well_deviation(&family, 4).unwrap()));
}

fn conjugacy_pipeline(c: &mut Criterion) {
    let map = GridMap::hash_scrambler(space(14));
    let params = ConjugacyParams {
        k: 0,
        epsilon: ratio(1, 2),
        window: 3,
        independence_window: 3,
        seed: 20240601,
        trials: 64,
    };
    let mut group = c.benchmark_group("conjugacy");
    group.sample_size(10);
    group.bench_function("certify_2^14_k0_W3", |bench| bench.iter(|| certify_conjugate(&map, &params).unwrap()));
    group.finish();
}

fn towers(c: &mut Criterion) {
    let map = random_map(12, 5);
    let a = half_set(12, 6);
    c.bench_function("build_tower_2^12_h8", |bench| bench.iter(|| build_tower(&map, black_box(8)).unwrap()));
    let tower = build_tower(&map, 8).unwrap();
    c.bench_function("approximation_accuracy_2^12_h8", |bench| {
        bench.iter(|| approximation_accuracy(&tower, &a).unwrap())
    });
}

criterion_group!(benches, set_ops, cylinder_calculus, independence_scan, conjugacy_pipeline, towers);
criterion_main!(benches);
