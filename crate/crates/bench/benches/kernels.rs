use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sgdlab_core::expansion::{u1_eval, Method};
use sgdlab_core::model::{family_by_id, make_ou_reference, observable_by_id};
use sgdlab_core::sde::{em_estimate, LinearOuSde, SdeConfig};
use sgdlab_core::sgd::{mc_estimate, run_trajectory, ChainConfig, VarianceReduction};
use std::hint::black_box;

fn sgd_chain(c: &mut Criterion) {
    let family = family_by_id("example2").unwrap();
    let mut group = c.benchmark_group("sgd_trajectory");
    for n in [40usize, 400] {
        let cfg = ChainConfig::new(0.125, n, vec![1.0], 7);
        group.bench_with_input(BenchmarkId::from_parameter(n), &cfg, |b, cfg| {
            let mut i = 0u64;
            b.iter(|| {
                i += 1;
                black_box(run_trajectory(cfg, &family, i).final_point)
            })
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let family = family_by_id("example1").unwrap();
    let phi = observable_by_id("sin", &family).unwrap();
    let cfg = ChainConfig::new(0.25, 20, vec![1.0], 11).with_variance_reduction(VarianceReduction::Antithetic);
    c.bench_function("mc_estimate_10k_pairs", |b| {
        b.iter(|| black_box(mc_estimate(&cfg, &family, &phi, 10_000).unwrap()))
    });
}

fn first_correction(c: &mut Criterion) {
    let family = family_by_id("example2").unwrap();
    let phi = observable_by_id("sin", &family).unwrap();
    let mut group = c.benchmark_group("u1");
    for method in [Method::ClosedForm, Method::Numeric] {
        group.bench_function(method.as_str(), |b| {
            b.iter(|| black_box(u1_eval(black_box(&[0.8]), 5.0, &phi, &family, method).unwrap()))
        });
    }
    group.finish();
}

fn euler_maruyama(c: &mut Criterion) {
    let reference = make_ou_reference(0.1).unwrap();
    let model = LinearOuSde::for_reference(&reference);
    let phi = observable_by_id("square", &reference.family).unwrap();
    let cfg = SdeConfig::new(0.1, 1.0, vec![1.0], 3);
    c.bench_function("em_ou_2k_paths", |b| {
        b.iter(|| black_box(em_estimate(&cfg, &model, &[&phi], 2_000).unwrap()))
    });
}

criterion_group!(benches, sgd_chain, monte_carlo, first_correction, euler_maruyama);
criterion_main!(benches);
