//! Single-threaded vs pooled Monte Carlo. Build with
//! `--no-default-features` to measure the sequential fallback itself.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use steinpp::bounds::{mc_bound_theorem21, Metric};
use steinpp::harness::{verify, ExperimentConfig};
use steinpp::par::with_threads;
use steinpp::processes::{IndicatorCoupling, IndicatorModel};
use steinpp::SeededStream;

const POOLS: [(&str, Option<usize>); 2] = [("1-thread", Some(1)), ("pool", None)];

fn palm_mc(c: &mut Criterion) {
    let pc = IndicatorCoupling::new(IndicatorModel::bernoulli(vec![0.05; 40]).unwrap()).unwrap();
    let mut g = c.benchmark_group("palm_mc_bernoulli");
    for metric in [Metric::Dtv, Metric::D2] {
        for (name, threads) in POOLS {
            g.bench_with_input(BenchmarkId::new(name, metric), &metric, |b, &m| {
                b.iter(|| {
                    with_threads(threads, || {
                        mc_bound_theorem21(&pc, m, 20_000, SeededStream::new(1, 0)).unwrap().value
                    })
                })
            });
        }
    }
    g.finish();
}

fn renewal_verify(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::from_json(include_str!("../../../configs/renewal.json")).unwrap();
    cfg.replicates = 20_000;
    let mut g = c.benchmark_group("verify_renewal");
    g.sample_size(10);
    for (name, threads) in POOLS {
        g.bench_function(name, |b| {
            b.iter(|| with_threads(threads, || black_box(verify(&cfg).unwrap().rows.len())))
        });
    }
    g.finish();
}

criterion_group!(benches, palm_mc, renewal_verify);
criterion_main!(benches);
