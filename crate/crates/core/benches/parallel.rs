//! Compares the rayon backend on the default pool against a single worker.
//! Built with `--no-default-features`, the same workloads run through the
//! sequential fallback instead.

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use strongsec::codec::{estimate_error, CodeParams, Epsilons, EstimationMode};
use strongsec::presets;
use strongsec::region::{optimize_region, RatePoint, SearchConfig};
use strongsec::typicality::lemma2_bound_check;

type Workload = Box<dyn Fn() + Send + Sync>;

fn workloads() -> Vec<(&'static str, Workload)> {
    let scheme = presets::orthogonal_scheme();
    let ch = presets::orthogonal_noisy_channel(0.05, 0.05);
    let rates = RatePoint::new(0.3, 0.3, 0.05, 0.05, 0.05).unwrap();
    let params = CodeParams::new(30, rates, Epsilons::default(), 1).unwrap();
    let search_ch = presets::binary_bsc_broadcast(0.1, 0.3);
    let search = SearchConfig { restarts: 24, sweeps: 10, ..SearchConfig::default() };
    let joint = presets::random_v1v2y2(&mut rand_chacha::ChaCha8Rng::seed_from_u64(3));
    vec![
        (
            "ensemble_error",
            Box::new(move || {
                estimate_error(&scheme, &ch, &params, 200, EstimationMode::Ensemble).unwrap();
            }),
        ),
        (
            "region_search",
            Box::new(move || {
                optimize_region(&search_ch, &search).unwrap();
            }),
        ),
        (
            "output_bound_check",
            Box::new(move || {
                lemma2_bound_check(&joint, 7, 0.1, None).unwrap();
            }),
        ),
    ]
}

#[cfg(feature = "rayon")]
fn backends(c: &mut Criterion) {
    use criterion::BenchmarkId;
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let threads = rayon::current_num_threads();
    for (name, work) in workloads() {
        let mut group = c.benchmark_group(name);
        group.sample_size(10);
        group.bench_function(BenchmarkId::new("rayon-pool", threads), |b| b.iter(&work));
        group.bench_function(BenchmarkId::new("rayon-single", 1), |b| b.iter(|| single.install(&work)));
        group.finish();
    }
}

#[cfg(not(feature = "rayon"))]
fn backends(c: &mut Criterion) {
    for (name, work) in workloads() {
        let mut group = c.benchmark_group(name);
        group.sample_size(10);
        group.bench_function("sequential", |b| b.iter(&work));
        group.finish();
    }
}

criterion_group!(benches, backends);
criterion_main!(benches);
