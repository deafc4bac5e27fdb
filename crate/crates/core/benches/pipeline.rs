use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use goldcert::factor::{factor_mersenne_exec, DEFAULT_RHO_BUDGET};
use goldcert::good::scan_good_exec;
use goldcert::sweep::{sweep, SweepConfig};
use goldcert::{decompose, DecomposeConfig, Execution, FactorTable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn bench_sweep(c: &mut Criterion) {
    let table = FactorTable::bundled();
    let mut g = c.benchmark_group("sweep_to_249");
    g.sample_size(10);
    for (name, exec) in MODES {
        let cfg = SweepConfig {
            max: 249,
            table: Some(table.clone()),
            exec,
            ..Default::default()
        };
        g.bench_function(name, |b| b.iter(|| black_box(sweep(&cfg))));
    }
    g.finish();
}

fn bench_scan_good(c: &mut Criterion) {
    let mut g = c.benchmark_group("scan_good_to_400");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| black_box(scan_good_exec(400, None, exec))));
    }
    g.finish();
}

fn bench_factor(c: &mut Criterion) {
    // many cyclotomic parts, each factored on its own task
    let mut g = c.benchmark_group("factor_rho");
    g.sample_size(10);
    for n in [105u64, 135] {
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &n, |b, &n| {
                b.iter(|| {
                    let mut rng = ChaCha8Rng::seed_from_u64(n);
                    black_box(factor_mersenne_exec(n, None, DEFAULT_RHO_BUDGET, &mut rng, exec))
                })
            });
        }
    }
    g.finish();
}

fn bench_decompose(c: &mut Criterion) {
    // the parity pool for large n is the parallel part of a single run
    let table = FactorTable::bundled();
    let mut g = c.benchmark_group("decompose_single");
    for n in [223u64, 249] {
        let f = goldcert::factor_mersenne(n, Some(&table), 0, &mut ChaCha8Rng::seed_from_u64(0));
        for (name, exec) in MODES {
            let cfg = DecomposeConfig { exec, ..Default::default() };
            g.bench_with_input(BenchmarkId::new(name, n), &n, |b, &n| {
                b.iter(|| black_box(decompose(n, &f, &cfg).unwrap()))
            });
        }
    }
    g.finish();
}

criterion_group!(benches, bench_sweep, bench_scan_good, bench_factor, bench_decompose);
criterion_main!(benches);
