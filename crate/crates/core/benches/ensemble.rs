use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use supersde::drift::{drift, synth_random_besov};
use supersde::besov::{BesovIndex, Mollifier};
use supersde::par::Execution;
use supersde::sde::{checkpoint_steps, simulate_checkpoints, DriftSampler, InitialDensity, SimConfig};
use supersde::spectral::{EvalMode, TorusGrid};

fn sampler(n: usize) -> DriftSampler {
    let grid = TorusGrid::new(2, n, 1.0).unwrap();
    let idx = BesovIndex::new(0.8, 8.0, f64::INFINITY).unwrap();
    let a = synth_random_besov(&grid, &idx, 11, 1.0).unwrap().field;
    let a = a.mollify(&Mollifier::new(2, 4.0).unwrap());
    DriftSampler::new(&drift(&a), 1, EvalMode::Multilinear).unwrap()
}

fn ensemble(c: &mut Criterion) {
    let s = sampler(128);
    let dt = 0.25 * s.max_dt().min(1e-3);
    let steps = 200;
    let mut group = c.benchmark_group("euler_maruyama");
    group.sample_size(10);
    for paths in [1_000usize, 8_000] {
        group.throughput(Throughput::Elements((paths * steps) as u64));
        for exec in [Execution::Sequential, Execution::Parallel] {
            let mut cfg = SimConfig::new(dt * steps as f64, dt, paths, 5);
            cfg.execution = exec;
            let at = checkpoint_steps(steps, 4);
            let label = format!("{exec:?}").to_lowercase();
            group.bench_with_input(BenchmarkId::new(label, paths), &cfg, |b, cfg| {
                b.iter(|| simulate_checkpoints(black_box(cfg), &s, &InitialDensity::Uniform, &at).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, ensemble);
criterion_main!(benches);
