//! Parallel against sequential execution for the data-parallel kernels.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use mirrorsim::harness::{exp_bipolar_hold, HoldSettings};
use mirrorsim::quasistatics::hysteresis_sweep_with;
use mirrorsim::{DeviceConfig, Execution};

const STRATEGIES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn static_loop(c: &mut Criterion) {
    let device = DeviceConfig::paper_mirror();
    let mut group = c.benchmark_group("hysteresis_sweep");
    for steps in [500usize, 2000] {
        for (name, exec) in STRATEGIES {
            group.bench_with_input(BenchmarkId::new(name, steps), &steps, |b, &steps| {
                b.iter(|| hysteresis_sweep_with(black_box(&device), 100.0, steps, 0.0, exec))
            });
        }
    }
    group.finish();
}

fn hold_arms(c: &mut Criterion) {
    let device = DeviceConfig::paper_mirror();
    let settings = HoldSettings {
        interrupts: 2,
        ..HoldSettings::default()
    };
    let mut group = c.benchmark_group("bipolar_hold");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_function(name, |b| {
            b.iter(|| exp_bipolar_hold(black_box(&device), &settings, exec).expect("hold runs"))
        });
    }
    group.finish();
}

criterion_group!(benches, static_loop, hold_arms);
criterion_main!(benches);
