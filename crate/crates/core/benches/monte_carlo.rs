use criterion::{criterion_group, criterion_main, Criterion};
use soseq::harness::properties::smoke_config;
use soseq::harness::{run_scenario, Execution, RunOptions};

fn monte_carlo(c: &mut Criterion) {
    let mut cfg = smoke_config();
    cfg.runs = 8;
    let mut group = c.benchmark_group("smoke-8-runs");
    group.sample_size(10);
    for (name, execution) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        let opts = RunOptions { execution, timing: false };
        group.bench_function(name, |b| b.iter(|| run_scenario(&cfg, opts).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, monte_carlo);
criterion_main!(benches);
