use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hybridplan::{run, CheckCache, DomainKind, EnumerationConfig, Mode, StrategySpec};
use hybridplan_bench::{horizon, suite};

fn strategies(c: &mut Criterion) {
    let mut group = c.benchmark_group("strategies");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    for kind in [DomainKind::Locomotion, DomainKind::Manipulation] {
        let config = EnumerationConfig {
            mode: Mode::First,
            horizon_max: Some(horizon(kind)),
            timeout: Duration::from_secs(60),
            ..EnumerationConfig::default()
        };
        for (name, inst) in suite(kind, 2) {
            let hp = inst.build().unwrap();
            for spec in ["pre+int", "int", "filt", "repl"] {
                let s: StrategySpec = spec.parse().unwrap();
                group.bench_with_input(BenchmarkId::new(spec, &name), &hp, |b, hp| {
                    b.iter(|| run(hp, &s, &config, &CheckCache::new()).unwrap())
                });
            }
        }
    }
    group.finish();
}

criterion_group!(benches, strategies);
criterion_main!(benches);
