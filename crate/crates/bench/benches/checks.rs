use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use hybridplan::checks::{enumerate_input_space, l_bal, l_pay, l_rob, CheckCache};
use hybridplan::geometry::{convex_hull, Point};
use hybridplan::strategies::precompute;
use hybridplan::DomainKind;
use hybridplan_bench::suite;
use std::hint::black_box;

fn primitives(c: &mut Criterion) {
    let legs = [Point::new(0i64, 0), Point::new(4, 1), Point::new(3, 5), Point::new(-1, 3)];
    c.bench_function("l_bal", |b| b.iter(|| l_bal(black_box(&legs), black_box(Point::new(2, 2)))));
    let pts: Vec<Point<i64>> = (0..64).map(|i| Point::new((i * 37) % 23, (i * 11) % 19)).collect();
    c.bench_function("convex_hull_64", |b| b.iter(|| convex_hull(black_box(&pts))));
    let obstacles: Vec<(i64, i64)> = (0..20).map(|i| (i % 7, i / 3)).collect();
    let seg = (Point::new(0.5, 0.5), Point::new(2.5, 2.5));
    c.bench_function("l_pay", |b| b.iter(|| l_pay(black_box(seg), black_box(seg), &obstacles, 0)));
    c.bench_function("l_rob", |b| {
        b.iter(|| l_rob(black_box(Point::new(2.5, 3.5)), Point::new(4.5, 3.5), Point::new(-0.5, 3.5), Point::new(7.5, 3.5), 3.5))
    });
}

fn precomputation(c: &mut Criterion) {
    for kind in [DomainKind::Locomotion, DomainKind::Manipulation] {
        let (name, inst) = suite(kind, 1).remove(0);
        let hp = inst.build().unwrap();
        for m in hp.modules.iter().filter(|m| enumerate_input_space(m.as_ref()).is_ok()) {
            c.bench_function(&format!("precompute/{name}/{}", m.id()), |b| {
                b.iter_batched(CheckCache::new, |cache| precompute(&cache, m.as_ref()).unwrap(), BatchSize::SmallInput)
            });
        }
    }
}

criterion_group!(benches, primitives, precomputation);
criterion_main!(benches);
