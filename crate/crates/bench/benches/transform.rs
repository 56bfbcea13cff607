// SPDX-License-Identifier: Apache-2.0

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use spt_core::generate::paired_instance;
use spt_core::{djk_route, transform_spm, SwitchId};

fn bench_transform(c: &mut Criterion) {
    let mut group = c.benchmark_group("transform_spm");
    for n in [11u32, 50, 100, 200, 400] {
        for m in [2u32, 10] {
            let (topo, spm) = paired_instance(n, m, 7);
            group.bench_with_input(BenchmarkId::new(format!("m{m}"), n), &n, |b, _| {
                b.iter(|| transform_spm(black_box(&spm), black_box(&topo)))
            });
        }
    }
    group.finish();
}

fn bench_route(c: &mut Criterion) {
    let mut group = c.benchmark_group("djk_route");
    for n in [50u32, 200] {
        let (topo, _) = paired_instance(n, 1, 7);
        let far = SwitchId(n / 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| djk_route(black_box(&topo), SwitchId(1), far))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_transform, bench_route);
criterion_main!(benches);
