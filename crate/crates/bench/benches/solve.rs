use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use prpca_bench::instance;
use prpca_core::{default_penalties, projector_pair, solve, PairKind, SolveConfig};
use std::hint::black_box;

fn solve_by_kind(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for n in [60, 100] {
        let inst = instance(n, 2);
        let (l1, l2) = default_penalties(n, 0.6).unwrap();
        for kind in [PairKind::Identity, PairKind::Single, PairKind::Double] {
            let pair = projector_pair(kind, n, n).unwrap();
            // fixed iteration budget so kinds are compared per step
            let cfg = SolveConfig::new(&inst.z, &pair, l1, l2)
                .max_iters(50)
                .rel_tol(1e-300);
            group.bench_function(BenchmarkId::new(kind.as_str(), n), |b| {
                b.iter(|| solve(black_box(&cfg)))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, solve_by_kind);
criterion_main!(benches);
