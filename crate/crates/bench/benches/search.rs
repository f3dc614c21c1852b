use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mrq_bench::fixture;
use mrq_core::{brute_force, SearchMode, SearchParams};

fn search(c: &mut Criterion) {
    let f = fixture(20_000, 256, 48, 64);
    let mut group = c.benchmark_group("search");
    let mut qi = 0;
    let mut next = |f: &mrq_bench::Fixture| {
        qi = (qi + 1) % f.queries.rows();
        f.queries.row(qi).to_vec()
    };
    for mode in [
        SearchMode::Full,
        SearchMode::NoCorrection,
        SearchMode::ExactOnly,
    ] {
        for nprobe in [4, 16] {
            let params = SearchParams::for_index(&f.index, 20, nprobe).with_mode(mode);
            group.bench_with_input(
                BenchmarkId::new(mode.to_string(), nprobe),
                &params,
                |b, p| {
                    b.iter_batched(
                        || next(&f),
                        |q| f.index.search(&q, black_box(p)).unwrap(),
                        criterion::BatchSize::SmallInput,
                    )
                },
            );
        }
    }
    group.bench_function("brute_force", |b| {
        b.iter_batched(
            || next(&f),
            |q| brute_force(&q, &f.data, 20),
            criterion::BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(benches, search);
criterion_main!(benches);
