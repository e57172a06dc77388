use criterion::{black_box, criterion_group, criterion_main, Criterion};

use tabqa_bench::synthetic_table;
use tabqa_core::harness::{perturb, PerturbationPlan};
use tabqa_core::profile::augment_table_deterministic;
use tabqa_core::retrieve::{sample_rows, SamplerConfig};
use tabqa_core::sql::load_into_engine;
use tabqa_core::table::serialize_html;
use tabqa_core::token::count_tokens;
use tabqa_core::FallbackEmbedder;

fn bench_sample_rows(c: &mut Criterion) {
    let table = synthetic_table(500);
    let embedder = FallbackEmbedder;
    c.bench_function("sample_rows_500x5_k3", |b| {
        b.iter(|| {
            sample_rows(
                black_box(&table),
                black_box("which name has the largest value?"),
                SamplerConfig { k: 3 },
                &embedder,
            )
            .unwrap()
        })
    });
}

fn bench_serialize_html(c: &mut Criterion) {
    let table = synthetic_table(200);
    c.bench_function("serialize_html_200x5", |b| {
        b.iter(|| serialize_html(black_box(&table.full_view())))
    });
}

fn bench_tokenizer(c: &mut Criterion) {
    let html = serialize_html(&synthetic_table(200).full_view());
    c.bench_function("count_tokens_200x5_html", |b| {
        b.iter(|| count_tokens(black_box(&html)))
    });
}

fn bench_perturb(c: &mut Criterion) {
    let table = synthetic_table(100);
    let plan = PerturbationPlan::for_table(&table, 4, 7);
    c.bench_function("perturb_100x5_factor4", |b| {
        b.iter(|| perturb(black_box(&table), black_box(&plan)).unwrap())
    });
}

fn bench_engine(c: &mut Criterion) {
    let table = synthetic_table(500);
    let aug = augment_table_deterministic(&table).unwrap();
    let engine = load_into_engine(&table, &aug).unwrap();
    c.bench_function("engine_group_by_500x5", |b| {
        b.iter(|| {
            engine
                .execute(black_box(
                    "SELECT name, count(*), avg(value) FROM t GROUP BY name ORDER BY count(*) DESC LIMIT 5",
                ))
                .unwrap()
        })
    });
    c.bench_function("engine_filter_sort_500x5", |b| {
        b.iter(|| {
            engine
                .execute(black_box(
                    "SELECT name, value FROM t WHERE value > 5000 ORDER BY value DESC LIMIT 10",
                ))
                .unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_sample_rows,
    bench_serialize_html,
    bench_tokenizer,
    bench_perturb,
    bench_engine
);
criterion_main!(benches);
