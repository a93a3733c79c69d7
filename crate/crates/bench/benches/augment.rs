use criterion::{criterion_group, criterion_main, Criterion};
use paveval_bench::dataset;
use paveval_core::augment::{hist_equalize, parse_pipeline_spec, pipeline};

fn bench_pipeline(c: &mut Criterion) {
    let d = dataset(4, 32, 5, 256, 256, true);
    let steps = parse_pipeline_spec(
        r#"[
            {"kind": "MOSAIC", "probability": 0.3},
            {"kind": "HFLIP", "probability": 0.5},
            {"kind": "SCALE", "probability": 0.5},
            {"kind": "SAFE_CROP", "probability": 0.5},
            {"kind": "HUE_CONTRAST", "probability": 0.5},
            {"kind": "GAUSSIAN", "probability": 0.2}
        ]"#,
    )
    .unwrap();
    c.bench_function("pipeline 32x256px x4", |b| {
        b.iter(|| pipeline(&d, &steps, 7, 4).unwrap())
    });
}

fn bench_hist_eq(c: &mut Criterion) {
    let d = dataset(5, 1, 0, 640, 640, true);
    let rec = d.iter().next().unwrap();
    c.bench_function("hist_equalize 640px", |b| {
        b.iter(|| hist_equalize(rec).unwrap())
    });
}

criterion_group!(benches, bench_pipeline, bench_hist_eq);
criterion_main!(benches);
