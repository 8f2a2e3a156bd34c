use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use geoseg_bench::{run_once, scene, BenchOp};

fn ops(c: &mut Criterion) {
    let scratch = tempfile::tempdir().expect("scratch dir");
    let mut group = c.benchmark_group("ops");
    group.sample_size(10);
    for size in [1024u32, 2048] {
        let (image, labels) = scene(size, size as u64).expect("scene");
        group.throughput(Throughput::Elements(size as u64 * size as u64));
        for op in [BenchOp::Split, BenchOp::MergeCrop, BenchOp::MergeLogit] {
            group.bench_with_input(BenchmarkId::new(op.name(), size), &size, |b, _| {
                b.iter(|| run_once(op, &image, &labels, scratch.path()).expect("bench op"))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, ops);
criterion_main!(benches);
