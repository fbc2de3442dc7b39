use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use msa::correspond::{correspondence_report, Schema};
use msa::par::Exec;
use msa::prover::{bounded_countermodel_prop_with, Logic};
use msa::rewrite::{check_identity_with, Bounds};
use msa::syntax::{parse, Signature};

fn execs() -> Vec<(&'static str, Exec)> {
    let mut v = vec![("sequential", Exec::Sequential)];
    if cfg!(feature = "parallel") {
        v.push(("parallel", Exec::Parallel));
    }
    v
}

fn bench(c: &mut Criterion) {
    let mut g = c.benchmark_group("correspondence_4_worlds");
    g.sample_size(10);
    for (name, exec) in execs() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| correspondence_report(black_box(4), &Schema::ALL, exec).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("identity_ax12_200_trials");
    g.sample_size(10);
    let bounds = Bounds::default();
    for (name, exec) in execs() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| check_identity_with("ax12", 200, black_box(&bounds), exec).unwrap())
        });
    }
    g.finish();

    // a K-theorem, so the oracle has to search every frame
    let sig = Signature::new().with("p", []).with("q", []);
    let f = parse("(imp (box (and (g p) (g q))) (and (box (g p)) (box (g q))))", &sig).unwrap();
    let mut g = c.benchmark_group("frame_oracle_4_worlds");
    g.sample_size(10);
    for (name, exec) in execs() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| bounded_countermodel_prop_with(black_box(&f), Logic::K, 4, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
