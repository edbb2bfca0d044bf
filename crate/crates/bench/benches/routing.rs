//! Wall-clock benchmarks of the scoring paths at a desk-scale library.
//!
//! The analytic models predict seqr << arrow < lag < spectr < naive per
//! query; these benchmarks let criterion confirm the ordering on real
//! hardware. Run with `cargo bench -p seqr-bench`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use seqr_core::adapter::LibraryBundle;
use seqr_core::routing::{self, Method};
use seqr_core::synthgen::{self, SynthSpec};

fn scoring_benchmarks(c: &mut Criterion) {
    let spec = SynthSpec {
        seed: 42,
        n_adapters: 64,
        m: 256,
        n: 256,
        r: 8,
        shared_a: true,
        task_subspace_dim: 2,
        signal_gain: 3.0,
        noise_level: 0.1,
        bias_scales: None,
    };
    let library = synthgen::gen_library(&spec).expect("generation succeeds");
    let queries = synthgen::gen_queries(&library, &spec, 1).expect("queries");
    let x = &queries[0].x;

    let mut bundle = LibraryBundle::new(library);
    bundle.forms.arrow = Some(bundle.library.build_arrow_forms().expect("arrow forms"));
    bundle.forms.spectr = Some(bundle.library.build_spectr_forms().expect("spectr forms"));
    bundle.forms.seqr = Some(bundle.library.build_seqr_forms().expect("seqr forms"));

    let mut group = c.benchmark_group("score_query");
    for method in [
        Method::Naive,
        Method::Arrow,
        Method::Spectr,
        Method::Lag,
        Method::Seqr,
    ] {
        group.bench_with_input(
            BenchmarkId::from_parameter(method),
            &method,
            |b, &method| {
                b.iter(|| routing::route(&bundle, method, x, 8, None).expect("routing"))
            },
        );
    }
    group.finish();
}

fn preprocessing_benchmarks(c: &mut Criterion) {
    let spec = SynthSpec {
        seed: 7,
        n_adapters: 16,
        m: 256,
        n: 256,
        r: 8,
        shared_a: true,
        task_subspace_dim: 2,
        signal_gain: 3.0,
        noise_level: 0.0,
        bias_scales: None,
    };
    let library = synthgen::gen_library(&spec).expect("generation succeeds");

    let mut group = c.benchmark_group("preprocess_library");
    group.sample_size(20);
    group.bench_function("arrow", |b| {
        b.iter(|| library.build_arrow_forms().expect("forms"))
    });
    group.bench_function("spectr", |b| {
        b.iter(|| library.build_spectr_forms().expect("forms"))
    });
    group.bench_function("seqr", |b| {
        b.iter(|| library.build_seqr_forms().expect("forms"))
    });
    group.finish();
}

criterion_group!(benches, scoring_benchmarks, preprocessing_benchmarks);
criterion_main!(benches);
