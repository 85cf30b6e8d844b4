//! One worker versus the full rayon pool on the data-parallel hot paths.
//!
//! Build with `--no-default-features` to time the sequential code path instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use smgwr_core::autocorr::{permutation_morans_i, Alternative};
use smgwr_core::data::build_design;
use smgwr_core::local::{gwr_fit, KernelSpec, Neighborhoods};
use smgwr_core::mgwr::{mgwr_fit, MgwrConfig};
use smgwr_core::par;
use smgwr_core::simulate::{generate_grid, generate_sample, SimConfig};
use smgwr_core::weights::{knn_weights, row_standardize};

fn worker_counts() -> Vec<usize> {
    let max = par::max_workers();
    if max > 1 {
        vec![1, max]
    } else {
        vec![1]
    }
}

fn benches(c: &mut Criterion) {
    let side = 20;
    let w = row_standardize(&knn_weights(&generate_grid(side).unwrap(), 8).unwrap());
    let cfg = SimConfig {
        side,
        rho: 0.5,
        ..SimConfig::fixture(1)
    };
    let (ds, _) = generate_sample(&cfg, &w).unwrap();
    let design = build_design(&ds, true).unwrap();
    let nb = Neighborhoods::new(&ds.points);
    let mgwr_cfg = MgwrConfig {
        lag: true,
        bandwidths: Some(vec![200.0, 80.0, 50.0]),
        ..MgwrConfig::default()
    };

    let mut group = c.benchmark_group("workers");
    group.sample_size(10);
    for workers in worker_counts() {
        group.bench_with_input(BenchmarkId::new("gwr_fit", workers), &workers, |b, &wk| {
            b.iter(|| par::with_workers(wk, || gwr_fit(&design, &nb, KernelSpec::default(), 60.0).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("moran_999", workers), &workers, |b, &wk| {
            b.iter(|| {
                par::with_workers(wk, || {
                    permutation_morans_i(&ds.response.values, &w, 999, 7, Alternative::Greater).unwrap()
                })
            })
        });
        group.bench_with_input(BenchmarkId::new("mgwr_fixed_bw", workers), &workers, |b, &wk| {
            b.iter(|| par::with_workers(wk, || mgwr_fit(&design, &nb, Some(&w), &mgwr_cfg).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(parallel_vs_sequential, benches);
criterion_main!(parallel_vs_sequential);
