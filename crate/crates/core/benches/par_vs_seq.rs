//! Parallel vs sequential throughput of the data-parallel kernels.
//!
//! Both paths share the same chunked reduction, so they produce identical
//! results; this suite measures the speedup only. Run with
//! `cargo bench -p evjoint-core`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use evjoint_core::event::predecessor_pairs;
use evjoint_core::loss::cmax::cmax_loss_exec;
use evjoint_core::loss::phe::phe_loss_exec;
use evjoint_core::loss::tc::tc_loss_exec;
use evjoint_core::loss::tv::tv_loss_exec;
use evjoint_core::sim::{render_pattern, simulate_events_exec, Pattern, SyntheticScene};
use evjoint_core::warp::{splat_iwe_exec, warp_events_exec, IweKernel};
use evjoint_core::{Exec, FlowField, LogIntensity};

fn execs() -> Vec<(&'static str, Exec)> {
    let mut v = vec![("seq", Exec::Sequential)];
    #[cfg(feature = "parallel")]
    v.push(("par", Exec::Parallel));
    v
}

fn bench_kernels(c: &mut Criterion) {
    let (h, w) = (240usize, 320usize);
    let pattern = render_pattern(Pattern::SmoothedNoise { scale: 4, seed: 7 }, h, w);
    let scene = SyntheticScene::new(pattern.clone(), FlowField::constant(h, w, (6.0, 2.0)), 0.1, 0.2)
        .expect("valid scene");
    let slice = simulate_events_exec(Exec::Sequential, &scene, 128).expect("simulation fits substeps");
    let pairs = predecessor_pairs(&slice);
    let flow = FlowField::constant(h, w, (5.0, 1.5));
    let intensity = LogIntensity::new(pattern.data.clone());
    eprintln!("benchmark stream: {} events, {} pairs", slice.len(), pairs.len());

    let mut g = c.benchmark_group("warp_events");
    for (name, exec) in execs() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| warp_events_exec(exec, &slice, &flow, slice.t_end));
        });
    }
    g.finish();

    let warped = warp_events_exec(Exec::Sequential, &slice, &flow, slice.t_end);
    let mut g = c.benchmark_group("splat_iwe");
    for (name, exec) in execs() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| splat_iwe_exec(exec, &warped, w, h, IweKernel::Bilinear));
        });
    }
    g.finish();

    let mut g = c.benchmark_group("phe_loss");
    for (name, exec) in execs() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| phe_loss_exec(exec, &intensity, &flow, &slice, &pairs, 0.2, slice.t_end));
        });
    }
    g.finish();

    let mut g = c.benchmark_group("cmax_loss");
    for (name, exec) in execs() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| cmax_loss_exec(exec, &flow, &slice, 0.05).expect("non-degenerate IWE"));
        });
    }
    g.finish();

    let mut g = c.benchmark_group("tv_loss");
    for (name, exec) in execs() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| tv_loss_exec(exec, &[&flow.u, &flow.v]));
        });
    }
    g.finish();

    let shifted = LogIntensity::new(pattern.data.mapv(|v| v * 0.9 + 0.05));
    let mut g = c.benchmark_group("tc_loss");
    for (name, exec) in execs() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| tc_loss_exec(exec, &intensity, &shifted, &flow));
        });
    }
    g.finish();

    let mut g = c.benchmark_group("simulate_events");
    g.sample_size(10);
    for (name, exec) in execs() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| simulate_events_exec(exec, &scene, 128).expect("simulation fits substeps"));
        });
    }
    g.finish();
}

criterion_group!(benches, bench_kernels);
criterion_main!(benches);
