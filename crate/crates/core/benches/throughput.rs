//! Fan-out throughput: data-parallel trial dispatch versus the sequential
//! path, on a rollout-heavy workload sized like one experiment trial.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use lpmrl::envs::TreeMdp;
use lpmrl::harness::exec::{map_indexed, map_indexed_seq, stream_rng};
use lpmrl::mdp::rollout;
use lpmrl::policies::TreePolicy;

fn tree_batch(trial: usize) -> f64 {
    let mut rng = stream_rng(7, trial as u64);
    let mut env = TreeMdp::default();
    let policy = TreePolicy::new(0.5, 0.5).unwrap();
    let mut total = 0.0;
    for _ in 0..2_000 {
        total += rollout(&mut env, &policy, 1.0, 4, &mut rng)
            .unwrap()
            .total_return();
    }
    total
}

fn bench_fanout(c: &mut Criterion) {
    let mut group = c.benchmark_group("trial_fanout");
    for &trials in &[8usize, 64] {
        group.throughput(Throughput::Elements(trials as u64));
        group.bench_with_input(
            BenchmarkId::new("data_parallel", trials),
            &trials,
            |b, &n| b.iter(|| map_indexed(n, tree_batch)),
        );
        group.bench_with_input(BenchmarkId::new("sequential", trials), &trials, |b, &n| {
            b.iter(|| map_indexed_seq(n, tree_batch))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_fanout);
criterion_main!(benches);
