use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use pcmt_bench::{bytes, chunks, eligible_samples, tree_params};
use pcmt_core::attack_sim::{run_trials, AttackConfig, Strategy};
use pcmt_core::codec::{peel_decode, systematic_encode, Assignment};
use pcmt_core::freezing::sef_freeze_on;
use pcmt_core::pcmt::{decode_tree, PcmtTree};
use pcmt_core::{FactorGraph, VnId};

fn graph_and_freeze(c: &mut Criterion) {
    let mut group = c.benchmark_group("freeze");
    for n in [256usize, 1024, 8192] {
        group.bench_with_input(BenchmarkId::new("sef", n), &n, |b, &n| {
            b.iter(|| {
                let g = FactorGraph::build(n).unwrap();
                sef_freeze_on(&g, n / 2).unwrap()
            })
        });
    }
    group.finish();
}

fn encode_decode(c: &mut Criterion) {
    let mut group = c.benchmark_group("codec");
    for n in [128usize, 1024] {
        let g = FactorGraph::build(n).unwrap();
        let spec = sef_freeze_on(&g, n / 2).unwrap();
        let data = chunks(n / 2, 256, 1);
        group.bench_with_input(BenchmarkId::new("encode", n), &n, |b, _| {
            b.iter(|| systematic_encode(&g, &spec, black_box(&data)).unwrap())
        });
        let coded = systematic_encode(&g, &spec, &data).unwrap();
        let mut known = Assignment::empty(&g, 256);
        let right = g.rightmost_column();
        for row in 1..=spec.eligible_rows() {
            let id = VnId::new(right, row as u32);
            known.set(id, coded.get(id).unwrap().clone());
        }
        group.bench_with_input(BenchmarkId::new("decode", n), &n, |b, _| {
            b.iter(|| peel_decode(&g, &spec, black_box(&known)).unwrap())
        });
    }
    group.finish();
}

fn tree(c: &mut Criterion) {
    let params = tree_params();
    let block = bytes(params.block_bytes() as usize, 2);
    c.bench_function("tree/build", |b| b.iter(|| PcmtTree::build(params, black_box(&block)).unwrap()));
    let tree = PcmtTree::build(params, &block).unwrap();
    let samples = eligible_samples(&tree);
    c.bench_function("tree/decode", |b| {
        b.iter(|| decode_tree(tree.layout(), tree.root(), black_box(&samples)).unwrap())
    });
}

fn attack(c: &mut Criterion) {
    let spec = sef_freeze_on(&FactorGraph::build(1024).unwrap(), 512).unwrap();
    c.bench_function("attack/10k_trials", |b| {
        b.iter(|| {
            run_trials(&AttackConfig {
                spec: spec.clone(),
                strategy: Strategy::Optimal,
                samples_per_node: 20,
                trials: 10_000,
                seed: 1,
            })
            .unwrap()
        })
    });
}

criterion_group!(benches, graph_and_freeze, encode_decode, tree, attack);
criterion_main!(benches);
