use caw_core::data_io::gen_poisson;
use caw_core::encoder::{CawModel, EncoderConfig, LinkQuery, TimeScale};
use caw_core::evaluation::score_queries;
use caw_core::{Execution, NodeId, SamplerConfig, WalkSampler};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sampling(c: &mut Criterion) {
    let stream = gen_poisson(200, 0.1, 2000.0, 7).expect("poisson stream");
    let store = stream.store(0.02).expect("store");
    let sampler = WalkSampler::new(&store, SamplerConfig::new(32, 3, 0.02, 7)).expect("sampler");
    let t_end = stream.events.last().map_or(1.0, |e| e.t);
    let requests: Vec<(NodeId, f64)> = (0..256).map(|i| (NodeId((i % stream.n_nodes) as u32), t_end * (0.5 + (i as f64) / 512.0))).collect();

    let mut g = c.benchmark_group("sample_batch");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(sampler.sample_batch(&requests, 1, exec)))
        });
    }
    g.finish();

    let mut cfg = EncoderConfig::new(3).with_dims(32);
    cfg.d_attr = stream.attr_dim;
    let model = CawModel::new(cfg, &TimeScale::from_times(&stream.times()), 7).expect("model");
    let queries: Vec<LinkQuery> = stream.events[stream.len() - 128..]
        .iter()
        .map(|e| LinkQuery {
            u: e.u,
            v: e.v,
            t: e.t,
            label: None,
        })
        .collect();
    let mut g = c.benchmark_group("score_queries");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(score_queries(&model, &sampler, &queries, &[3], exec).expect("scores")))
        });
    }
    g.finish();
}

criterion_group!(benches, sampling);
criterion_main!(benches);
