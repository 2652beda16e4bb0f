use std::sync::Arc;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use kan_core::autodiff::{Graph, Tensor};
use kan_core::data::{Document, Label};
use kan_core::eval::paired_t_test;
use kan_core::kan::{mcl_gradients, Batch};
use kan_core::rnn::{run_gru, GruParams};
use kan_core::{Hyperparams, KanModel, MaskPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn docs(n: usize, len: usize, vocab: usize, step: usize) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..n)
        .map(|i| {
            let ids: Vec<usize> = (0..len).map(|_| rng.gen_range(2..vocab)).collect();
            let label = if i % 2 == 0 { Label::Pos } else { Label::Neg };
            Document::encode(&ids, label, step).unwrap()
        })
        .collect()
}

fn gru(c: &mut Criterion) {
    let mut group = c.benchmark_group("gru");
    for &(dim, steps) in &[(64usize, 32usize), (300, 32)] {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = GruParams::new(dim, dim, &mut rng);
        let xs: Vec<Tensor> = (0..steps).map(|_| Tensor::uniform(&[64, dim], -1.0, 1.0, &mut rng)).collect();
        group.throughput(Throughput::Elements((64 * steps) as u64));
        group.bench_with_input(BenchmarkId::new("forward_backward", dim), &dim, |b, _| {
            b.iter(|| {
                let mut g = Graph::new(true);
                let p = params.bind(&mut g, true);
                let inputs: Vec<_> = xs.iter().map(|x| g.constant(x)).collect();
                let hs = run_gru(&mut g, &inputs, &p).unwrap();
                let loss = g.sum(*hs.last().unwrap());
                g.backward(loss).unwrap();
                black_box(g.grad(p.w_update).map(|t| t.data()[0]))
            })
        });
    }
    group.finish();
}

fn mcl_step(c: &mut Criterion) {
    let hp = Hyperparams::desk();
    let vocab = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let emb = Arc::new(Tensor::uniform(&[vocab, hp.embed_dim], -1.0, 1.0, &mut rng));
    let mut model = KanModel::new(hp.clone(), 0, MaskPolicy::Trained, emb).unwrap();
    model.ensure_head(0);
    let data = docs(hp.batch_size, 20, vocab, hp.step);
    let batch = Batch::of(&data);
    let mask = Tensor::ones(&[1, hp.hidden_dim]);
    c.bench_function("mcl_gradients/desk_batch", |b| {
        b.iter(|| black_box(mcl_gradients(&model, 0, &mask, &batch, &mut ChaCha8Rng::seed_from_u64(3)).unwrap().loss))
    });
}

fn t_test(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a: Vec<f64> = (0..240).map(|_| rng.gen_range(0.5..1.0)).collect();
    let b: Vec<f64> = (0..240).map(|_| rng.gen_range(0.5..1.0)).collect();
    c.bench_function("paired_t_test/240", |bch| bch.iter(|| black_box(paired_t_test(&a, &b).unwrap().p)));
}

criterion_group!(benches, gru, mcl_step, t_test);
criterion_main!(benches);
