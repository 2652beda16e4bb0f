use std::time::Instant;

use kan_core::autodiff::{grad_check, Graph, Tensor, Var, DEFAULT_STEP};
use kan_core::data::{Document, Label};
use kan_core::kan::{ac_forward, mcl_forward, soft_mask, Batch};
use kan_core::rnn::{gru_cell, run_gru, GruParams, GruVars};
use kan_core::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_tensor(shape: &[usize], seed: u64) -> Tensor {
    Tensor::uniform(shape, -2.0, 2.0, &mut rng(seed))
}

/// Reduces any output to a scalar through fixed random weights, so every
/// output element carries a distinct upstream gradient.
fn project(g: &mut Graph<'_>, out: Var, seed: u64) -> Result<Var> {
    let w = g.input(rand_tensor(g.value(out).shape(), seed));
    let p = g.mul(out, w)?;
    Ok(g.sum(p))
}

fn check<'a>(name: &str, params: &[Tensor], tol: f64, build: impl FnMut(&mut Graph<'a>, &[Var]) -> Result<Var>) {
    let report = grad_check(params, DEFAULT_STEP, build).unwrap();
    assert!(report.passes(tol), "{name}: deviations {:?}", report.max_deviation);
}

#[test]
fn primitives_match_finite_differences() {
    let start = Instant::now();
    let tol = 1e-5;
    let a = rand_tensor(&[3, 4], 1);
    let b = rand_tensor(&[4, 2], 2);
    let c = rand_tensor(&[3, 4], 3);
    let row = rand_tensor(&[1, 4], 4);
    let seq = rand_tensor(&[2, 3, 4], 5);

    check("matmul", &[a.clone(), b.clone()], tol, |g, v| {
        let y = g.matmul(v[0], v[1])?;
        project(g, y, 10)
    });
    check("add", &[a.clone(), c.clone()], tol, |g, v| {
        let y = g.add(v[0], v[1])?;
        project(g, y, 11)
    });
    check("add_row", &[a.clone(), row.clone()], tol, |g, v| {
        let y = g.add(v[0], v[1])?;
        project(g, y, 12)
    });
    check("sub", &[a.clone(), c.clone()], tol, |g, v| {
        let y = g.sub(v[0], v[1])?;
        project(g, y, 13)
    });
    check("mul", &[a.clone(), c.clone()], tol, |g, v| {
        let y = g.mul(v[0], v[1])?;
        project(g, y, 14)
    });
    check("mul_row_over_steps", &[seq.clone(), row.clone()], tol, |g, v| {
        let y = g.mul(v[0], v[1])?;
        project(g, y, 15)
    });
    check("scale", &[a.clone()], tol, |g, v| {
        let y = g.scale(v[0], -1.7);
        project(g, y, 16)
    });
    check("sigmoid", &[a.clone()], tol, |g, v| {
        let y = g.sigmoid(v[0]);
        project(g, y, 17)
    });
    check("tanh", &[a.clone()], tol, |g, v| {
        let y = g.tanh(v[0]);
        project(g, y, 18)
    });
    check("concat", &[a.clone(), rand_tensor(&[3, 2], 6)], tol, |g, v| {
        let y = g.concat(&[v[0], v[1]])?;
        project(g, y, 19)
    });
    check("stack_and_slice", &[a.clone(), c.clone()], tol, |g, v| {
        let s = g.stack(&[v[0], v[1]])?;
        let first = g.slice_step(s, 0)?;
        let last = g.slice_last_step(s)?;
        let y = g.mul(first, last)?;
        project(g, y, 20)
    });
    check("embedding_lookup", &[rand_tensor(&[5, 3], 7)], tol, |g, v| {
        let y = g.embedding_lookup(v[0], &[4, 0, 4, 2])?;
        project(g, y, 21)
    });
    check("dropout", &[a.clone()], tol, |g, v| {
        let y = g.dropout(v[0], 0.5, &mut rng(99))?;
        project(g, y, 22)
    });
    check("softmax_cross_entropy", &[rand_tensor(&[4, 2], 8)], tol, |g, v| {
        g.softmax_cross_entropy(v[0], &[0, 1, 1, 0])
    });
    check("quadratic", &[Tensor::vector(vec![0.3, -1.2, 2.0])], 1e-8, |g, v| {
        let sq = g.mul(v[0], v[0])?;
        Ok(g.sum(sq))
    });
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn reused_parameter_gradient_is_sum_of_paths() {
    // f(x) = sum(x ⊙ x + 3x) has gradient 2x + 3, the sum of both paths.
    let x = Tensor::vector(vec![0.5, -1.0, 2.0]);
    let mut g = Graph::new(true);
    let v = g.param(&x);
    let sq = g.mul(v, v).unwrap();
    let lin = g.scale(v, 3.0);
    let s = g.add(sq, lin).unwrap();
    let loss = g.sum(s);
    g.backward(loss).unwrap();
    assert_eq!(g.grad(v).unwrap().data(), &[4.0, 1.0, 7.0]);

    // The same function built from two distinct copies of x.
    let mut g = Graph::new(true);
    let (v1, v2) = (g.param(&x), g.param(&x));
    let sq = g.mul(v1, v1).unwrap();
    let lin = g.scale(v2, 3.0);
    let s = g.add(sq, lin).unwrap();
    let loss = g.sum(s);
    g.backward(loss).unwrap();
    let combined: Vec<f64> = g
        .grad(v1)
        .unwrap()
        .data()
        .iter()
        .zip(g.grad(v2).unwrap().data())
        .map(|(a, b)| a + b)
        .collect();
    assert_eq!(combined, vec![4.0, 1.0, 7.0]);
}

fn gru_vars(v: &[Var], input_dim: usize, hidden_dim: usize) -> GruVars {
    GruVars {
        w_update: v[0],
        w_reset: v[1],
        w_candidate: v[2],
        b_update: v[3],
        b_reset: v[4],
        b_candidate: v[5],
        input_dim,
        hidden_dim,
    }
}

/// GRU weights with nonzero biases, so every gate path is exercised.
fn gru_tensors(input_dim: usize, hidden_dim: usize, seed: u64) -> Vec<Tensor> {
    let mut p = GruParams::new(input_dim, hidden_dim, &mut rng(seed));
    for (i, (_, t)) in p.tensors_mut().into_iter().enumerate() {
        if t.shape()[0] == 1 {
            *t = Tensor::uniform(t.shape(), -0.5, 0.5, &mut rng(seed + 100 + i as u64));
        } else {
            *t = Tensor::uniform(t.shape(), -0.6, 0.6, &mut rng(seed + 200 + i as u64));
        }
    }
    p.tensors().iter().map(|(_, t)| (*t).clone()).collect()
}

#[test]
fn gru_cell_matches_finite_differences() {
    let (i, h) = (3, 4);
    let mut params = gru_tensors(i, h, 1);
    params.push(rand_tensor(&[2, i], 30));
    params.push(Tensor::uniform(&[2, h], -0.9, 0.9, &mut rng(31)));
    check("gru_cell", &params, 1e-5, |g, v| {
        let p = gru_vars(v, i, h);
        let out = gru_cell(g, v[6], v[7], &p)?;
        project(g, out, 32)
    });
}

#[test]
fn three_step_sequence_matches_finite_differences() {
    let (i, h) = (3, 4);
    let mut params = gru_tensors(i, h, 2);
    for s in 0..3 {
        params.push(rand_tensor(&[2, i], 40 + s));
    }
    check("gru_sequence", &params, 1e-4, |g, v| {
        let p = gru_vars(v, i, h);
        let hs = run_gru(g, &v[6..9], &p)?;
        let all = g.stack(&hs)?;
        project(g, all, 43)
    });
}

fn two_token_doc() -> Vec<Document> {
    vec![
        Document::encode(&[2, 3], Label::Pos, 2).unwrap(),
        Document::encode(&[4], Label::Neg, 2).unwrap(),
    ]
}

fn mcl_loss_check(mask: Tensor, tol: f64) {
    let (e, h) = (3, 4);
    let embeddings = rand_tensor(&[5, e], 50);
    let docs = two_token_doc();
    let batch = Batch::of(&docs);
    let mut params = gru_tensors(e, h, 3);
    params.push(Tensor::uniform(&[h, 2], -0.8, 0.8, &mut rng(51)));
    params.push(Tensor::uniform(&[1, 2], -0.3, 0.3, &mut rng(52)));
    check("mcl_loss", &params, tol, |g, v| {
        let emb = g.constant(&embeddings);
        let m = g.constant(&mask);
        let kb = gru_vars(v, e, h);
        let out = mcl_forward(g, emb, &kb, (v[6], v[7]), m, &batch, 0.5, &mut rng(53))?;
        g.softmax_cross_entropy(out.logits, &batch.labels)
    });
}

#[test]
fn mcl_loss_on_two_token_document_matches_finite_differences() {
    mcl_loss_check(Tensor::ones(&[1, 4]), 1e-4);
}

#[test]
fn mcl_loss_with_partial_mask_matches_finite_differences() {
    mcl_loss_check(Tensor::new(vec![1, 4], vec![1.0, 0.0, 1.0, 0.0]).unwrap(), 1e-4);
}

#[test]
fn ac_loss_matches_finite_differences() {
    let (e, h) = (3, 4);
    let embeddings = rand_tensor(&[5, e], 60);
    let kb = GruParams::new(e, h, &mut rng(61));
    let docs = two_token_doc();
    let batch = Batch::of(&docs);
    let mut params = gru_tensors(h, h, 4);
    params.push(Tensor::uniform(&[h, 2], -0.8, 0.8, &mut rng(62)));
    params.push(Tensor::uniform(&[1, 2], -0.3, 0.3, &mut rng(63)));
    params.push(Tensor::uniform(&[2, h], -0.5, 0.5, &mut rng(64)));
    check("ac_loss", &params, 1e-4, |g, v| {
        let emb = g.constant(&embeddings);
        let kbv = kb.bind(g, false);
        let ac = gru_vars(v, h, h);
        let mask = soft_mask(g, v[8], 1, 3.0)?;
        let logits = ac_forward(g, emb, &kbv, &ac, (v[6], v[7]), mask, &batch, 0.5, &mut rng(65))?;
        g.softmax_cross_entropy(logits, &batch.labels)
    });
}
