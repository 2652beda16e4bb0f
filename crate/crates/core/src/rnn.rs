//! GRU cell, sequence runner and per-task dense heads.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Sentiment classes per task (negative, positive).
pub const NUM_CLASSES: usize = 2;

/// Half-width of the uniform initializer for weight matrices.
pub const INIT_RANGE: f64 = 0.08;

/// GRU weights. Each gate matrix acts on the concatenation `[x, h]`, so it has
/// `input_dim + hidden_dim` rows and `hidden_dim` columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub w_update: Tensor,
    pub w_reset: Tensor,
    pub w_candidate: Tensor,
    pub b_update: Tensor,
    pub b_reset: Tensor,
    pub b_candidate: Tensor,
}

pub const GRU_TENSOR_NAMES: [&str; 6] = [
    "w_update",
    "w_reset",
    "w_candidate",
    "b_update",
    "b_reset",
    "b_candidate",
];

impl GruParams {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let rows = input_dim + hidden_dim;
        let mut w = || Tensor::uniform(&[rows, hidden_dim], -INIT_RANGE, INIT_RANGE, rng);
        let (w_update, w_reset, w_candidate) = (w(), w(), w());
        GruParams {
            w_update,
            w_reset,
            w_candidate,
            b_update: Tensor::zeros(&[1, hidden_dim]),
            b_reset: Tensor::zeros(&[1, hidden_dim]),
            b_candidate: Tensor::zeros(&[1, hidden_dim]),
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let rows = input_dim + hidden_dim;
        GruParams {
            w_update: Tensor::zeros(&[rows, hidden_dim]),
            w_reset: Tensor::zeros(&[rows, hidden_dim]),
            w_candidate: Tensor::zeros(&[rows, hidden_dim]),
            b_update: Tensor::zeros(&[1, hidden_dim]),
            b_reset: Tensor::zeros(&[1, hidden_dim]),
            b_candidate: Tensor::zeros(&[1, hidden_dim]),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_update.last_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.w_update.shape()[0] - self.hidden_dim()
    }

    /// Checks that every tensor agrees with the declared dimensions.
    pub fn validate(&self) -> Result<()> {
        let (i, h) = (self.input_dim(), self.hidden_dim());
        for (name, t) in self.tensors() {
            let want: &[usize] = if name.starts_with('w') { &[i + h, h] } else { &[1, h] };
            if t.shape() != want {
                return Err(Error::shape(
                    "gru_params",
                    format!("{name} is {:?}, expected {want:?}", t.shape()),
                ));
            }
        }
        Ok(())
    }

    pub fn tensors(&self) -> [(&'static str, &Tensor); 6] {
        [
            (GRU_TENSOR_NAMES[0], &self.w_update),
            (GRU_TENSOR_NAMES[1], &self.w_reset),
            (GRU_TENSOR_NAMES[2], &self.w_candidate),
            (GRU_TENSOR_NAMES[3], &self.b_update),
            (GRU_TENSOR_NAMES[4], &self.b_reset),
            (GRU_TENSOR_NAMES[5], &self.b_candidate),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor); 6] {
        [
            (GRU_TENSOR_NAMES[0], &mut self.w_update),
            (GRU_TENSOR_NAMES[1], &mut self.w_reset),
            (GRU_TENSOR_NAMES[2], &mut self.w_candidate),
            (GRU_TENSOR_NAMES[3], &mut self.b_update),
            (GRU_TENSOR_NAMES[4], &mut self.b_reset),
            (GRU_TENSOR_NAMES[5], &mut self.b_candidate),
        ]
    }

    /// Places the weights on `g`, as trainable leaves or as constants.
    pub fn bind<'a>(&'a self, g: &mut Graph<'a>, trainable: bool) -> GruVars {
        let mut leaf = |t: &'a Tensor| if trainable { g.param(t) } else { g.constant(t) };
        GruVars {
            w_update: leaf(&self.w_update),
            w_reset: leaf(&self.w_reset),
            w_candidate: leaf(&self.w_candidate),
            b_update: leaf(&self.b_update),
            b_reset: leaf(&self.b_reset),
            b_candidate: leaf(&self.b_candidate),
            input_dim: self.input_dim(),
            hidden_dim: self.hidden_dim(),
        }
    }
}

/// Graph handles for a bound [`GruParams`], in [`GRU_TENSOR_NAMES`] order.
#[derive(Clone, Copy, Debug)]
pub struct GruVars {
    pub w_update: Var,
    pub w_reset: Var,
    pub w_candidate: Var,
    pub b_update: Var,
    pub b_reset: Var,
    pub b_candidate: Var,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl GruVars {
    pub fn vars(&self) -> [Var; 6] {
        [
            self.w_update,
            self.w_reset,
            self.w_candidate,
            self.b_update,
            self.b_reset,
            self.b_candidate,
        ]
    }
}

/// One GRU step:
///
/// ```text
/// z  = σ([x, h] W_z + b_z)
/// r  = σ([x, h] W_r + b_r)
/// n  = tanh([x, r ⊙ h] W_n + b_n)
/// h' = (1 - z) ⊙ n + z ⊙ h
/// ```
pub fn gru_cell(g: &mut Graph<'_>, x: Var, h_prev: Var, p: &GruVars) -> Result<Var> {
    let (xs, hs) = (g.value(x).shape(), g.value(h_prev).shape());
    if xs.len() != 2 || hs.len() != 2 || xs[1] != p.input_dim || hs[1] != p.hidden_dim || xs[0] != hs[0] {
        return Err(Error::shape(
            "gru_cell",
            format!(
                "x {xs:?}, h {hs:?} for input {} / hidden {}",
                p.input_dim, p.hidden_dim
            ),
        ));
    }
    let xh = g.concat(&[x, h_prev])?;
    let z = g.matmul(xh, p.w_update)?;
    let z = g.add(z, p.b_update)?;
    let z = g.sigmoid(z);
    let r = g.matmul(xh, p.w_reset)?;
    let r = g.add(r, p.b_reset)?;
    let r = g.sigmoid(r);
    let rh = g.mul(r, h_prev)?;
    let xrh = g.concat(&[x, rh])?;
    let n = g.matmul(xrh, p.w_candidate)?;
    let n = g.add(n, p.b_candidate)?;
    let n = g.tanh(n);
    // (1 - z) n + z h  ==  n + z (h - n)
    let diff = g.sub(h_prev, n)?;
    let gated = g.mul(z, diff)?;
    g.add(n, gated)
}

/// Runs the GRU over `inputs` (each `[B, input_dim]`) from a zero state and
/// returns every hidden state.
pub fn run_gru(g: &mut Graph<'_>, inputs: &[Var], p: &GruVars) -> Result<Vec<Var>> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::shape("run_sequence", "empty sequence"))?;
    let batch = g.value(*first).shape()[0];
    let mut h = g.input(Tensor::zeros(&[batch, p.hidden_dim]));
    let mut out = Vec::with_capacity(inputs.len());
    for &x in inputs {
        h = gru_cell(g, x, h, p)?;
        out.push(h);
    }
    Ok(out)
}

/// Embeds a batch of equal-length token rows, applies dropout between the
/// embedding and the GRU, and returns one hidden state per step.
pub fn run_sequence<R: Rng + ?Sized>(
    g: &mut Graph<'_>,
    tokens: &[&[usize]],
    embeddings: Var,
    p: &GruVars,
    dropout_keep: f64,
    rng: &mut R,
) -> Result<Vec<Var>> {
    let steps = tokens.first().map_or(0, |t| t.len());
    if steps == 0 || tokens.iter().any(|t| t.len() != steps) {
        return Err(Error::shape(
            "run_sequence",
            "batch rows must be non-empty and of equal length",
        ));
    }
    let mut inputs = Vec::with_capacity(steps);
    let mut ids = vec![0usize; tokens.len()];
    for i in 0..steps {
        for (slot, row) in ids.iter_mut().zip(tokens) {
            *slot = row[i];
        }
        let x = g.embedding_lookup(embeddings, &ids)?;
        inputs.push(g.dropout(x, dropout_keep, rng)?);
    }
    run_gru(g, &inputs, p)
}

/// Per-task classification layer mapping a hidden state to class logits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseHead {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl DenseHead {
    pub fn new<R: Rng + ?Sized>(hidden_dim: usize, rng: &mut R) -> Self {
        DenseHead {
            weight: Tensor::uniform(&[hidden_dim, NUM_CLASSES], -INIT_RANGE, INIT_RANGE, rng),
            bias: Tensor::zeros(&[1, NUM_CLASSES]),
        }
    }

    pub fn bind<'a>(&'a self, g: &mut Graph<'a>, trainable: bool) -> (Var, Var) {
        if trainable {
            (g.param(&self.weight), g.param(&self.bias))
        } else {
            (g.constant(&self.weight), g.constant(&self.bias))
        }
    }

    pub fn validate(&self, hidden_dim: usize) -> Result<()> {
        if self.weight.shape() != [hidden_dim, NUM_CLASSES] || self.bias.shape() != [1, NUM_CLASSES] {
            return Err(Error::shape(
                "dense_head",
                format!("weight {:?}, bias {:?}", self.weight.shape(), self.bias.shape()),
            ));
        }
        Ok(())
    }
}

pub fn dense(g: &mut Graph<'_>, h: Var, (w, b): (Var, Var)) -> Result<Var> {
    let z = g.matmul(h, w)?;
    g.add(z, b)
}

/// Index of the largest logit per row; ties go to the lower class.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    (0..logits.leading())
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}
