//! Forward passes of the two KAN components.

use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::data::Document;
use crate::error::{Error, Result};
use crate::rnn::{dense, run_gru, run_sequence, GruVars};

/// Token rows and class labels of one mini-batch.
#[derive(Clone, Debug)]
pub struct Batch<'d> {
    pub tokens: Vec<&'d [usize]>,
    pub labels: Vec<usize>,
}

impl<'d> Batch<'d> {
    pub fn select(docs: &'d [Document], idx: &[usize]) -> Self {
        Batch {
            tokens: idx.iter().map(|&i| docs[i].tokens.as_slice()).collect(),
            labels: idx.iter().map(|&i| docs[i].label.class()).collect(),
        }
    }

    pub fn of(docs: &'d [Document]) -> Self {
        Batch {
            tokens: docs.iter().map(|d| d.tokens.as_slice()).collect(),
            labels: docs.iter().map(|d| d.label.class()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Handles produced by the MCL forward pass.
#[derive(Clone, Copy, Debug)]
pub struct MclOutput {
    /// KB outputs of every step before masking, `[B, T, H]`.
    pub states: Var,
    pub masked: Var,
    /// `[B, 2]`.
    pub logits: Var,
}

/// KB-RNN over the batch, returning the stacked hidden states `[B, T, H]`.
pub fn kb_states<R: Rng + ?Sized>(
    g: &mut Graph<'_>,
    embeddings: Var,
    kb: &GruVars,
    batch: &Batch<'_>,
    dropout_keep: f64,
    rng: &mut R,
) -> Result<Var> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let hs = run_sequence(g, &batch.tokens, embeddings, kb, dropout_keep, rng)?;
    g.stack(&hs)
}

/// `Dense_t(h_step ⊙ a_t)`, with `mask` a `[1, H]` row repeated over steps.
pub fn mcl_forward<R: Rng + ?Sized>(
    g: &mut Graph<'_>,
    embeddings: Var,
    kb: &GruVars,
    head: (Var, Var),
    mask: Var,
    batch: &Batch<'_>,
    dropout_keep: f64,
    rng: &mut R,
) -> Result<MclOutput> {
    let states = kb_states(g, embeddings, kb, batch, dropout_keep, rng)?;
    let masked = g.mul(states, mask)?;
    let last = g.slice_last_step(masked)?;
    let logits = dense(g, last, head)?;
    Ok(MclOutput {
        states,
        masked,
        logits,
    })
}

/// `σ(s · e_t)` where `e_t` is row `t` of `table`.
pub fn soft_mask(g: &mut Graph<'_>, table: Var, t: usize, s: f64) -> Result<Var> {
    let e = g.embedding_lookup(table, &[t])?;
    let scaled = g.scale(e, s);
    Ok(g.sigmoid(scaled))
}

/// AC-RNN over the masked KB outputs; logits of the AC head on its last state.
pub fn ac_forward<R: Rng + ?Sized>(
    g: &mut Graph<'_>,
    embeddings: Var,
    kb: &GruVars,
    ac: &GruVars,
    ac_head: (Var, Var),
    mask: Var,
    batch: &Batch<'_>,
    dropout_keep: f64,
    rng: &mut R,
) -> Result<Var> {
    let states = kb_states(g, embeddings, kb, batch, dropout_keep, rng)?;
    let masked = g.mul(states, mask)?;
    let steps = g.value(masked).shape()[1];
    let inputs = (0..steps)
        .map(|i| g.slice_step(masked, i))
        .collect::<Result<Vec<_>>>()?;
    let hs = run_gru(g, &inputs, ac)?;
    let last = *hs.last().expect("at least one step");
    dense(g, last, ac_head)
}
