use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::mask::{retrieve_mask, TaskMask};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::rnn::{DenseHead, GruParams, GRU_TENSOR_NAMES, INIT_RANGE};
use crate::trainer::{Checkpoint, Hyperparams};

/// How MCL obtains the mask of a task after the first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskPolicy {
    /// Binarized `σ(s_max · e_t)` from the task-embedding table.
    Trained,
    /// Every unit accessible for every task.
    AllOnes,
}

impl MaskPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskPolicy::Trained => "trained",
            MaskPolicy::AllOnes => "all_ones",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "trained" => Ok(MaskPolicy::Trained),
            "all_ones" => Ok(MaskPolicy::AllOnes),
            other => Err(Error::Checkpoint(format!("unknown mask policy `{other}`"))),
        }
    }
}

/// All parameters of one continual learner. Task ids are positions in the
/// learning order.
#[derive(Clone, Debug)]
pub struct KanModel {
    pub hp: Hyperparams,
    pub seed: u64,
    pub policy: MaskPolicy,
    /// Fixed word embeddings, `[vocab, embed_dim]`, shared between runs.
    pub embeddings: Arc<Tensor>,
    pub kb: GruParams,
    pub ac: GruParams,
    /// Task-embedding table, one row per task given an AC phase.
    pub ac_emb: Tensor,
    pub ac_head: DenseHead,
    pub heads: Vec<DenseHead>,
}

impl KanModel {
    pub fn new(hp: Hyperparams, seed: u64, policy: MaskPolicy, embeddings: Arc<Tensor>) -> Result<Self> {
        hp.validate()?;
        if embeddings.shape().len() != 2 || embeddings.last_dim() != hp.embed_dim {
            return Err(Error::shape(
                "kan_model",
                format!(
                    "embeddings {:?} for embed_dim {}",
                    embeddings.shape(),
                    hp.embed_dim
                ),
            ));
        }
        let h = hp.hidden_dim;
        let kb = GruParams::new(hp.embed_dim, h, &mut rng::stream(seed, &[tag::KB_INIT]));
        let ac = GruParams::new(h, h, &mut rng::stream(seed, &[tag::AC_INIT]));
        let ac_head = DenseHead::new(h, &mut rng::stream(seed, &[tag::AC_HEAD_INIT]));
        Ok(KanModel {
            hp,
            seed,
            policy,
            embeddings,
            kb,
            ac,
            ac_emb: Tensor::zeros(&[0, h]),
            ac_head,
            heads: Vec::new(),
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.hp.hidden_dim
    }

    pub fn num_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn num_task_embeddings(&self) -> usize {
        self.ac_emb.shape()[0]
    }

    /// Creates heads up to and including task `t`.
    pub fn ensure_head(&mut self, t: usize) {
        while self.heads.len() <= t {
            let i = self.heads.len() as u64;
            let head = DenseHead::new(self.hp.hidden_dim, &mut rng::stream(self.seed, &[tag::HEAD_INIT, i]));
            self.heads.push(head);
        }
    }

    /// Grows the task-embedding table up to and including row `t`; new rows
    /// are drawn from U(-0.08, 0.08).
    pub fn ensure_task_embedding(&mut self, t: usize) {
        let h = self.hp.hidden_dim;
        let have = self.num_task_embeddings();
        if have > t {
            return;
        }
        let mut data = self.ac_emb.data().to_vec();
        for i in have..=t {
            let mut r = rng::stream(self.seed, &[tag::TASK_EMB_INIT, i as u64]);
            data.extend(Tensor::uniform(&[1, h], -INIT_RANGE, INIT_RANGE, &mut r).into_data());
        }
        self.ac_emb = Tensor::new(vec![t + 1, h], data).expect("rows of width h");
    }

    pub fn head(&self, t: usize) -> Result<&DenseHead> {
        self.heads.get(t).ok_or(Error::UnknownTask(t))
    }

    /// The mask MCL trains and predicts task `t` with: all ones for the first
    /// task or under [`MaskPolicy::AllOnes`], otherwise the retrieved binary
    /// mask.
    pub fn task_mask(&self, t: usize) -> Result<TaskMask> {
        if t == 0 || self.policy == MaskPolicy::AllOnes {
            return Ok(TaskMask::ones(self.hp.hidden_dim));
        }
        retrieve_mask(t, self.hp.s_max, &self.ac_emb)
    }

    /// Every parameter tensor under its canonical checkpoint name.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (name, t) in self.kb.tensors() {
            out.push((format!("kb.gru.{name}"), t));
        }
        for (name, t) in self.ac.tensors() {
            out.push((format!("ac.gru.{name}"), t));
        }
        out.push(("ac.emb".into(), &self.ac_emb));
        out.push(("ac.head.weight".into(), &self.ac_head.weight));
        out.push(("ac.head.bias".into(), &self.ac_head.bias));
        for (i, h) in self.heads.iter().enumerate() {
            out.push((format!("head.{i}.weight"), &h.weight));
            out.push((format!("head.{i}.bias"), &h.bias));
        }
        out
    }

    /// Word embeddings are not stored; they are rebuilt from the run
    /// configuration and matched through the vocabulary hash.
    pub fn to_checkpoint(&self, vocab_hash: &str) -> Checkpoint {
        let mut c = Checkpoint::new(vocab_hash, self.hp.clone());
        for (name, t) in self.named_tensors() {
            c.insert(name, t);
        }
        c.meta.insert("seed".into(), self.seed.to_string());
        c.meta.insert("policy".into(), self.policy.as_str().into());
        c.meta.insert("heads".into(), self.heads.len().to_string());
        c
    }

    pub fn from_checkpoint(c: &Checkpoint, embeddings: Arc<Tensor>) -> Result<Self> {
        let seed = c
            .meta("seed")?
            .parse()
            .map_err(|_| Error::Checkpoint("seed is not an integer".into()))?;
        let policy = MaskPolicy::parse(c.meta("policy")?)?;
        let n_heads: usize = c
            .meta("heads")?
            .parse()
            .map_err(|_| Error::Checkpoint("heads is not an integer".into()))?;
        let mut m = KanModel::new(c.hyperparams.clone(), seed, policy, embeddings)?;
        let gru = |prefix: &str, into: &mut GruParams| -> Result<()> {
            for ((name, slot), expected) in into.tensors_mut().into_iter().zip(GRU_TENSOR_NAMES) {
                debug_assert_eq!(name, expected);
                *slot = c.tensor(&format!("{prefix}.{name}"))?.clone();
            }
            into.validate()
        };
        gru("kb.gru", &mut m.kb)?;
        gru("ac.gru", &mut m.ac)?;
        let h = m.hp.hidden_dim;
        if m.kb.input_dim() != m.hp.embed_dim || m.kb.hidden_dim() != h || m.ac.input_dim() != h || m.ac.hidden_dim() != h {
            return Err(Error::Checkpoint("recurrent weights disagree with hyperparameters".into()));
        }
        m.ac_emb = c.tensor("ac.emb")?.clone();
        if m.ac_emb.shape().len() != 2 || m.ac_emb.last_dim() != h {
            return Err(Error::Checkpoint(format!("ac.emb has shape {:?}", m.ac_emb.shape())));
        }
        let head = |prefix: &str| -> Result<DenseHead> {
            let d = DenseHead {
                weight: c.tensor(&format!("{prefix}.weight"))?.clone(),
                bias: c.tensor(&format!("{prefix}.bias"))?.clone(),
            };
            d.validate(h)?;
            Ok(d)
        };
        m.ac_head = head("ac.head")?;
        m.heads = (0..n_heads)
            .map(|i| head(&format!("head.{i}")))
            .collect::<Result<_>>()?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> KanModel {
        let hp = Hyperparams {
            embed_dim: 3,
            hidden_dim: 4,
            ..Default::default()
        };
        KanModel::new(hp, 7, MaskPolicy::Trained, Arc::new(Tensor::zeros(&[5, 3]))).unwrap()
    }

    #[test]
    fn first_task_mask_is_all_ones() {
        let m = tiny();
        assert_eq!(m.task_mask(0).unwrap().values, Tensor::ones(&[1, 4]));
        assert!(matches!(m.task_mask(1), Err(Error::MissingTaskEmbedding(1))));
    }

    #[test]
    fn heads_and_rows_do_not_depend_on_growth_pattern() {
        let mut a = tiny();
        let mut b = tiny();
        a.ensure_head(2);
        b.ensure_head(0);
        b.ensure_head(1);
        b.ensure_head(2);
        assert_eq!(a.heads, b.heads);
        a.ensure_task_embedding(3);
        b.ensure_task_embedding(1);
        b.ensure_task_embedding(3);
        assert!(a.ac_emb.bit_eq(&b.ac_emb));
        assert!(a.ac_emb.data().iter().all(|v| v.abs() < INIT_RANGE));
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut m = tiny();
        m.ensure_head(1);
        m.ensure_task_embedding(1);
        let c = m.to_checkpoint("hash");
        let c = Checkpoint::from_json(&c.to_json().unwrap()).unwrap();
        let back = KanModel::from_checkpoint(&c, m.embeddings.clone()).unwrap();
        for ((n1, t1), (n2, t2)) in m.named_tensors().into_iter().zip(back.named_tensors()) {
            assert_eq!(n1, n2);
            assert!(t1.bit_eq(t2), "{n1}");
        }
        assert_eq!(back.heads.len(), 2);
    }
}
