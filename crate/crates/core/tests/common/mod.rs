#![allow(dead_code)]

use std::sync::Arc;

use kan_core::data::{gen_synthetic_tasks, prepare_tasks, random_embeddings, SyntheticSpec, RANDOM_EMBED_RANGE};
use kan_core::{Hyperparams, TaskDataset, Tensor};

/// A small network that trains in well under a second per task.
pub fn tiny_hp() -> Hyperparams {
    Hyperparams {
        embed_dim: 8,
        hidden_dim: 8,
        step: 12,
        batch_size: 16,
        patience: 2,
        max_epochs: 3,
        ..Default::default()
    }
}

pub fn tiny_spec(n_tasks: usize) -> SyntheticSpec {
    SyntheticSpec {
        n_tasks,
        docs_per_task: 80,
        lexicon_size: 10,
        neutral_words: 30,
        doc_len: (4, 10),
        cues_per_doc: (2, 3),
        ..Default::default()
    }
}

/// Generated tasks in generation order with a random embedding table.
pub fn suite(spec: &SyntheticSpec, seed: u64, hp: &Hyperparams) -> (Vec<TaskDataset>, Arc<Tensor>) {
    let raw = gen_synthetic_tasks(spec, seed).unwrap();
    let (vocab, encoded) = prepare_tasks(&raw, seed, 2).unwrap();
    let tasks = encoded.iter().map(|e| e.to_dataset(hp.step).unwrap()).collect();
    let emb = random_embeddings(vocab.len(), hp.embed_dim, RANDOM_EMBED_RANGE, seed);
    (tasks, Arc::new(emb))
}
