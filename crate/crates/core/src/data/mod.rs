//! Corpus ingestion, tokenization, vocabulary, embeddings, splits, batching
//! and the synthetic task generator.

mod corpus;
mod dataset;
mod embeddings;
mod synthetic;
mod tokenize;
mod vocab;

pub use corpus::{read_corpus_dir, read_task_file, write_corpus_dir, write_task_file, CORPUS_EXTENSION};
pub use dataset::{
    make_batches, prepare_tasks, split_sizes, split_task, Document, EncodedDoc, EncodedTask, Label,
    RawDocument, RawTask, Splits, TaskDataset,
};
pub use embeddings::{load_embeddings, random_embeddings, OOV_RANGE, RANDOM_EMBED_RANGE};
pub use synthetic::{gen_synthetic_tasks, SyntheticSpec};
pub use tokenize::tokenize;
pub(crate) use vocab::hex;
pub use vocab::{Vocab, DEFAULT_MIN_FREQ, PAD, PAD_TOKEN, UNK, UNK_TOKEN};
