use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use super::vocab::{Vocab, PAD};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Neg, Label::Pos];

    pub fn class(self) -> usize {
        match self {
            Label::Neg => 0,
            Label::Pos => 1,
        }
    }

    pub fn from_class(c: usize) -> Option<Label> {
        match c {
            0 => Some(Label::Neg),
            1 => Some(Label::Pos),
            _ => None,
        }
    }
}

/// One corpus record before tokenization.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub text: String,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawTask {
    pub name: String,
    pub docs: Vec<RawDocument>,
}

/// A document as fed to the network: ids right-aligned in a window of `step`
/// slots, left-filled with PAD, so the last slot always holds the final kept
/// token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub tokens: Vec<usize>,
    pub label: Label,
    pub raw_len: usize,
}

impl Document {
    /// Keeps the first `step` ids (truncating from the end) and left-pads.
    pub fn encode(ids: &[usize], label: Label, step: usize) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptyDocument);
        }
        if step == 0 {
            return Err(Error::InvalidArgument("step must be positive".into()));
        }
        let kept = &ids[..ids.len().min(step)];
        let mut tokens = vec![PAD; step - kept.len()];
        tokens.extend_from_slice(kept);
        Ok(Document {
            tokens,
            label,
            raw_len: ids.len(),
        })
    }
}

/// Unpadded ids of one document, as stored by the prepare step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedDoc {
    pub ids: Vec<usize>,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub valid: Vec<T>,
    pub test: Vec<T>,
}

impl<T> Splits<T> {
    pub fn map<U>(self, mut f: impl FnMut(T) -> Result<U>) -> Result<Splits<U>> {
        let mut conv = |v: Vec<T>| v.into_iter().map(&mut f).collect::<Result<Vec<U>>>();
        Ok(Splits {
            train: conv(self.train)?,
            valid: conv(self.valid)?,
            test: conv(self.test)?,
        })
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.valid.len(), self.test.len())
    }
}

/// Tokenized, encoded task with its fixed train/valid/test partition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedTask {
    pub name: String,
    pub splits: Splits<EncodedDoc>,
}

impl EncodedTask {
    pub fn to_dataset(&self, step: usize) -> Result<TaskDataset> {
        let splits = self
            .splits
            .clone()
            .map(|d| Document::encode(&d.ids, d.label, step))?;
        Ok(TaskDataset {
            name: self.name.clone(),
            train: splits.train,
            valid: splits.valid,
            test: splits.test,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskDataset {
    pub name: String,
    pub train: Vec<Document>,
    pub valid: Vec<Document>,
    pub test: Vec<Document>,
}

/// Split sizes for `n` documents in the ratio 8:1:1.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (n * 8 + 5) / 10;
    let valid = ((n + 5) / 10).min(n - train);
    (train, valid, n - train - valid)
}

/// Stratified 8:1:1 partition. Each label's documents are shuffled under
/// `seed`, then all documents are interleaved in proportion to their label's
/// share so every prefix (and thus every split) keeps the label balance to
/// within one document.
pub fn split_task<T>(docs: Vec<T>, label_of: impl Fn(&T) -> Label, seed: u64) -> Result<Splits<T>> {
    let mut by_label: Vec<Vec<T>> = Label::ALL.iter().map(|_| Vec::new()).collect();
    for d in docs {
        by_label[label_of(&d).class()].push(d);
    }
    for (label, group) in Label::ALL.iter().zip(&by_label) {
        if group.is_empty() {
            return Err(Error::MissingLabel(format!("{label:?}").to_lowercase()));
        }
    }
    let mut keyed: Vec<(f64, usize, T)> = Vec::new();
    for (class, mut group) in by_label.into_iter().enumerate() {
        let mut r = rng::stream(seed, &[tag::SPLIT, class as u64]);
        group.shuffle(&mut r);
        let n = group.len() as f64;
        keyed.extend(
            group
                .into_iter()
                .enumerate()
                .map(|(rank, d)| ((rank as f64 + 0.5) / n, class, d)),
        );
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (n_train, n_valid, _) = split_sizes(keyed.len());
    let mut it = keyed.into_iter().map(|(_, _, d)| d);
    let train = it.by_ref().take(n_train).collect();
    let valid = it.by_ref().take(n_valid).collect();
    let test = it.collect();
    Ok(Splits { train, valid, test })
}

/// Shuffled mini-batches of indices `0..n` for one epoch; the final short
/// batch is kept.
pub fn make_batches(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut r = rng::stream(seed, &[epoch as u64]);
    idx.shuffle(&mut r);
    idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// Tokenizes every task, splits it, builds the shared vocabulary from the
/// training splits only and encodes all splits. Documents that tokenize to
/// nothing are skipped with a warning.
pub fn prepare_tasks(tasks: &[RawTask], seed: u64, min_freq: usize) -> Result<(Vocab, Vec<EncodedTask>)> {
    let mut tokenized = Vec::with_capacity(tasks.len());
    for (t, task) in tasks.iter().enumerate() {
        let mut docs = Vec::with_capacity(task.docs.len());
        for (i, d) in task.docs.iter().enumerate() {
            match tokenize(&d.text) {
                Ok(tokens) => docs.push((tokens, d.label)),
                Err(Error::EmptyDocument) => {
                    log::warn!("task {}: document {} is empty, skipped", task.name, i + 1)
                }
                Err(e) => return Err(e),
            }
        }
        let splits = split_task(docs, |d| d.1, rng::derive_seed(seed, &[t as u64]))?;
        tokenized.push((task.name.clone(), splits));
    }
    let vocab = Vocab::build(
        tokenized
            .iter()
            .flat_map(|(_, s)| s.train.iter().map(|(tokens, _)| tokens)),
        min_freq,
    );
    let encoded = tokenized
        .into_iter()
        .map(|(name, splits)| {
            let splits = splits.map(|(tokens, label)| {
                Ok(EncodedDoc {
                    ids: vocab.encode(&tokens),
                    label,
                })
            })?;
            Ok(EncodedTask { name, splits })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((vocab, encoded))
}
