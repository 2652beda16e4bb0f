//! Materialized vocabularies and tokenized task splits.

use std::fs;
use std::path::Path;

use kan_core::data::{prepare_tasks, read_corpus_dir, EncodedTask, RawTask};
use kan_core::Vocab;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, IoContext, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const VOCAB_FILE: &str = "vocab.json";
pub const TASK_DIR: &str = "tasks";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskEntry {
    pub name: String,
    pub file: String,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub min_freq: usize,
    pub vocab_size: usize,
    pub vocab_hash: String,
    pub tasks: Vec<TaskEntry>,
    /// Digest of the vocabulary hash and every task file digest.
    pub hash: String,
}

pub struct Prepared {
    pub vocab: Vocab,
    pub tasks: Vec<EncodedTask>,
    pub manifest: Manifest,
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v).map_err(kan_core::Error::from)? + "\n")
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).at(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Splits, builds the vocabulary and writes everything under `out`.
pub fn prepare_raw(raw: &[RawTask], out: &Path, seed: u64, min_freq: usize) -> Result<Prepared> {
    let (vocab, tasks) = prepare_tasks(raw, seed, min_freq)?;
    let task_dir = out.join(TASK_DIR);
    fs::create_dir_all(&task_dir).at(&task_dir)?;
    let mut entries = Vec::with_capacity(tasks.len());
    let mut all = Sha256::new();
    all.update(vocab.hash().as_bytes());
    for task in &tasks {
        let file = format!("{TASK_DIR}/{}.json", task.name);
        let text = to_json(task)?;
        let digest = sha256(text.as_bytes());
        all.update(digest.as_bytes());
        fs::write(out.join(&file), &text).at(out.join(&file))?;
        let (train, valid, test) = task.splits.sizes();
        entries.push(TaskEntry {
            name: task.name.clone(),
            file,
            train,
            valid,
            test,
            sha256: digest,
        });
    }
    let manifest = Manifest {
        seed,
        min_freq,
        vocab_size: vocab.len(),
        vocab_hash: vocab.hash(),
        tasks: entries,
        hash: hex::encode(all.finalize()),
    };
    fs::write(out.join(VOCAB_FILE), to_json(&vocab)?).at(out.join(VOCAB_FILE))?;
    fs::write(out.join(MANIFEST_FILE), to_json(&manifest)?).at(out.join(MANIFEST_FILE))?;
    log::info!(
        "prepared {} tasks, vocabulary {} ({})",
        manifest.tasks.len(),
        manifest.vocab_size,
        manifest.hash
    );
    Ok(Prepared {
        vocab,
        tasks,
        manifest,
    })
}

/// `kan prepare`: reads every `*.jsonl` task file of `corpus`.
pub fn cmd_prepare(corpus: &Path, out: &Path, seed: u64, min_freq: usize) -> Result<Manifest> {
    let raw = read_corpus_dir(corpus)?;
    Ok(prepare_raw(&raw, out, seed, min_freq)?.manifest)
}

/// Loads a prepared directory, checking every file against the manifest.
pub fn load_prepared(dir: &Path) -> Result<Prepared> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    let vocab: Vocab = read_json(&dir.join(VOCAB_FILE))?;
    if vocab.hash() != manifest.vocab_hash {
        return Err(CliError::Data(format!("{}: vocabulary does not match the manifest", dir.display())));
    }
    let mut tasks = Vec::with_capacity(manifest.tasks.len());
    for e in &manifest.tasks {
        let path = dir.join(&e.file);
        let text = fs::read_to_string(&path).at(&path)?;
        if sha256(text.as_bytes()) != e.sha256 {
            return Err(CliError::Data(format!("{}: digest does not match the manifest", path.display())));
        }
        tasks.push(serde_json::from_str(&text).map_err(|err| CliError::Data(format!("{}: {err}", path.display())))?);
    }
    if tasks.is_empty() {
        return Err(CliError::Data(format!("{}: no tasks", dir.display())));
    }
    Ok(Prepared {
        vocab,
        tasks,
        manifest,
    })
}
