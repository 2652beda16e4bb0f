//! Line-delimited JSON corpus files: one task per `<name>.jsonl` file, one
//! `{"text": ..., "label": "pos"|"neg"}` record per line.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::dataset::{RawDocument, RawTask};
use crate::error::{Error, Result};

pub const CORPUS_EXTENSION: &str = "jsonl";

pub fn read_task_file(path: &Path) -> Result<RawTask> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::InvalidArgument(format!("bad corpus file name {}", path.display())))?
        .to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut docs = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: RawDocument = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            detail: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(RawTask { name, docs })
}

/// Reads every `*.jsonl` file of `dir`, in file-name order.
pub fn read_corpus_dir(dir: &Path) -> Result<Vec<RawTask>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == CORPUS_EXTENSION))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no *.{CORPUS_EXTENSION} files in {}",
            dir.display()
        )));
    }
    files.iter().map(|p| read_task_file(p)).collect()
}

pub fn write_task_file(path: &Path, docs: &[RawDocument]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for d in docs {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_corpus_dir(dir: &Path, tasks: &[RawTask]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for t in tasks {
        write_task_file(&dir.join(format!("{}.{CORPUS_EXTENSION}", t.name)), &t.docs)?;
    }
    Ok(())
}
