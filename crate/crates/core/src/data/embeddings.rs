use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::vocab::{Vocab, PAD};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Half-width of the uniform draw for tokens missing from the embedding file.
pub const OOV_RANGE: f64 = 0.25;

/// Half-width of the uniform draw for fully random tables. Larger than
/// [`OOV_RANGE`] so that fixed random inputs are not drowned by the recurrent
/// state.
pub const RANDOM_EMBED_RANGE: f64 = 1.0;

/// Reads a text embedding file (`token v1 v2 ... v_dim` per line) into a
/// `|vocab| × dim` matrix. Tokens absent from the file get a seeded random
/// row, the PAD row stays zero, and the first occurrence of a token wins.
pub fn load_embeddings(path: &Path, vocab: &Vocab, dim: usize, seed: u64) -> Result<Tensor> {
    let reader = BufReader::new(File::open(path)?);
    let mut table = Tensor::zeros(&[vocab.len(), dim]);
    let mut found = vec![false; vocab.len()];
    found[PAD] = true;
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let parse_err = |detail: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            detail,
        };
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values = fields
            .map(str::parse::<f64>)
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| parse_err(format!("malformed value: {e}")))?;
        if values.is_empty() {
            return Err(parse_err("malformed line: token without a vector".into()));
        }
        if values.len() != dim {
            return Err(parse_err(format!(
                "dimension mismatch: expected {dim} values, found {}",
                values.len()
            )));
        }
        let id = vocab.id(token);
        if vocab.token(id) == Some(token) && !found[id] {
            table.row_mut(id).copy_from_slice(&values);
            found[id] = true;
        }
    }
    let missing = found.iter().filter(|f| !**f).count();
    if missing > 0 {
        log::info!("{missing} of {} vocabulary rows not in {}; drawing them randomly", vocab.len(), path.display());
    }
    for (id, hit) in found.iter().enumerate() {
        if !hit {
            fill_random_row(table.row_mut(id), seed, id, OOV_RANGE);
        }
    }
    Ok(table)
}

/// A fully random embedding table with rows from U(-range, range) and a
/// zero PAD row.
pub fn random_embeddings(vocab_len: usize, dim: usize, range: f64, seed: u64) -> Tensor {
    let mut table = Tensor::zeros(&[vocab_len, dim]);
    for id in 0..vocab_len {
        if id != PAD {
            fill_random_row(table.row_mut(id), seed, id, range);
        }
    }
    table
}

fn fill_random_row(row: &mut [f64], seed: u64, id: usize, range: f64) {
    use rand::Rng;
    let mut r = rng::stream(seed, &[tag::EMBEDDINGS, id as u64]);
    for v in row {
        *v = r.gen_range(-range..range);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn vocab() -> Vocab {
        Vocab::from(vec!["<pad>".into(), "<unk>".into(), "good".into(), "bad".into()])
    }

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_vectors_and_zero_pad() {
        let f = write("good 0.5 -1.5 2\nother 1 1 1\n");
        let t = load_embeddings(f.path(), &vocab(), 3, 0).unwrap();
        assert_eq!(t.shape(), &[4, 3]);
        assert_eq!(t.row(2), &[0.5, -1.5, 2.0]);
        assert!(t.row(PAD).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_rows_are_seeded() {
        let f = write("good 0.5 -1.5 2\n");
        let a = load_embeddings(f.path(), &vocab(), 3, 0).unwrap();
        let b = load_embeddings(f.path(), &vocab(), 3, 0).unwrap();
        assert_eq!(a.row(3), b.row(3));
        assert!(a.row(3).iter().all(|v| v.abs() < OOV_RANGE));
        assert_eq!(a.row(3), random_embeddings(4, 3, OOV_RANGE, 0).row(3));
        let c = load_embeddings(f.path(), &vocab(), 3, 1).unwrap();
        assert_ne!(a.row(3), c.row(3));
    }

    #[test]
    fn dimension_mismatch_names_the_line() {
        let f = write("good 1 2 3\nbad 1 2\n");
        let err = load_embeddings(f.path(), &vocab(), 3, 0).unwrap_err();
        match err {
            Error::Parse { line, detail, .. } => {
                assert_eq!(line, 2);
                assert!(detail.contains("dimension"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn malformed_value_is_an_error() {
        let f = write("good 1 x 3\n");
        assert!(matches!(
            load_embeddings(f.path(), &vocab(), 3, 0),
            Err(Error::Parse { line: 1, .. })
        ));
        let f = write("lonely\n");
        assert!(matches!(
            load_embeddings(f.path(), &vocab(), 3, 0),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
