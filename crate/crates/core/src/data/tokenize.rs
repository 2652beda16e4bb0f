use crate::error::{Error, Result};

/// Lowercases, splits on Unicode whitespace and strips ASCII punctuation from
/// both ends of every token. Internal punctuation (`don't`) is kept.
pub fn tokenize(text: &str) -> Result<Vec<String>> {
    let tokens: Vec<String> = text
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.is_empty() {
        Err(Error::EmptyDocument)
    } else {
        Ok(tokens)
    }
}
