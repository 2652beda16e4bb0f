//! Seeded family of binary sentiment tasks that share part of their cue
//! vocabulary.
//!
//! Every task has `lexicon_size` positive and `lexicon_size` negative cue
//! words. The first `round(share * lexicon_size)` of each are common to all
//! tasks; the rest are private to the task. A document is a run of neutral
//! filler words with a handful of cue words dropped in, and its label is the
//! polarity holding the strict majority among its cues.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Label, RawDocument, RawTask};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_tasks: usize,
    pub docs_per_task: usize,
    /// Fraction of each task's cue lexicon that is common to all tasks.
    pub share: f64,
    /// Cue words per polarity per task.
    pub lexicon_size: usize,
    pub neutral_words: usize,
    /// Inclusive document length range, in tokens.
    pub doc_len: (usize, usize),
    /// Inclusive range for the number of cue words per document.
    pub cues_per_doc: (usize, usize),
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_tasks: 6,
            docs_per_task: 600,
            share: 0.8,
            lexicon_size: 60,
            neutral_words: 200,
            doc_len: (6, 14),
            cues_per_doc: (2, 4),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("synthetic spec: {m}")));
        if !(0.0..=1.0).contains(&self.share) {
            return bad(&format!("share {} outside [0, 1]", self.share));
        }
        if self.n_tasks == 0 || self.docs_per_task < 2 {
            return bad("need at least one task and two documents per task");
        }
        if self.lexicon_size == 0 || self.neutral_words == 0 {
            return bad("lexicon_size and neutral_words must be positive");
        }
        let (cmin, cmax) = self.cues_per_doc;
        let (lmin, lmax) = self.doc_len;
        if cmin == 0 || cmin > cmax || lmin > lmax || lmax < cmax {
            return bad("inconsistent cues_per_doc / doc_len ranges");
        }
        Ok(())
    }

    pub fn shared_cues(&self) -> usize {
        (self.share * self.lexicon_size as f64).round() as usize
    }
}

fn cue_word(task: usize, label: Label, i: usize, shared: usize) -> String {
    let p = match label {
        Label::Pos => 'p',
        Label::Neg => 'n',
    };
    if i < shared {
        format!("s{p}{i}")
    } else {
        format!("t{task}{p}{}", i - shared)
    }
}

pub fn gen_synthetic_tasks(spec: &SyntheticSpec, seed: u64) -> Result<Vec<RawTask>> {
    spec.validate()?;
    let shared = spec.shared_cues();
    (0..spec.n_tasks)
        .map(|t| {
            let mut r = rng::stream(seed, &[tag::SYNTHETIC, t as u64]);
            let mut docs: Vec<RawDocument> = (0..spec.docs_per_task)
                .map(|i| {
                    let label = if i < spec.docs_per_task.div_ceil(2) { Label::Pos } else { Label::Neg };
                    gen_document(spec, t, label, shared, &mut r)
                })
                .collect();
            docs.shuffle(&mut r);
            Ok(RawTask {
                name: format!("task{t:02}"),
                docs,
            })
        })
        .collect()
}

fn gen_document<R: Rng>(spec: &SyntheticSpec, task: usize, label: Label, shared: usize, r: &mut R) -> RawDocument {
    let k = r.gen_range(spec.cues_per_doc.0..=spec.cues_per_doc.1);
    let minority = r.gen_range(0..=(k - 1) / 2);
    let other = match label {
        Label::Pos => Label::Neg,
        Label::Neg => Label::Pos,
    };
    let len = r.gen_range(spec.doc_len.0..=spec.doc_len.1).max(k);
    let mut words: Vec<String> = (0..len)
        .map(|_| format!("w{}", r.gen_range(0..spec.neutral_words)))
        .collect();
    let slots = index::sample(r, len, k);
    for (j, pos) in slots.into_iter().enumerate() {
        let polarity = if j < minority { other } else { label };
        words[pos] = cue_word(task, polarity, r.gen_range(0..spec.lexicon_size), shared);
    }
    RawDocument {
        text: words.join(" "),
        label,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn cue_set(task: &RawTask) -> HashSet<String> {
        task.docs
            .iter()
            .flat_map(|d| d.text.split(' ').filter(|w| !w.starts_with('w')).map(str::to_owned))
            .collect()
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = SyntheticSpec {
            docs_per_task: 100,
            n_tasks: 2,
            ..Default::default()
        };
        let a = gen_synthetic_tasks(&spec, 11).unwrap();
        let b = gen_synthetic_tasks(&spec, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_synthetic_tasks(&spec, 12).unwrap());
    }

    #[test]
    fn share_bounds_checked() {
        for share in [-0.1, 1.5, f64::NAN] {
            let spec = SyntheticSpec { share, ..Default::default() };
            assert!(gen_synthetic_tasks(&spec, 0).is_err());
        }
    }

    #[test]
    fn share_controls_lexicon_overlap() {
        let full = SyntheticSpec { share: 1.0, n_tasks: 2, docs_per_task: 400, ..Default::default() };
        let t = gen_synthetic_tasks(&full, 0).unwrap();
        assert!(cue_set(&t[0]).iter().all(|w| w.starts_with('s')));
        let none = SyntheticSpec { share: 0.0, ..full };
        let t = gen_synthetic_tasks(&none, 0).unwrap();
        assert!(cue_set(&t[0]).is_disjoint(&cue_set(&t[1])));
    }

    #[test]
    fn labels_are_balanced_and_follow_majority() {
        let spec = SyntheticSpec { n_tasks: 1, docs_per_task: 200, ..Default::default() };
        let t = &gen_synthetic_tasks(&spec, 5).unwrap()[0];
        let pos = t.docs.iter().filter(|d| d.label == Label::Pos).count();
        assert_eq!(pos, 100);
        for d in &t.docs {
            let words: Vec<&str> = d.text.split(' ').collect();
            let polarity = |w: &&str| {
                let rest = w.strip_prefix('s').or_else(|| w.strip_prefix('t'))?;
                rest.trim_start_matches(|x: char| x.is_ascii_digit()).chars().next()
            };
            let count = |c: char| words.iter().filter(|w| polarity(w) == Some(c)).count();
            let (p, n) = (count('p'), count('n'));
            match d.label {
                Label::Pos => assert!(p > n, "{}", d.text),
                Label::Neg => assert!(n > p, "{}", d.text),
            }
        }
    }
}
