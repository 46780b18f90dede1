//! Serving-side watermarking.
//!
//! Every word whose lowercase form is a group candidate is replaced by the
//! group's target word `G[keyed_hash64(key, G) mod (M+1)]`, re-cased to
//! match the original token. Substitutes never trigger, so targets are fixed
//! points and re-applying the watermark changes nothing.

pub mod case;
pub mod key;
pub mod tokenize;

use serde::{Deserialize, Serialize};

pub use case::{recase, CasePattern};
pub use key::{keyed_hash64, WatermarkKey, MIN_KEY_LEN};
pub use tokenize::{tokenize, TokenSpan};

use crate::lexicon::{Lexicon, Role, SubstitutionGroup};

/// The word a group maps to under a key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetAssignment {
    pub group: SubstitutionGroup,
    /// Position in `[candidate, substitutes...]`, in `0..=M`.
    pub index: usize,
    pub target: String,
}

pub fn select_target(group: &SubstitutionGroup, key: &WatermarkKey) -> TargetAssignment {
    let words: Vec<&str> = group.words().collect();
    let hash = keyed_hash64(key, &words);
    let index = (hash % words.len() as u64) as usize;
    TargetAssignment {
        group: group.clone(),
        index,
        target: group.word(index).to_owned(),
    }
}

/// One entry of the replacement log. Identity substitutions are included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub start: usize,
    pub end: usize,
    pub original: String,
    pub target: String,
    /// Candidate word naming the group.
    pub group: String,
}

impl Replacement {
    pub fn is_identity(&self) -> bool {
        self.original == self.target
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Watermarked {
    pub text: String,
    pub replacements: Vec<Replacement>,
}

/// A lexicon paired with a key, with every group's target precomputed.
///
/// Immutable once built; share it freely across threads.
#[derive(Debug, Clone)]
pub struct Watermarker {
    lexicon: Lexicon,
    key: WatermarkKey,
    targets: Vec<usize>,
}

impl Watermarker {
    pub fn new(lexicon: Lexicon, key: WatermarkKey) -> Self {
        let targets = lexicon
            .groups()
            .iter()
            .map(|g| select_target(g, &key).index)
            .collect();
        Watermarker {
            lexicon,
            key,
            targets,
        }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn key(&self) -> &WatermarkKey {
        &self.key
    }

    /// Target index of group `group_index`.
    pub fn target_index(&self, group_index: usize) -> usize {
        self.targets[group_index]
    }

    pub fn target_word(&self, group_index: usize) -> &str {
        self.lexicon.groups()[group_index].word(self.targets[group_index])
    }

    pub fn assignments(&self) -> impl Iterator<Item = TargetAssignment> + '_ {
        self.lexicon
            .groups()
            .iter()
            .zip(&self.targets)
            .map(|(g, &index)| TargetAssignment {
                group: g.clone(),
                index,
                target: g.word(index).to_owned(),
            })
    }

    /// Group index of a word token if it triggers (is a candidate).
    fn trigger(&self, word: &str) -> Option<usize> {
        match self.lexicon.lookup(&word.to_lowercase()) {
            Some((gi, Role::Candidate)) => Some(gi),
            _ => None,
        }
    }

    pub fn apply(&self, text: &str) -> Watermarked {
        let mut out = String::with_capacity(text.len() + 16);
        let mut replacements = Vec::new();
        for span in tokenize(text) {
            let group = if span.is_word { self.trigger(span.text) } else { None };
            match group {
                Some(gi) => {
                    let target = recase(self.target_word(gi), CasePattern::of(span.text));
                    out.push_str(&target);
                    replacements.push(Replacement {
                        start: span.start,
                        end: span.end,
                        original: span.text.to_owned(),
                        target,
                        group: self.lexicon.groups()[gi].candidate.clone(),
                    });
                }
                None => out.push_str(span.text),
            }
        }
        Watermarked {
            text: out,
            replacements,
        }
    }

    pub fn apply_text(&self, text: &str) -> String {
        self.apply(text).text
    }
}

/// One-shot convenience over [`Watermarker::apply`].
pub fn apply_watermark(text: &str, lexicon: &Lexicon, key: &WatermarkKey) -> Watermarked {
    Watermarker::new(lexicon.clone(), key.clone()).apply(text)
}
