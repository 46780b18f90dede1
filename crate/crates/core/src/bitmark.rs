//! Bit-level watermark baseline.
//!
//! Each unit of a generation (an n-gram of word tokens, or the whole line)
//! is hashed with the secret key and contributes the lowest hash bit. The
//! serving side picks, among several candidate generations, the one with
//! the most ones; a suspect generation "matches" when its ones strictly
//! exceed its zeros, and matches are tested against `p = 1/2`.

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{decide, VerificationReport, VerifyParams};
use crate::error::{Error, Result};
use crate::watermark::tokenize::words;
use crate::watermark::{keyed_hash64, WatermarkKey};

/// Match probability under the null.
pub const NULL_MATCH_PROBABILITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BitUnit {
    Unigram,
    Bigram,
    Trigram,
    Sentence,
}

impl BitUnit {
    fn order(self) -> Option<usize> {
        match self {
            BitUnit::Unigram => Some(1),
            BitUnit::Bigram => Some(2),
            BitUnit::Trigram => Some(3),
            BitUnit::Sentence => None,
        }
    }
}

impl fmt::Display for BitUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BitUnit::Unigram => "unigram",
            BitUnit::Bigram => "bigram",
            BitUnit::Trigram => "trigram",
            BitUnit::Sentence => "sentence",
        })
    }
}

impl FromStr for BitUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unigram" => Ok(BitUnit::Unigram),
            "bigram" => Ok(BitUnit::Bigram),
            "trigram" => Ok(BitUnit::Trigram),
            "sentence" => Ok(BitUnit::Sentence),
            other => Err(Error::InvalidArgument(format!("unknown bit unit '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitStats {
    pub ones: u64,
    pub zeros: u64,
}

impl BitStats {
    pub fn units(&self) -> u64 {
        self.ones + self.zeros
    }

    /// Ones strictly exceed zeros; ties and empty texts do not match.
    pub fn is_match(&self) -> bool {
        self.ones > self.zeros
    }

    fn push(&mut self, bit: bool) {
        if bit {
            self.ones += 1;
        } else {
            self.zeros += 1;
        }
    }
}

/// Counts hashed unit bits. n-grams slide over word tokens with overlap;
/// the sentence unit hashes the trimmed line once (blank lines have no unit).
pub fn bit_sequence(text: &str, unit: BitUnit, key: &WatermarkKey) -> BitStats {
    let mut stats = BitStats::default();
    match unit.order() {
        None => {
            let line = text.trim();
            if !line.is_empty() {
                stats.push(keyed_hash64(key, &[line]) & 1 == 1);
            }
        }
        Some(order) => {
            let tokens: Vec<&str> = words(text).map(|s| s.text).collect();
            for window in tokens.windows(order) {
                stats.push(keyed_hash64(key, window) & 1 == 1);
            }
        }
    }
    stats
}

pub fn is_match(text: &str, unit: BitUnit, key: &WatermarkKey) -> bool {
    bit_sequence(text, unit, key).is_match()
}

/// Index of the candidate with the most ones (lowest index on ties).
pub fn select_bit_watermarked<S: AsRef<str>>(
    candidates: &[S],
    unit: BitUnit,
    key: &WatermarkKey,
) -> Result<(usize, BitStats)> {
    let mut best: Option<(usize, BitStats)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let stats = bit_sequence(c.as_ref(), unit, key);
        if best.is_none_or(|(_, b)| stats.ones > b.ones) {
            best = Some((i, stats));
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("no candidate generations given".into()))
}

/// Counts matching lines and tests the count against `p = 1/2`.
///
/// The screening threshold defaults to 0.5 (a match fraction above chance).
pub fn bit_verify<S: AsRef<str> + Sync>(
    corpus: &[S],
    unit: BitUnit,
    key: &WatermarkKey,
    params: &VerifyParams,
) -> Result<VerificationReport> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("corpus is empty".into()));
    }
    params.check()?;
    let k = corpus
        .par_iter()
        .filter(|line| is_match(line.as_ref(), unit, key))
        .count() as u64;
    let n = corpus.len() as u64;
    let warnings = vec![
        "ties between ones and zeros count as non-matches, so the null match rate is slightly below 0.5 for even unit counts".to_owned(),
    ];
    decide(
        k,
        n,
        NULL_MATCH_PROBABILITY,
        params.tau.unwrap_or(NULL_MATCH_PROBABILITY),
        params.alpha,
        warnings,
    )
}

/// One candidate set from a candidate file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    pub input_id: String,
    pub candidates: Vec<String>,
}

/// Reads `input_id<TAB>candidate_text` lines; consecutive lines sharing an
/// id form one set.
pub fn read_candidate_sets(reader: impl BufRead) -> Result<Vec<CandidateSet>> {
    let mut sets: Vec<CandidateSet> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<candidates>", e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let Some((id, text)) = line.split_once('\t') else {
            return Err(Error::parse("<candidates>", i + 1, "expected 'input_id<TAB>candidate_text'"));
        };
        match sets.last_mut() {
            Some(set) if set.input_id == id => set.candidates.push(text.to_owned()),
            _ => sets.push(CandidateSet {
                input_id: id.to_owned(),
                candidates: vec![text.to_owned()],
            }),
        }
    }
    Ok(sets)
}

/// Selection output line: `input_id<TAB>selected_index<TAB>ones<TAB>zeros`.
pub fn format_selection(input_id: &str, index: usize, stats: &BitStats) -> String {
    format!("{input_id}\t{index}\t{}\t{}", stats.ones, stats.zeros)
}
