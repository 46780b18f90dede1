//! Substitution lexicons: the confidential candidate/substitute groups.
//!
//! A lexicon is a list of groups `[candidate, sub_1, ..., sub_M]` with a
//! uniform `M`. Every word appears in at most one group, in one role, so a
//! word seen in suspect text maps back to a single group unambiguously.
//!
//! Two on-disk formats are handled here:
//!
//! * lexicon TSV: a `#kind=<synonym|spelling> M=<int>` header followed by one
//!   `candidate<TAB>sub_1<TAB>...<TAB>sub_M` line per group;
//! * lexeme TSV: `lemma<TAB>pos<TAB>frequency<TAB>syn_1,syn_2,...`, the
//!   frequency-ranked input to [`build_synonym_lexicon`].

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::watermark::tokenize::is_single_word;

const BUNDLED_SPELLING: &str = include_str!("../data/us_uk_spelling.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubstitutionKind {
    Synonym,
    Spelling,
}

impl fmt::Display for SubstitutionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubstitutionKind::Synonym => "synonym",
            SubstitutionKind::Spelling => "spelling",
        })
    }
}

impl FromStr for SubstitutionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synonym" => Ok(SubstitutionKind::Synonym),
            "spelling" => Ok(SubstitutionKind::Spelling),
            other => Err(Error::InvalidArgument(format!("unknown lexicon kind '{other}'"))),
        }
    }
}

/// An entry of the frequency-ranked lexical resource.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyLexeme {
    pub lemma: String,
    pub pos: String,
    pub frequency: u64,
    /// Resource order. May contain multi-word entries; those are dropped at
    /// build time.
    pub synonyms: Vec<String>,
}

impl FrequencyLexeme {
    pub fn new(
        lemma: impl Into<String>,
        pos: impl Into<String>,
        frequency: u64,
        synonyms: Vec<String>,
    ) -> Result<Self> {
        let lexeme = FrequencyLexeme {
            lemma: lemma.into(),
            pos: pos.into(),
            frequency,
            synonyms,
        };
        lexeme.check()?;
        Ok(lexeme)
    }

    fn check(&self) -> Result<()> {
        let lemma = &self.lemma;
        if !is_lexicon_word(lemma) {
            return Err(Error::InvalidArgument(format!(
                "lemma '{lemma}' must be a single lowercase word"
            )));
        }
        let mut seen = HashSet::new();
        for syn in &self.synonyms {
            if syn.is_empty() || syn.to_lowercase() != *syn {
                return Err(Error::InvalidArgument(format!(
                    "synonym '{syn}' of '{lemma}' must be non-empty and lowercase"
                )));
            }
            if syn == lemma {
                return Err(Error::InvalidArgument(format!("'{lemma}' lists itself as a synonym")));
            }
            if !seen.insert(syn.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "synonym '{syn}' repeated for '{lemma}'"
                )));
            }
        }
        Ok(())
    }
}

/// Words stored in a lexicon: non-empty, lowercase, one token.
fn is_lexicon_word(word: &str) -> bool {
    is_single_word(word) && word.to_lowercase() == word
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubstitutionGroup {
    pub candidate: String,
    pub substitutes: Vec<String>,
    pub kind: SubstitutionKind,
}

impl SubstitutionGroup {
    pub fn new(
        candidate: impl Into<String>,
        substitutes: Vec<String>,
        kind: SubstitutionKind,
    ) -> Self {
        SubstitutionGroup {
            candidate: candidate.into(),
            substitutes,
            kind,
        }
    }

    pub fn m(&self) -> usize {
        self.substitutes.len()
    }

    /// The word array `[candidate, substitutes...]`.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.candidate.as_str()).chain(self.substitutes.iter().map(String::as_str))
    }

    /// Word at position `index` of the word array.
    pub fn word(&self, index: usize) -> &str {
        if index == 0 {
            &self.candidate
        } else {
            &self.substitutes[index - 1]
        }
    }
}

/// Role of a word inside its group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Candidate,
    /// Zero-based position in the substitute list.
    Substitute(usize),
}

impl Role {
    /// Position in the group's word array.
    pub fn index(self) -> usize {
        match self {
            Role::Candidate => 0,
            Role::Substitute(i) => i + 1,
        }
    }
}

/// An invariant violation found by [`validate_lexicon`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub word: String,
    /// Candidates of the groups involved.
    pub groups: Vec<String>,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "'{}' {}", self.word, self.reason)?;
        if !self.groups.is_empty() {
            write!(f, " (groups: {})", self.groups.join(", "))?;
        }
        Ok(())
    }
}

/// Checks every lexicon invariant and reports all violations found.
pub fn validate_lexicon(
    kind: SubstitutionKind,
    m: usize,
    groups: &[SubstitutionGroup],
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut violation = |word: &str, groups: Vec<String>, reason: String| {
        out.push(Violation {
            word: word.to_owned(),
            groups,
            reason,
        })
    };

    if m == 0 {
        violation("", vec![], "lexicon has M = 0".into());
    }
    if kind == SubstitutionKind::Spelling && m != 1 {
        violation("", vec![], format!("spelling lexicon must have M = 1, has M = {m}"));
    }

    let mut owner: HashMap<&str, usize> = HashMap::new();
    for (gi, group) in groups.iter().enumerate() {
        let name = || vec![group.candidate.clone()];
        if group.kind != kind {
            violation(&group.candidate, name(), format!("group kind {} != lexicon kind {kind}", group.kind));
        }
        if group.m() != m {
            violation(&group.candidate, name(), format!("group has {} substitutes, expected {m}", group.m()));
        }
        let mut in_group = HashSet::new();
        for word in group.words() {
            if !is_lexicon_word(word) {
                violation(word, name(), "is not a single lowercase word".into());
            }
            if !in_group.insert(word) {
                let reason = if word == group.candidate {
                    "is both candidate and substitute"
                } else {
                    "is listed twice as a substitute"
                };
                violation(word, name(), reason.into());
                continue;
            }
            match owner.get(word) {
                Some(&other) if other != gi => violation(
                    word,
                    vec![groups[other].candidate.clone(), group.candidate.clone()],
                    "appears in more than one group".into(),
                ),
                Some(_) => {}
                None => {
                    owner.insert(word, gi);
                }
            }
        }
    }
    out
}

/// An immutable, validated set of substitution groups.
#[derive(Debug, Clone)]
pub struct Lexicon {
    kind: SubstitutionKind,
    m: usize,
    groups: Vec<SubstitutionGroup>,
    index: HashMap<String, (usize, Role)>,
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.m == other.m && self.groups == other.groups
    }
}

impl Eq for Lexicon {}

impl Lexicon {
    pub fn new(kind: SubstitutionKind, m: usize, groups: Vec<SubstitutionGroup>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidLexicon("empty lexicon".into()));
        }
        let violations = validate_lexicon(kind, m, &groups);
        if !violations.is_empty() {
            let listed: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(Error::InvalidLexicon(listed.join("; ")));
        }
        let mut index = HashMap::new();
        for (gi, group) in groups.iter().enumerate() {
            index.insert(group.candidate.clone(), (gi, Role::Candidate));
            for (si, sub) in group.substitutes.iter().enumerate() {
                index.insert(sub.clone(), (gi, Role::Substitute(si)));
            }
        }
        Ok(Lexicon {
            kind,
            m,
            groups,
            index,
        })
    }

    pub fn kind(&self) -> SubstitutionKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn groups(&self) -> &[SubstitutionGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Group index and role of a lowercase word, if it belongs to the lexicon.
    pub fn lookup(&self, word: &str) -> Option<(usize, Role)> {
        self.index.get(word).copied()
    }

    /// Re-runs the invariant checks. Always empty for a constructed lexicon.
    pub fn violations(&self) -> Vec<Violation> {
        validate_lexicon(self.kind, self.m, &self.groups)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("#kind={} M={}\n", self.kind, self.m);
        for group in &self.groups {
            let line: Vec<&str> = group.words().collect();
            out.push_str(&line.join("\t"));
            out.push('\n');
        }
        out
    }

    /// Hex SHA-256 of the canonical TSV encoding. Identifies the rules
    /// without revealing the key.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_tsv().as_bytes()))
    }

    /// Parses lexicon TSV. `origin` only labels error messages.
    ///
    /// The header line is optional on input; without it the kind defaults to
    /// synonym and `M` is taken from the first group line.
    pub fn from_tsv_str(text: &str, origin: &Path) -> Result<Self> {
        let mut kind = SubstitutionKind::Synonym;
        let mut m: Option<usize> = None;
        let mut groups = Vec::new();
        let mut first_seen: HashMap<String, usize> = HashMap::new();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                if !groups.is_empty() || m.is_some() {
                    return Err(Error::parse(origin, line_no, "header after group lines"));
                }
                let (k, hm) = parse_header(header).map_err(|msg| Error::parse(origin, line_no, msg))?;
                kind = k;
                m = Some(hm);
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 || fields.iter().any(|f| f.is_empty()) {
                return Err(Error::parse(origin, line_no, "malformed line"));
            }
            let sub_count = fields.len() - 1;
            match m {
                None => m = Some(sub_count),
                Some(expected) if expected != sub_count => {
                    return Err(Error::parse(origin, line_no, "inconsistent M"));
                }
                Some(_) => {}
            }
            for word in &fields {
                if !is_lexicon_word(word) {
                    return Err(Error::parse(
                        origin,
                        line_no,
                        format!("'{word}' is not a single lowercase word"),
                    ));
                }
                if let Some(prev) = first_seen.insert((*word).to_owned(), line_no) {
                    return Err(Error::parse(
                        origin,
                        line_no,
                        format!("duplicate word '{word}' (first seen at line {prev})"),
                    ));
                }
            }
            groups.push(SubstitutionGroup::new(
                fields[0],
                fields[1..].iter().map(|s| (*s).to_owned()).collect(),
                kind,
            ));
        }

        let Some(m) = m.filter(|_| !groups.is_empty()) else {
            return Err(Error::InvalidLexicon("empty lexicon".into()));
        };
        Lexicon::new(kind, m, groups)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv_str(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

fn parse_header(header: &str) -> std::result::Result<(SubstitutionKind, usize), String> {
    let mut kind = None;
    let mut m = None;
    for field in header.split_whitespace() {
        match field.split_once('=') {
            Some(("kind", v)) => kind = Some(v.parse::<SubstitutionKind>().map_err(|e| e.to_string())?),
            Some(("M", v)) => m = Some(v.parse::<usize>().map_err(|_| format!("bad M value '{v}'"))?),
            _ => return Err(format!("unrecognized header field '{field}'")),
        }
    }
    match (kind, m) {
        (Some(k), Some(m)) => Ok((k, m)),
        _ => Err("header must carry kind=<synonym|spelling> and M=<int>".into()),
    }
}

/// Builds a synonym lexicon from frequency-ranked lexemes.
///
/// Walks lexemes from most to least frequent (ties by lemma). A lexeme
/// yields a group `(lemma, last M single-word synonyms)` unless it has fewer
/// than `M` usable synonyms or any of its words already belongs to an
/// earlier group; such lexemes are skipped.
pub fn build_synonym_lexicon(
    lexemes: &[FrequencyLexeme],
    m: usize,
    target_size: usize,
) -> Result<Lexicon> {
    if m == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    if target_size == 0 {
        return Err(Error::InvalidArgument("target size must be at least 1".into()));
    }

    let mut ranked: Vec<&FrequencyLexeme> = lexemes.iter().collect();
    ranked.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.lemma.cmp(&b.lemma)));

    let mut used: HashSet<&str> = HashSet::new();
    let mut groups = Vec::with_capacity(target_size);
    for lexeme in ranked {
        if groups.len() == target_size {
            break;
        }
        let usable: Vec<&String> = lexeme
            .synonyms
            .iter()
            .filter(|s| is_lexicon_word(s) && **s != lexeme.lemma)
            .collect();
        if usable.len() < m {
            continue;
        }
        let substitutes = &usable[usable.len() - m..];
        let collides = used.contains(lexeme.lemma.as_str())
            || substitutes.iter().any(|s| used.contains(s.as_str()));
        if collides {
            continue;
        }
        used.insert(&lexeme.lemma);
        used.extend(substitutes.iter().map(|s| s.as_str()));
        groups.push(SubstitutionGroup::new(
            lexeme.lemma.clone(),
            substitutes.iter().map(|s| (*s).clone()).collect(),
            SubstitutionKind::Synonym,
        ));
    }

    if groups.len() < target_size {
        return Err(Error::InsufficientGroups {
            achieved: groups.len(),
            requested: target_size,
        });
    }
    Lexicon::new(SubstitutionKind::Synonym, m, groups)
}

/// One group per `(us, uk)` pair with the US form as candidate.
pub fn build_spelling_lexicon<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<Lexicon> {
    let groups = pairs
        .iter()
        .map(|(us, uk)| {
            SubstitutionGroup::new(us.as_ref(), vec![uk.as_ref().to_owned()], SubstitutionKind::Spelling)
        })
        .collect();
    Lexicon::new(SubstitutionKind::Spelling, 1, groups)
}

/// The US/UK pairs shipped with the crate.
pub fn bundled_spelling_pairs() -> Vec<(String, String)> {
    parse_spelling_pairs(BUNDLED_SPELLING, Path::new("<bundled>"))
        .expect("bundled spelling data is well formed")
}

/// Parses `us<TAB>uk` lines; blank lines and `#` comments are skipped.
pub fn parse_spelling_pairs(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split('\t').collect::<Vec<_>>().as_slice() {
            [us, uk] if !us.is_empty() && !uk.is_empty() => {
                pairs.push(((*us).to_owned(), (*uk).to_owned()))
            }
            _ => return Err(Error::parse(origin, i + 1, "expected 'us<TAB>uk'")),
        }
    }
    Ok(pairs)
}

/// Parses lexeme TSV (`lemma<TAB>pos<TAB>frequency<TAB>syn,syn,...`).
pub fn parse_lexemes(text: &str, origin: &Path) -> Result<Vec<FrequencyLexeme>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(Error::parse(origin, line_no, "expected lemma, pos, frequency, synonyms"));
        }
        let frequency = fields[2]
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::parse(origin, line_no, format!("bad frequency '{}'", fields[2])))?;
        let synonyms = fields
            .get(3)
            .map(|s| {
                s.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_owned)
                    .collect()
            })
            .unwrap_or_default();
        let lexeme = FrequencyLexeme::new(fields[0], fields[1], frequency, synonyms)
            .map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
        out.push(lexeme);
    }
    Ok(out)
}

pub fn load_lexemes(path: &Path) -> Result<Vec<FrequencyLexeme>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lexemes(&text, path)
}

/// Keeps lexemes whose part-of-speech tag equals `pos` (case-insensitive).
pub fn retain_pos(lexemes: &mut Vec<FrequencyLexeme>, pos: &str) {
    lexemes.retain(|l| l.pos.eq_ignore_ascii_case(pos));
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lexeme(lemma: &str, freq: u64, syns: &[&str]) -> FrequencyLexeme {
        FrequencyLexeme::new(lemma, "ADJ", freq, syns.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    fn words(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn takes_last_m_synonyms_of_most_frequent() {
        let lexemes = vec![
            lexeme("great", 900, &["outstanding", "keen", "bang-up", "smashing"]),
            lexeme("new", 800, &["novel"]),
        ];
        let lex = build_synonym_lexicon(&lexemes, 2, 1).unwrap();
        assert_eq!(lex.len(), 1);
        assert_eq!(lex.groups()[0].candidate, "great");
        assert_eq!(lex.groups()[0].substitutes, words(&["bang-up", "smashing"]));
    }

    #[test]
    fn skips_lexemes_with_too_few_synonyms() {
        let lexemes = vec![lexeme("new", 800, &["novel"])];
        match build_synonym_lexicon(&lexemes, 2, 1) {
            Err(Error::InsufficientGroups { achieved: 0, requested: 1 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn m_zero_rejected() {
        let lexemes = vec![lexeme("great", 900, &["outstanding"])];
        assert!(matches!(build_synonym_lexicon(&lexemes, 0, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn resorts_input_and_breaks_ties_by_lemma() {
        let lexemes = vec![
            lexeme("small", 10, &["little"]),
            lexeme("big", 50, &["large"]),
            lexeme("able", 50, &["capable"]),
        ];
        let lex = build_synonym_lexicon(&lexemes, 1, 3).unwrap();
        let order: Vec<&str> = lex.groups().iter().map(|g| g.candidate.as_str()).collect();
        assert_eq!(order, ["able", "big", "small"]);
    }

    #[test]
    fn multi_word_synonyms_are_filtered_before_last_m() {
        let lexemes = vec![lexeme("great", 900, &["outstanding", "bang-up", "first class", "first_class"])];
        let lex = build_synonym_lexicon(&lexemes, 2, 1).unwrap();
        assert_eq!(lex.groups()[0].substitutes, words(&["outstanding", "bang-up"]));
    }

    #[test]
    fn colliding_lexeme_is_skipped() {
        let lexemes = vec![
            lexeme("great", 900, &["outstanding"]),
            // its substitute collides with an earlier group
            lexeme("excellent", 800, &["outstanding"]),
            // its lemma is an earlier substitute
            lexeme("outstanding", 700, &["superb"]),
            lexeme("good", 600, &["fine"]),
        ];
        let lex = build_synonym_lexicon(&lexemes, 1, 2).unwrap();
        let order: Vec<&str> = lex.groups().iter().map(|g| g.candidate.as_str()).collect();
        assert_eq!(order, ["great", "good"]);
    }

    /// Brute-force disjointness: every emitted word, compared against every other.
    fn pairwise_disjoint(lex: &Lexicon) -> bool {
        let all: Vec<&str> = lex.groups().iter().flat_map(|g| g.words()).collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                if all[i] == all[j] {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn random_lexemes_build_disjoint_lexicon() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vocab: Vec<String> = (0..60).map(|i| format!("w{}", char::from(b'a' + (i % 26) as u8)).repeat(1 + i / 26)).collect();
        let mut lexemes = Vec::new();
        for i in 0..50 {
            let lemma = format!("lemma{}", char::from(b'a' + (i % 26) as u8)).repeat(1 + i / 26);
            let mut pool = vocab.clone();
            pool.shuffle(&mut rng);
            let syns = pool[..rng.random_range(0..5)].to_vec();
            lexemes.push(FrequencyLexeme::new(lemma, "ADJ", rng.random_range(0..1000), syns).unwrap());
        }
        let lex = build_synonym_lexicon(&lexemes, 1, 20).unwrap();
        assert_eq!(lex.len(), 20);
        assert!(pairwise_disjoint(&lex));
        // frequency priority
        let freq: HashMap<&str, u64> = lexemes.iter().map(|l| (l.lemma.as_str(), l.frequency)).collect();
        for pair in lex.groups().windows(2) {
            assert!(freq[pair[0].candidate.as_str()] >= freq[pair[1].candidate.as_str()]);
        }
    }

    #[test]
    fn spelling_lexicon() {
        let lex = build_spelling_lexicon(&[("color", "colour")]).unwrap();
        assert_eq!(lex.kind(), SubstitutionKind::Spelling);
        assert_eq!(lex.m(), 1);
        assert_eq!(lex.groups()[0].substitutes, words(&["colour"]));
        assert!(build_spelling_lexicon(&[("color", "colour"), ("center", "colour")]).is_err());
    }

    #[test]
    fn bundled_spelling_pairs_validate() {
        let pairs = bundled_spelling_pairs();
        assert_eq!(pairs.len(), 120);
        let lex = build_spelling_lexicon(&pairs).unwrap();
        assert_eq!(lex.len(), 120);
        assert!(lex.violations().is_empty());
    }

    #[test]
    fn validate_reports_each_problem_once() {
        let ok = vec![SubstitutionGroup::new("great", words(&["outstanding"]), SubstitutionKind::Synonym)];
        assert!(validate_lexicon(SubstitutionKind::Synonym, 1, &ok).is_empty());

        let self_sub = vec![SubstitutionGroup::new("great", words(&["great"]), SubstitutionKind::Synonym)];
        assert_eq!(validate_lexicon(SubstitutionKind::Synonym, 1, &self_sub).len(), 1);

        let shared = vec![
            SubstitutionGroup::new("great", words(&["outstanding"]), SubstitutionKind::Synonym),
            SubstitutionGroup::new("fine", words(&["outstanding"]), SubstitutionKind::Synonym),
        ];
        let v = validate_lexicon(SubstitutionKind::Synonym, 1, &shared);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].groups, words(&["great", "fine"]));
        assert!(v[0].to_string().contains("outstanding"));
    }

    #[test]
    fn validate_catches_uneven_m_and_bad_words() {
        let groups = vec![
            SubstitutionGroup::new("great", words(&["outstanding", "superb"]), SubstitutionKind::Synonym),
            SubstitutionGroup::new("New", words(&["novel"]), SubstitutionKind::Synonym),
        ];
        let v = validate_lexicon(SubstitutionKind::Synonym, 2, &groups);
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn tsv_errors_carry_line_numbers() {
        let err = Lexicon::from_tsv_str("great\toutstanding\tkeen\nnew\tnovel\n", Path::new("L.tsv")).unwrap_err();
        assert!(err.to_string().contains("inconsistent M at line 2"), "{err}");

        let err = Lexicon::from_tsv_str("", Path::new("L.tsv")).unwrap_err();
        assert!(err.to_string().contains("empty lexicon"));
        let err = Lexicon::from_tsv_str("#kind=synonym M=1\n", Path::new("L.tsv")).unwrap_err();
        assert!(err.to_string().contains("empty lexicon"));

        let err = Lexicon::from_tsv_str("#kind=synonym M=1\ngreat\tfine\ngood\tfine\n", Path::new("L.tsv"))
            .unwrap_err();
        assert!(err.to_string().contains("duplicate word 'fine'"), "{err}");
        assert!(err.to_string().contains("line 3"), "{err}");

        let err = Lexicon::from_tsv_str("#kind=synonym M=1\ngreat\n", Path::new("L.tsv")).unwrap_err();
        assert!(err.to_string().contains("malformed line at line 2"), "{err}");

        let err = Lexicon::from_tsv_str("#kind=spelling M=2\na\tb\tc\n", Path::new("L.tsv")).unwrap_err();
        assert!(err.to_string().contains("M = 1"), "{err}");
    }

    #[test]
    fn headerless_file_defaults_to_synonym() {
        let lex = Lexicon::from_tsv_str("great\toutstanding\n", Path::new("x")).unwrap();
        assert_eq!(lex.kind(), SubstitutionKind::Synonym);
        assert_eq!(lex.m(), 1);
    }

    #[test]
    fn lexeme_parsing() {
        let text = "# lemma pos freq syns\ngreat\tADJ\t900\toutstanding,keen,bang-up,smashing\nnew\tADJ\t800\t\nrun\tVERB\t5\tsprint\n";
        let mut lexemes = parse_lexemes(text, Path::new("lex")).unwrap();
        assert_eq!(lexemes.len(), 3);
        assert_eq!(lexemes[0].synonyms.len(), 4);
        assert!(lexemes[1].synonyms.is_empty());
        retain_pos(&mut lexemes, "adj");
        assert_eq!(lexemes.len(), 2);

        let err = parse_lexemes("Great\tADJ\t1\tfine\n", Path::new("lex")).unwrap_err();
        assert!(err.to_string().contains("line 1"));
        let err = parse_lexemes("great\tADJ\tmany\tfine\n", Path::new("lex")).unwrap_err();
        assert!(err.to_string().contains("bad frequency"));
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = build_spelling_lexicon(&[("color", "colour")]).unwrap();
        let b = build_spelling_lexicon(&[("color", "colour")]).unwrap();
        let c = build_spelling_lexicon(&[("center", "centre")]).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    fn arb_lexicon() -> impl Strategy<Value = Lexicon> {
        (1usize..4, prop::collection::hash_set("[a-z]{2,8}", 2..80)).prop_filter_map(
            "need at least one group",
            |(m, vocab)| {
                let vocab: Vec<String> = vocab.into_iter().collect();
                let groups: Vec<SubstitutionGroup> = vocab
                    .chunks_exact(m + 1)
                    .map(|c| SubstitutionGroup::new(c[0].clone(), c[1..].to_vec(), SubstitutionKind::Synonym))
                    .collect();
                Lexicon::new(SubstitutionKind::Synonym, m, groups).ok()
            },
        )
    }

    proptest! {
        #[test]
        fn save_load_round_trip(lex in arb_lexicon()) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("lex.tsv");
            lex.save(&path).unwrap();
            let back = Lexicon::load(&path).unwrap();
            prop_assert_eq!(&back, &lex);
            prop_assert_eq!(back.fingerprint(), lex.fingerprint());
        }
    }
}
