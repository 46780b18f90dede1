//! Owner-side verification.
//!
//! A suspect corpus is scanned for every word of every group. `n` counts
//! those occurrences and `k` counts the ones equal to the keyed target; the
//! ratio `hit = k/n` screens the suspect against a threshold `tau`, and an
//! exact two-tailed binomial test against `p = 1/(M+1)` quantifies how
//! unlikely the observed `k` is for a model with no preference for the
//! watermark.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::watermark::tokenize::words;
use crate::watermark::{WatermarkKey, Watermarker};

pub const DEFAULT_ALPHA: f64 = 1e-3;

/// Share of `n` above which a single group triggers a correlation warning.
pub const DOMINANT_GROUP_SHARE: f64 = 0.25;

/// Midpoint between the chance-level hit `1/(M+1)` and perfect transfer.
pub fn default_tau(m: usize) -> f64 {
    (1.0 + 1.0 / (m as f64 + 1.0)) / 2.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupTally {
    pub k: u64,
    pub n: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitStatistics {
    pub k: u64,
    pub n: u64,
    /// Keyed by candidate word; groups never observed are absent.
    pub per_group: BTreeMap<String, GroupTally>,
}

impl HitStatistics {
    pub fn hit(&self) -> Option<f64> {
        (self.n > 0).then(|| self.k as f64 / self.n as f64)
    }
}

fn tally_line(wm: &Watermarker, line: &str, tallies: &mut [GroupTally]) {
    let lexicon = wm.lexicon();
    for span in words(line) {
        let lower = span.text.to_lowercase();
        if let Some((gi, role)) = lexicon.lookup(&lower) {
            let t = &mut tallies[gi];
            t.n += 1;
            if role.index() == wm.target_index(gi) {
                t.k += 1;
            }
        }
    }
}

/// Counts group-word occurrences and target hits over a corpus.
pub fn count_hits_with<S: AsRef<str> + Sync>(wm: &Watermarker, corpus: &[S]) -> HitStatistics {
    let groups = wm.lexicon().len();
    let tallies = corpus
        .par_iter()
        .fold(
            || vec![GroupTally::default(); groups],
            |mut acc, line| {
                tally_line(wm, line.as_ref(), &mut acc);
                acc
            },
        )
        .reduce(
            || vec![GroupTally::default(); groups],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x.k += y.k;
                    x.n += y.n;
                }
                a
            },
        );

    let mut stats = HitStatistics::default();
    for (group, tally) in wm.lexicon().groups().iter().zip(tallies) {
        if tally.n > 0 {
            stats.k += tally.k;
            stats.n += tally.n;
            stats.per_group.insert(group.candidate.clone(), tally);
        }
    }
    stats
}

pub fn count_hits<S: AsRef<str> + Sync>(
    corpus: &[S],
    lexicon: &Lexicon,
    key: &WatermarkKey,
) -> HitStatistics {
    count_hits_with(&Watermarker::new(lexicon.clone(), key.clone()), corpus)
}

/// Tail probabilities of `Binomial(n, p)` at `k` and the two-tailed p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialTest {
    /// `Pr(X >= k)`
    pub beta1: f64,
    /// `Pr(X <= k)`
    pub beta2: f64,
    /// `min(1, 2 * min(beta1, beta2))`
    pub p_value: f64,
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

pub fn binomial_p_value(k: u64, n: u64, p: f64) -> Result<BinomialTest> {
    if n == 0 {
        return Err(Error::NoEvidence("n = 0 occurrences".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds n = {n}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} is not in (0, 1)")));
    }

    let nf = n as f64;
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let ln_n_fact = ln_gamma(nf + 1.0);
    let ln_pmf = move |i: u64| {
        let i = i as f64;
        ln_n_fact - ln_gamma(i + 1.0) - ln_gamma(nf - i + 1.0) + i * ln_p + (nf - i) * ln_q
    };

    let beta1 = log_sum_exp((k..=n).map(ln_pmf)).exp().min(1.0);
    let beta2 = log_sum_exp((0..=k).map(ln_pmf)).exp().min(1.0);
    let p_value = (2.0 * beta1.min(beta2)).min(1.0);
    Ok(BinomialTest {
        beta1,
        beta2,
        p_value,
    })
}

/// Screening stage: true when the hit ratio exceeds `tau`.
pub fn detect(stats: &HitStatistics, tau: f64) -> Result<bool> {
    match stats.hit() {
        Some(hit) => Ok(hit > tau),
        None => Err(Error::NoEvidence("insufficient evidence: no group words observed".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    NoEvidence,
    Suspected,
    Confirmed,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::NoEvidence => "no_evidence",
            Decision::Suspected => "suspected",
            Decision::Confirmed => "confirmed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub hit: f64,
    pub p_value: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub p_null: f64,
    pub n: u64,
    pub k: u64,
    pub tau: f64,
    pub alpha: f64,
    pub decision: Decision,
    pub warnings: Vec<String>,
}

/// Serialized form of a report: tool version and lexicon fingerprint
/// followed by the report fields, always in the same order.
#[derive(Debug, Serialize)]
pub struct ReportEnvelope<'a> {
    pub tool_version: &'a str,
    pub lexicon_fingerprint: &'a str,
    #[serde(flatten)]
    pub report: &'a VerificationReport,
}

impl<'a> ReportEnvelope<'a> {
    pub fn new(report: &'a VerificationReport, lexicon_fingerprint: &'a str) -> Self {
        ReportEnvelope {
            tool_version: crate::VERSION,
            lexicon_fingerprint,
            report,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyParams {
    /// `None` selects [`default_tau`] for the lexicon's `M`.
    pub tau: Option<f64>,
    pub alpha: f64,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            tau: None,
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl VerifyParams {
    pub(crate) fn check(&self) -> Result<()> {
        if let Some(tau) = self.tau {
            if !(0.0..=1.0).contains(&tau) {
                return Err(Error::InvalidArgument(format!("tau = {tau} is not in [0, 1]")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha = {} is not in (0, 1)", self.alpha)));
        }
        Ok(())
    }
}

/// The two-stage decision over raw counts, shared with the bit baseline.
pub(crate) fn decide(k: u64, n: u64, p_null: f64, tau: f64, alpha: f64, mut warnings: Vec<String>) -> Result<VerificationReport> {
    if n == 0 {
        warnings.push("no group words found in the corpus; hit is undefined".into());
        return Ok(VerificationReport {
            hit: 0.0,
            p_value: 1.0,
            beta1: 1.0,
            beta2: 1.0,
            p_null,
            n,
            k,
            tau,
            alpha,
            decision: Decision::NoEvidence,
            warnings,
        });
    }
    let test = binomial_p_value(k, n, p_null)?;
    let hit = k as f64 / n as f64;
    let decision = if hit <= tau {
        Decision::NoEvidence
    } else if test.p_value < alpha {
        Decision::Confirmed
    } else {
        Decision::Suspected
    };
    Ok(VerificationReport {
        hit,
        p_value: test.p_value,
        beta1: test.beta1,
        beta2: test.beta2,
        p_null,
        n,
        k,
        tau,
        alpha,
        decision,
        warnings,
    })
}

pub fn report_from_stats(stats: &HitStatistics, m: usize, params: &VerifyParams) -> Result<VerificationReport> {
    params.check()?;
    let tau = params.tau.unwrap_or_else(|| default_tau(m));
    let p_null = 1.0 / (m as f64 + 1.0);
    let mut warnings = Vec::new();
    for (group, tally) in &stats.per_group {
        if stats.n > 0 && tally.n as f64 > DOMINANT_GROUP_SHARE * stats.n as f64 {
            warnings.push(format!(
                "group '{group}' contributes {} of {} occurrences; occurrences are correlated and the independence assumption of the test is weak",
                tally.n, stats.n
            ));
        }
    }
    decide(stats.k, stats.n, p_null, tau, params.alpha, warnings)
}

/// Counts hits and runs the two-stage procedure, returning the raw counts too.
pub fn verify_with_stats<S: AsRef<str> + Sync>(
    wm: &Watermarker,
    corpus: &[S],
    params: &VerifyParams,
) -> Result<(VerificationReport, HitStatistics)> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("corpus is empty".into()));
    }
    let stats = count_hits_with(wm, corpus);
    let report = report_from_stats(&stats, wm.lexicon().m(), params)?;
    Ok((report, stats))
}

pub fn verify<S: AsRef<str> + Sync>(
    corpus: &[S],
    lexicon: &Lexicon,
    key: &WatermarkKey,
    params: &VerifyParams,
) -> Result<VerificationReport> {
    let wm = Watermarker::new(lexicon.clone(), key.clone());
    verify_with_stats(&wm, corpus, params).map(|(report, _)| report)
}

/// Human-readable summary naming each observed group, its target and counts.
pub fn render_text(report: &VerificationReport, stats: &HitStatistics, wm: &Watermarker) -> String {
    let lexicon = wm.lexicon();
    let mut out = String::new();
    let _ = writeln!(out, "WATERMARK VERIFICATION REPORT");
    let _ = writeln!(out, "lexicon: {} rules, M = {}, kind = {}", lexicon.len(), lexicon.m(), lexicon.kind());
    let _ = writeln!(out, "lexicon fingerprint: {}", lexicon.fingerprint());
    let _ = writeln!(out);
    let _ = writeln!(out, "Evidence by rule ({} of {} rules observed):", stats.per_group.len(), lexicon.len());
    let width = stats.per_group.keys().map(|g| g.chars().count()).max().unwrap_or(5).max(5);
    let _ = writeln!(out, "  {:width$}  {:16}  {:>6}  {:>6}", "rule", "watermark word", "hits", "total");
    for (gi, group) in lexicon.groups().iter().enumerate() {
        if let Some(t) = stats.per_group.get(&group.candidate) {
            let _ = writeln!(out, "  {:width$}  {:16}  {:>6}  {:>6}", group.candidate, wm.target_word(gi), t.k, t.n);
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Watermark words observed (k): {}", report.k);
    let _ = writeln!(out, "Rule words observed (n):      {}", report.n);
    let _ = writeln!(out, "hit = k/n:                    {:.4}", report.hit);
    let _ = writeln!(out, "Chance level 1/(M+1):         {:.4}", report.p_null);
    let _ = writeln!(out, "Screening threshold tau:      {:.4}", report.tau);
    let _ = writeln!(out, "Two-tailed binomial p-value:  {:.3e}", report.p_value);
    let _ = writeln!(out, "Significance level alpha:     {:.1e}", report.alpha);
    let _ = writeln!(out);
    let verdict = match report.decision {
        Decision::NoEvidence => "NO EVIDENCE: the suspect's word choices are consistent with chance.",
        Decision::Suspected => "SUSPECTED: the hit ratio exceeds the threshold but the p-value is not below alpha.",
        Decision::Confirmed => "CONFIRMED: the suspect prefers the watermark words far beyond chance.",
    };
    let _ = writeln!(out, "Decision: {verdict}");
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{SubstitutionGroup, SubstitutionKind};
    use crate::watermark::select_target;
    use num_bigint::{BigInt, BigUint};
    use num_rational::BigRational;
    use num_traits::{One, ToPrimitive, Zero};
    use proptest::prelude::*;

    /// Exact `(beta1, beta2)` for `p = a/b` by enumerating the pmf over the
    /// common denominator `b^n`: term_i = C(n,i) a^i (b-a)^(n-i).
    fn exact_tails(k: u64, n: u64, a: u64, b: u64) -> (f64, f64) {
        let a_big = BigUint::from(a);
        let rest = BigUint::from(b - a);
        let mut choose = BigUint::one();
        let mut upper = BigUint::zero();
        let mut lower = BigUint::zero();
        for i in 0..=n {
            if i > 0 {
                choose = choose * BigUint::from(n - i + 1) / BigUint::from(i);
            }
            let term = &choose * a_big.pow(i as u32) * rest.pow((n - i) as u32);
            if i >= k {
                upper += &term;
            }
            if i <= k {
                lower += &term;
            }
        }
        let denom = BigInt::from(BigUint::from(b).pow(n as u32));
        let ratio = |num: BigUint| BigRational::new(BigInt::from(num), denom.clone()).to_f64().unwrap();
        (ratio(upper), ratio(lower))
    }

    #[test]
    fn all_hits_closed_form() {
        let t = binomial_p_value(10, 10, 0.5).unwrap();
        assert!((t.beta1 - 1.0 / 1024.0).abs() < 1e-15);
        assert!((t.beta2 - 1.0).abs() < 1e-15);
        assert!((t.p_value - 2.0 / 1024.0).abs() < 1e-12);
    }

    #[test]
    fn clamped_at_one() {
        let t = binomial_p_value(1, 2, 0.5).unwrap();
        assert!((t.beta1 - 0.75).abs() < 1e-12);
        assert!((t.beta2 - 0.75).abs() < 1e-12);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn pinned_rational_value() {
        // exact value 1118434/22876792454961, enumerated offline
        let t = binomial_p_value(25, 30, 1.0 / 3.0).unwrap();
        let exact = 1118434.0 / 22876792454961.0;
        assert!((t.p_value - exact).abs() < 1e-18, "{}", t.p_value);
        assert!((t.beta1 - 2.4444729351851495e-08).abs() < 1e-18);
        assert!((t.beta2 - 0.9999999977038302).abs() < 1e-12);
        let (b1, b2) = exact_tails(25, 30, 1, 3);
        assert!((t.beta1 - b1).abs() < 1e-18 && (t.beta2 - b2).abs() < 1e-12);
    }

    #[test]
    fn large_n_against_rational_oracle() {
        for &(k, n) in &[(400u64, 1000u64), (333, 1000), (250, 1000), (0, 700), (700, 700)] {
            let t = binomial_p_value(k, n, 1.0 / 3.0).unwrap();
            let (b1, b2) = exact_tails(k, n, 1, 3);
            assert!((t.beta1 - b1).abs() < 1e-10, "k={k} n={n}");
            assert!((t.beta2 - b2).abs() < 1e-10, "k={k} n={n}");
        }
    }

    #[test]
    fn hundred_hits_at_one_third() {
        let t = binomial_p_value(100, 100, 1.0 / 3.0).unwrap();
        let expected = 2.0 * (1.0f64 / 3.0).powi(100);
        assert!(((t.p_value - expected) / expected).abs() < 1e-9);
    }

    #[test]
    fn argument_errors() {
        assert!(matches!(binomial_p_value(0, 0, 0.5), Err(Error::NoEvidence(_))));
        assert!(binomial_p_value(3, 2, 0.5).is_err());
        assert!(binomial_p_value(1, 2, 0.0).is_err());
        assert!(binomial_p_value(1, 2, 1.0).is_err());
        assert!(binomial_p_value(1, 2, f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_at_one_half(n in 1u64..300, frac in 0.0f64..=1.0) {
            let k = ((n as f64) * frac).floor() as u64;
            let a = binomial_p_value(k, n, 0.5).unwrap().p_value;
            let b = binomial_p_value(n - k, n, 0.5).unwrap().p_value;
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn tails_are_monotone(n in 1u64..200, p in 0.05f64..0.95) {
            let mut prev = binomial_p_value(0, n, p).unwrap();
            for k in 1..=n {
                let cur = binomial_p_value(k, n, p).unwrap();
                prop_assert!(cur.beta1 <= prev.beta1 + 1e-12);
                prop_assert!(cur.beta2 + 1e-12 >= prev.beta2);
                prop_assert!(cur.p_value >= 0.0 && cur.p_value <= 1.0);
                prev = cur;
            }
        }
    }

    fn wm_with(groups: &[(&str, &[&str])], key: &str) -> Watermarker {
        let groups: Vec<SubstitutionGroup> = groups
            .iter()
            .map(|(c, s)| SubstitutionGroup::new(*c, s.iter().map(|x| x.to_string()).collect(), SubstitutionKind::Synonym))
            .collect();
        let m = groups[0].m();
        let lex = Lexicon::new(SubstitutionKind::Synonym, m, groups).unwrap();
        Watermarker::new(lex, WatermarkKey::new(key.as_bytes().to_vec()).unwrap())
    }

    fn key_targeting(group: &SubstitutionGroup, index: usize) -> String {
        (0..)
            .map(|i| format!("detector-key-{i:05}"))
            .find(|k| select_target(group, &WatermarkKey::new(k.as_bytes().to_vec()).unwrap()).index == index)
            .unwrap()
    }

    #[test]
    fn counts_example_sentence() {
        let g = SubstitutionGroup::new("great", vec!["outstanding".into()], SubstitutionKind::Synonym);
        let key = key_targeting(&g, 1);
        let wm = wm_with(&[("great", &["outstanding"])], &key);
        let corpus = ["That is the real European news : the outstanding post-war plan to unite Europe has stalled ."];
        let stats = count_hits_with(&wm, &corpus);
        assert_eq!((stats.k, stats.n), (1, 1));
        assert_eq!(stats.hit(), Some(1.0));
        assert!(detect(&stats, 0.75).unwrap());
    }

    #[test]
    fn no_group_words() {
        let wm = wm_with(&[("great", &["outstanding"])], "some-key-0123456789");
        let stats = count_hits_with(&wm, &["nothing to see here"]);
        assert_eq!((stats.k, stats.n), (0, 0));
        assert_eq!(stats.hit(), None);
        assert!(matches!(detect(&stats, 0.5), Err(Error::NoEvidence(_))));
        let report = report_from_stats(&stats, 1, &VerifyParams::default()).unwrap();
        assert_eq!(report.decision, Decision::NoEvidence);
        assert!(!report.warnings.is_empty());
    }

    #[test]
    fn seven_of_ten() {
        let g = SubstitutionGroup::new("great", vec!["outstanding".into()], SubstitutionKind::Synonym);
        let key = key_targeting(&g, 1);
        let wm = wm_with(&[("great", &["outstanding"])], &key);
        let corpus = ["outstanding Outstanding OUTSTANDING outstanding", "great outstanding, outstanding", "GREAT great outstanding"];
        let stats = count_hits_with(&wm, &corpus);
        assert_eq!((stats.k, stats.n), (7, 10));
        assert_eq!(stats.per_group["great"], GroupTally { k: 7, n: 10 });
    }

    #[test]
    fn detect_threshold() {
        let stats = HitStatistics { k: 92, n: 100, per_group: BTreeMap::new() };
        assert!(detect(&stats, 0.67).unwrap());
        let stats = HitStatistics { k: 1, n: 3, per_group: BTreeMap::new() };
        assert!(!detect(&stats, 1.0 / 3.0).unwrap());
    }

    #[test]
    fn all_hits_confirmed() {
        let mut per_group = BTreeMap::new();
        per_group.insert("g".into(), GroupTally { k: 100, n: 100 });
        let stats = HitStatistics { k: 100, n: 100, per_group };
        let report = report_from_stats(&stats, 2, &VerifyParams::default()).unwrap();
        assert_eq!(report.hit, 1.0);
        let expected = 2.0 * (1.0f64 / 3.0).powi(100);
        assert!(((report.p_value - expected) / expected).abs() < 1e-9);
        assert_eq!(report.decision, Decision::Confirmed);
        assert!((report.tau - 2.0 / 3.0).abs() < 1e-15);
        // one group holds every occurrence
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn lone_non_target_substitute() {
        let g = SubstitutionGroup::new("great", vec!["outstanding".into(), "superb".into()], SubstitutionKind::Synonym);
        let key = key_targeting(&g, 1);
        let wm = wm_with(&[("great", &["outstanding", "superb"])], &key);
        let (report, stats) = verify_with_stats(&wm, &["superb"], &VerifyParams::default()).unwrap();
        assert_eq!((stats.k, stats.n), (0, 1));
        assert_eq!(report.hit, 0.0);
        assert_eq!(report.decision, Decision::NoEvidence);
    }

    #[test]
    fn suspected_when_p_not_small_enough() {
        let report = decide(3, 3, 0.5, 0.6, 1e-3, vec![]).unwrap();
        assert_eq!(report.decision, Decision::Suspected);
    }

    #[test]
    fn params_validated() {
        let wm = wm_with(&[("great", &["outstanding"])], "some-key-0123456789");
        let bad = VerifyParams { tau: Some(1.5), alpha: 1e-3 };
        assert!(verify_with_stats(&wm, &["great"], &bad).is_err());
        let bad = VerifyParams { tau: None, alpha: 0.0 };
        assert!(verify_with_stats(&wm, &["great"], &bad).is_err());
        let empty: [&str; 0] = [];
        assert!(verify_with_stats(&wm, &empty, &VerifyParams::default()).is_err());
    }

    #[test]
    fn text_report_names_groups_and_targets() {
        let g = SubstitutionGroup::new("great", vec!["outstanding".into()], SubstitutionKind::Synonym);
        let key = key_targeting(&g, 1);
        let wm = wm_with(&[("great", &["outstanding"]), ("big", &["large"])], &key);
        let (report, stats) = verify_with_stats(&wm, &["outstanding outstanding great"], &VerifyParams::default()).unwrap();
        let text = render_text(&report, &stats, &wm);
        assert!(text.contains("great"));
        assert!(text.contains("outstanding"));
        assert!(text.contains("1 of 2 rules"));
        assert!(!text.contains(&key));
    }
}
