//! Parametric model-extraction simulator.
//!
//! Instead of training a surrogate on watermarked API responses, each
//! occurrence of a group word is drawn from an emission mixture: with
//! probability `q = phi * P` the surrogate reproduces the keyed target
//! (memorized from the `P` fraction of watermarked training data, with
//! fidelity `phi`), otherwise it falls back to natural word choice. An
//! innocent model is the `q = 0` case. The expected hit is
//! `q + (1 - q) / (M + 1)`.
//!
//! Every run is a pure function of `(config, seed)`. Sweep points draw from
//! independent ChaCha streams indexed by point position, so parallel and
//! serial sweeps agree bit for bit.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{verify_with_stats, Decision, VerifyParams};
use crate::error::{Error, Result};
use crate::lexicon::{build_synonym_lexicon, FrequencyLexeme, Lexicon};
use crate::watermark::{WatermarkKey, Watermarker};

pub const MODEL_ASSUMPTION: &str =
    "surrogate emits the keyed target with probability q = phi * P, otherwise natural word choice";

/// Natural word choice: the candidate with probability `gamma`, otherwise a
/// uniformly chosen substitute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaturalEmissionModel {
    pub gamma: f64,
}

impl Default for NaturalEmissionModel {
    fn default() -> Self {
        NaturalEmissionModel { gamma: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    /// Fraction of the surrogate's training data that was watermarked.
    #[serde(rename = "P")]
    pub watermarked_fraction: f64,
    /// How faithfully the surrogate reproduces watermarked choices.
    pub phi: f64,
    pub occurrences_per_group: usize,
    pub n_groups: usize,
    pub natural: NaturalEmissionModel,
    /// Group words packed into each emitted line.
    pub words_per_line: usize,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            watermarked_fraction: 1.0,
            phi: 1.0,
            occurrences_per_group: 20,
            n_groups: 50,
            natural: NaturalEmissionModel::default(),
            words_per_line: 8,
            seed: 0,
        }
    }
}

impl SurrogateConfig {
    fn check(&self, lexicon: &Lexicon) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} = {v} is not in [0, 1]")))
            }
        };
        unit("P", self.watermarked_fraction)?;
        unit("phi", self.phi)?;
        unit("gamma", self.natural.gamma)?;
        if self.occurrences_per_group == 0 || self.n_groups == 0 || self.words_per_line == 0 {
            return Err(Error::InvalidArgument(
                "n_groups, occurrences_per_group and words_per_line must be positive".into(),
            ));
        }
        if self.n_groups > lexicon.len() {
            return Err(Error::InvalidArgument(format!(
                "n_groups = {} exceeds the lexicon's {} groups",
                self.n_groups,
                lexicon.len()
            )));
        }
        Ok(())
    }

    /// Probability that an occurrence reproduces the keyed target.
    pub fn transfer_probability(&self) -> f64 {
        self.phi * self.watermarked_fraction
    }

    /// `q + (1 - q) / (M + 1)`
    pub fn expected_hit(&self, m: usize) -> f64 {
        let q = self.transfer_probability();
        q + (1.0 - q) / (m as f64 + 1.0)
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Emits a corpus. `targets` is `None` for an innocent model.
fn emit(
    config: &SurrogateConfig,
    lexicon: &Lexicon,
    targets: Option<&Watermarker>,
    rng: &mut ChaCha8Rng,
) -> Vec<String> {
    let q = targets.map_or(0.0, |_| config.transfer_probability());
    let gamma = config.natural.gamma;
    let groups = index::sample(rng, lexicon.len(), config.n_groups);

    let mut occurrences: Vec<&str> = Vec::with_capacity(config.n_groups * config.occurrences_per_group);
    for gi in groups.iter() {
        let group = &lexicon.groups()[gi];
        for _ in 0..config.occurrences_per_group {
            let word = match targets {
                Some(wm) if rng.random_bool(q) => wm.target_word(gi),
                _ if rng.random_bool(gamma) => group.candidate.as_str(),
                _ => group.substitutes[rng.random_range(0..group.m())].as_str(),
            };
            occurrences.push(word);
        }
    }
    occurrences.shuffle(rng);

    occurrences
        .chunks(config.words_per_line)
        .enumerate()
        .map(|(i, words)| format!("{:06}: {} .", i + 1, words.join(" , ")))
        .collect()
}

/// Corpus from a model with no knowledge of the watermark.
pub fn simulate_innocent_corpus(config: &SurrogateConfig, lexicon: &Lexicon) -> Result<Vec<String>> {
    config.check(lexicon)?;
    Ok(emit(config, lexicon, None, &mut rng_for(config.seed, 0)))
}

/// Corpus from a surrogate trained on a `P`-watermarked mixture.
pub fn simulate_surrogate_corpus(
    config: &SurrogateConfig,
    lexicon: &Lexicon,
    key: &WatermarkKey,
) -> Result<Vec<String>> {
    config.check(lexicon)?;
    let wm = Watermarker::new(lexicon.clone(), key.clone());
    Ok(emit(config, lexicon, Some(&wm), &mut rng_for(config.seed, 0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub hit: f64,
    pub k: u64,
    pub n: u64,
    pub p_value: f64,
    pub decision: Decision,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Name of the swept parameter (`P` or `M`).
    pub parameter: String,
    pub config: SurrogateConfig,
    pub seed: u64,
    pub assumption: String,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,hit,k,n,p_value,decision,seed\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:e},{},{}\n",
                r.param,
                r.hit,
                r.k,
                r.n,
                r.p_value,
                r.decision.as_str(),
                r.seed
            ));
        }
        out
    }

    /// JSON echo of everything needed to reproduce the sweep.
    pub fn config_json(&self) -> String {
        serde_json::json!({
            "parameter": self.parameter,
            "values": self.rows.iter().map(|r| r.param).collect::<Vec<_>>(),
            "config": self.config,
            "seed": self.seed,
            "assumption": self.assumption,
        })
        .to_string()
    }
}

fn sweep_row(
    param: f64,
    config: &SurrogateConfig,
    wm: &Watermarker,
    stream: u64,
    params: &VerifyParams,
) -> Result<SweepRow> {
    let corpus = emit(config, wm.lexicon(), Some(wm), &mut rng_for(config.seed, stream));
    let (report, _) = verify_with_stats(wm, &corpus, params)?;
    Ok(SweepRow {
        param,
        hit: report.hit,
        k: report.k,
        n: report.n,
        p_value: report.p_value,
        decision: report.decision,
        seed: config.seed,
    })
}

/// One surrogate simulation and verification per `P` value, ordered by `P`.
pub fn mixture_sweep(
    base: &SurrogateConfig,
    p_values: &[f64],
    lexicon: &Lexicon,
    key: &WatermarkKey,
    params: &VerifyParams,
) -> Result<SweepResult> {
    base.check(lexicon)?;
    let mut values = p_values.to_vec();
    if let Some(bad) = values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("P = {bad} is not in [0, 1]")));
    }
    values.sort_by(f64::total_cmp);

    let wm = Watermarker::new(lexicon.clone(), key.clone());
    let rows = values
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let config = SurrogateConfig {
                watermarked_fraction: p,
                ..base.clone()
            };
            sweep_row(p, &config, &wm, i as u64, params)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepResult {
        parameter: "P".into(),
        config: base.clone(),
        seed: base.seed,
        assumption: MODEL_ASSUMPTION.into(),
        rows,
    })
}

pub const MAX_SWEEP_M: usize = 5;

/// Rebuilds a lexicon for each `M` and simulates perfect transfer.
///
/// `P` and `phi` are forced to 1; the base config supplies sizes and seed.
pub fn m_sweep(
    base: &SurrogateConfig,
    m_values: &[usize],
    lexemes: &[FrequencyLexeme],
    key: &WatermarkKey,
    params: &VerifyParams,
) -> Result<SweepResult> {
    let mut values = m_values.to_vec();
    if let Some(bad) = values.iter().find(|m| !(1..=MAX_SWEEP_M).contains(*m)) {
        return Err(Error::InvalidArgument(format!("M = {bad} is outside 1..={MAX_SWEEP_M}")));
    }
    values.sort_unstable();
    let config = SurrogateConfig {
        watermarked_fraction: 1.0,
        phi: 1.0,
        ..base.clone()
    };

    let lexicons = values
        .iter()
        .map(|&m| build_synonym_lexicon(lexemes, m, config.n_groups))
        .collect::<Result<Vec<_>>>()?;
    for lexicon in &lexicons {
        config.check(lexicon)?;
    }
    let rows = values
        .par_iter()
        .zip(lexicons)
        .enumerate()
        .map(|(i, (&m, lexicon))| {
            let wm = Watermarker::new(lexicon, key.clone());
            sweep_row(m as f64, &config, &wm, i as u64, params)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepResult {
        parameter: "M".into(),
        config,
        seed: base.seed,
        assumption: MODEL_ASSUMPTION.into(),
        rows,
    })
}
