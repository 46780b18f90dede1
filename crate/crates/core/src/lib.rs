//! Lexical watermarking for text-generation APIs.
//!
//! The serving side ([`watermark`]) swaps frequent words for keyed choices
//! among their synonyms or spelling variants. The owner side ([`detector`])
//! counts how often a suspect corpus uses the keyed choices and tests that
//! rate against the `1/(M+1)` chance level with an exact binomial test.

pub mod bitmark;
pub mod detector;
pub mod error;
pub mod lexicon;
pub mod service;
pub mod simulate;
pub mod watermark;

pub use error::{Error, Result};
pub use lexicon::{Lexicon, SubstitutionGroup, SubstitutionKind};
pub use watermark::{WatermarkKey, Watermarker};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
