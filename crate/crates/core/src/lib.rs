//! Beat patterns for English text.
//!
//! Words are looked up in a pronouncing lexicon ([`phonolex`]), rendered as
//! consonant/vowel slots and beat patterns ([`patterns`]), and used to build
//! beat-conditioned infilling datasets from verse corpora ([`corpus`],
//! [`masker`]). [`filler`] solves the infilling task exactly from the
//! lexicon and [`metrics`] scores any generator's output against the
//! requested pattern.

pub mod corpus;
pub mod error;
pub mod filler;
pub mod masker;
pub mod metrics;
pub mod patterns;
pub mod phonolex;

pub use error::{Error, ErrorClass, Result};
pub use patterns::{
    beat_of, cv_of, span_pattern, BeatMode, BeatPattern, CvPattern, PatternKind, SpanPattern,
};
pub use phonolex::{
    fallback_phonemize, normalize, Lexicon, Phone, PhoneClass, PhonemeSequence, Source,
};
