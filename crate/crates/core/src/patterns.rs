//! CV and beat patterns.
//!
//! A CV pattern renders each phone as `C`, `V` or (long vowel, diphthong)
//! `VV`. A beat pattern marks the same slots with `1` at a vowel onset and
//! `0` elsewhere. Two placements are supported, see [`BeatMode`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phonolex::{Lexicon, PhoneClass, PhonemeSequence};

/// Where the beat of a syllable is written.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeatMode {
    /// On the consonant right before the vowel, or on the vowel itself when
    /// it has no consonant in front of it.
    #[default]
    Onset,
    /// Always on the first slot of the vowel.
    Nucleus,
}

impl BeatMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BeatMode::Onset => "onset",
            BeatMode::Nucleus => "nucleus",
        }
    }
}

impl fmt::Display for BeatMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BeatMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "onset" => Ok(BeatMode::Onset),
            "nucleus" => Ok(BeatMode::Nucleus),
            _ => Err(Error::Invalid(format!(
                "unknown beat mode {s:?} (expected onset or nucleus)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    #[default]
    Beat,
    Cv,
}

impl PatternKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PatternKind::Beat => "beat",
            PatternKind::Cv => "cv",
        }
    }

    fn alphabet(self) -> [char; 2] {
        match self {
            PatternKind::Beat => ['0', '1'],
            PatternKind::Cv => ['C', 'V'],
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beat" => Ok(PatternKind::Beat),
            "cv" => Ok(PatternKind::Cv),
            _ => Err(Error::Invalid(format!(
                "unknown pattern kind {s:?} (expected beat or cv)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct CvPattern(String);

impl CvPattern {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for CvPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BeatPattern {
    slots: String,
    mode: BeatMode,
}

impl BeatPattern {
    pub fn as_str(&self) -> &str {
        &self.slots
    }

    pub fn mode(&self) -> BeatMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn beats(&self) -> usize {
        self.slots.bytes().filter(|&b| b == b'1').count()
    }
}

impl fmt::Display for BeatPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.slots)
    }
}

pub fn cv_of(seq: &PhonemeSequence) -> CvPattern {
    let mut out = String::with_capacity(seq.phones.len() * 2);
    for phone in &seq.phones {
        match phone.class {
            PhoneClass::Consonant => out.push('C'),
            PhoneClass::ShortVowel => out.push('V'),
            PhoneClass::LongVowel | PhoneClass::Diphthong => out.push_str("VV"),
        }
    }
    CvPattern(out)
}

pub fn beat_of(seq: &PhonemeSequence, mode: BeatMode) -> BeatPattern {
    let total: usize = seq.phones.iter().map(|p| p.class.slots()).sum();
    let mut slots = vec![b'0'; total];
    let mut start = 0;
    let mut prev: Option<(PhoneClass, usize)> = None;
    for phone in &seq.phones {
        if phone.class.is_vowel() {
            let beat = match (mode, prev) {
                (BeatMode::Onset, Some((PhoneClass::Consonant, at))) => at,
                _ => start,
            };
            slots[beat] = b'1';
        }
        prev = Some((phone.class, start));
        start += phone.class.slots();
    }
    BeatPattern {
        slots: String::from_utf8(slots).expect("ascii"),
        mode,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordPattern {
    pub word: String,
    pub cv: CvPattern,
    pub beat: BeatPattern,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanPattern {
    pub per_word: Vec<WordPattern>,
    pub kind: PatternKind,
}

impl SpanPattern {
    fn parts(&self) -> impl Iterator<Item = &str> {
        self.per_word.iter().map(move |w| match self.kind {
            PatternKind::Beat => w.beat.as_str(),
            PatternKind::Cv => w.cv.as_str(),
        })
    }

    /// Per-word patterns joined by single spaces.
    pub fn serialized(&self) -> String {
        self.parts().collect::<Vec<_>>().join(" ")
    }

    /// Per-word patterns concatenated.
    pub fn stripped(&self) -> String {
        self.parts().collect()
    }

    pub fn vowel_count(&self) -> usize {
        self.per_word.iter().map(|w| w.beat.beats()).sum()
    }
}

pub fn word_pattern(seq: &PhonemeSequence, mode: BeatMode) -> WordPattern {
    WordPattern {
        word: seq.word.clone(),
        cv: cv_of(seq),
        beat: beat_of(seq, mode),
    }
}

/// Patterns for a run of words using each word's default pronunciation.
pub fn span_pattern<S: AsRef<str>>(
    lexicon: &Lexicon,
    words: &[S],
    kind: PatternKind,
    mode: BeatMode,
) -> Result<SpanPattern> {
    span_pattern_with(lexicon, words, kind, mode, true)
}

pub fn span_pattern_with<S: AsRef<str>>(
    lexicon: &Lexicon,
    words: &[S],
    kind: PatternKind,
    mode: BeatMode,
    allow_fallback: bool,
) -> Result<SpanPattern> {
    let per_word = words
        .iter()
        .map(|w| {
            lexicon
                .phonemize_with(w.as_ref(), allow_fallback)
                .map(|seq| word_pattern(&seq, mode))
        })
        .collect::<Result<_>>()?;
    Ok(SpanPattern { per_word, kind })
}

/// Removes word separators from a serialized pattern.
pub fn strip(pattern: &str) -> String {
    pattern.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Validates a serialized pattern against the alphabet of `kind` and returns
/// its stripped form. Whitespace between symbols is allowed.
pub fn parse_pattern(pattern: &str, kind: PatternKind) -> Result<String> {
    let alphabet = kind.alphabet();
    let mut out = String::with_capacity(pattern.len());
    for c in pattern.chars() {
        if alphabet.contains(&c) {
            out.push(c);
        } else if !c.is_whitespace() {
            return Err(Error::InvalidPattern {
                pattern: pattern.to_string(),
                reason: format!(
                    "symbol {c:?} is not in the {kind} alphabet {{{}, {}}}",
                    alphabet[0], alphabet[1]
                ),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phonolex::{ClassTable, Lexicon, Phone, Source};
    use std::sync::Arc;

    fn fixture() -> Lexicon {
        Lexicon::from_text(
            "IN  IH0 N\nBELIEVE  B IH0 L IY1 V\nI  AY1\nCHAOS  K EY1 AA0 S\n",
            ClassTable::bundled(),
        )
        .unwrap()
    }

    fn seq(lex: &Lexicon, w: &str) -> PhonemeSequence {
        lex.phonemize(w).unwrap()
    }

    #[test]
    fn cv_examples() {
        let lex = fixture();
        assert_eq!(cv_of(&seq(&lex, "believe")).as_str(), "CVCVVC");
        assert_eq!(cv_of(&seq(&lex, "I")).as_str(), "VV");
        let empty = PhonemeSequence {
            word: String::new(),
            phones: vec![],
            source: Source::Lexicon,
        };
        assert_eq!(cv_of(&empty).as_str(), "");
        assert_eq!(beat_of(&empty, BeatMode::Onset).as_str(), "");
    }

    #[test]
    fn beat_examples() {
        let lex = fixture();
        let believe = seq(&lex, "believe");
        assert_eq!(beat_of(&believe, BeatMode::Onset).as_str(), "101000");
        assert_eq!(beat_of(&believe, BeatMode::Nucleus).as_str(), "010100");
        let inn = seq(&lex, "in");
        assert_eq!(beat_of(&inn, BeatMode::Onset).as_str(), "10");
        assert_eq!(beat_of(&inn, BeatMode::Nucleus).as_str(), "10");
    }

    #[test]
    fn hiatus_beats_both_nuclei() {
        // K EY AA S -> C VV VV C
        let lex = fixture();
        let chaos = seq(&lex, "chaos");
        assert_eq!(cv_of(&chaos).as_str(), "CVVVVC");
        assert_eq!(beat_of(&chaos, BeatMode::Onset).as_str(), "100100");
        assert_eq!(beat_of(&chaos, BeatMode::Nucleus).as_str(), "010100");
    }

    #[test]
    fn vowelless_word_is_all_rest() {
        let s = PhonemeSequence {
            word: "hmm".into(),
            phones: vec![Phone {
                symbol: Arc::from("HH"),
                class: PhoneClass::Consonant,
                stress: None,
            }],
            source: Source::Fallback,
        };
        assert_eq!(beat_of(&s, BeatMode::Onset).as_str(), "0");
    }

    #[test]
    fn span_examples() {
        let lex = fixture();
        let words = ["I", "believe", "in"];
        let beat = span_pattern(&lex, &words, PatternKind::Beat, BeatMode::Onset).unwrap();
        assert_eq!(beat.serialized(), "10 101000 10");
        assert_eq!(beat.stripped(), "1010100010");
        let cv = span_pattern(&lex, &words, PatternKind::Cv, BeatMode::Onset).unwrap();
        assert_eq!(cv.serialized(), "VV CVCVVC VC");
        let one = span_pattern(&lex, &["in"], PatternKind::Beat, BeatMode::Onset).unwrap();
        assert_eq!(one.serialized(), "10");
    }

    #[test]
    fn span_propagates_phonemize_errors() {
        let lex = fixture();
        assert!(span_pattern(&lex, &["in", "?!"], PatternKind::Beat, BeatMode::Onset).is_err());
        assert!(
            span_pattern_with(&lex, &["zzqx"], PatternKind::Cv, BeatMode::Onset, false).is_err()
        );
    }

    #[test]
    fn mode_and_kind_names() {
        assert_eq!("onset".parse::<BeatMode>().unwrap(), BeatMode::Onset);
        assert_eq!("nucleus".parse::<BeatMode>().unwrap(), BeatMode::Nucleus);
        assert!("Onset".parse::<BeatMode>().is_err());
        assert_eq!("cv".parse::<PatternKind>().unwrap(), PatternKind::Cv);
        assert!("bits".parse::<PatternKind>().is_err());
    }

    #[test]
    fn parse_pattern_checks_alphabet() {
        assert_eq!(parse_pattern("10 100", PatternKind::Beat).unwrap(), "10100");
        assert!(parse_pattern("1020", PatternKind::Beat).is_err());
        assert!(parse_pattern("CV", PatternKind::Beat).is_err());
        assert_eq!(parse_pattern("VV CVC", PatternKind::Cv).unwrap(), "VVCVC");
    }
}
