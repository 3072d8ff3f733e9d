//! Beat-conditioned masked-infilling examples.
//!
//! One contiguous word span per verse is replaced by
//! `E0 <pattern> E1`, and the target is `E2 <masked words>`. Span lengths
//! follow a geometric law truncated at a quarter of the verse length.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{split_verses, SplitManifest, Verse};
use crate::error::{Error, Result};
use crate::patterns::{span_pattern_with, BeatMode, PatternKind, SpanPattern};
use crate::phonolex::Lexicon;

/// Success probability of the span-length distribution.
pub const SPAN_P: f64 = 0.2;

/// Largest span (in words) allowed for a verse of `word_count` words.
pub fn span_cap(word_count: usize) -> usize {
    (word_count / 4).max(1)
}

/// Draws a span length from Geometric(0.2) on {1, 2, ...}, redrawing values
/// above [`span_cap`].
pub fn sample_span_length<R: Rng + ?Sized>(word_count: usize, rng: &mut R) -> usize {
    let cap = span_cap(word_count);
    if cap == 1 {
        return 1;
    }
    let geom = Geometric::new(SPAN_P).expect("valid probability");
    loop {
        // Geometric counts failures before the first success.
        let k = geom.sample(rng).saturating_add(1);
        if k <= cap as u64 {
            return k as usize;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanChoice {
    pub start_word: usize,
    pub length_words: usize,
}

impl SpanChoice {
    pub fn end_word(&self) -> usize {
        self.start_word + self.length_words
    }
}

/// Samples a span length, then a start uniformly among valid positions.
pub fn sample_span<R: Rng + ?Sized>(word_count: usize, rng: &mut R) -> SpanChoice {
    let length_words = sample_span_length(word_count.max(1), rng);
    let start_word = rng.random_range(0..=word_count.saturating_sub(length_words));
    SpanChoice {
        start_word,
        length_words,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Markers {
    pub open: String,
    pub close: String,
    pub target: String,
}

impl Default for Markers {
    fn default() -> Self {
        Self {
            open: "⟦E0⟧".to_string(),
            close: "⟦E1⟧".to_string(),
            target: "⟦E2⟧".to_string(),
        }
    }
}

impl Markers {
    /// Parses `OPEN,CLOSE,TARGET`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        match parts.as_slice() {
            [open, close, target]
                if !open.is_empty() && !close.is_empty() && !target.is_empty() =>
            {
                if open == close || open == target || close == target {
                    return Err(Error::Invalid(format!(
                        "markers must be distinct: {spec:?}"
                    )));
                }
                for m in [open, close, target] {
                    if m.chars().any(char::is_whitespace) {
                        return Err(Error::Invalid(format!("marker {m:?} contains whitespace")));
                    }
                    // otherwise a marker could match inside a serialized pattern
                    if m.chars().all(|c| matches!(c, '0' | '1' | 'C' | 'V')) {
                        return Err(Error::Invalid(format!(
                            "marker {m:?} needs a character other than 0, 1, C and V"
                        )));
                    }
                }
                Ok(Self {
                    open: open.to_string(),
                    close: close.to_string(),
                    target: target.to_string(),
                })
            }
            _ => Err(Error::Invalid(format!(
                "expected three comma-separated markers, got {spec:?}"
            ))),
        }
    }

    fn collides_with(&self, text: &str) -> Option<&str> {
        [&self.open, &self.close, &self.target]
            .into_iter()
            .find(|m| text.contains(m.as_str()))
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedExample {
    pub verse: Verse,
    pub span: SpanChoice,
    pub kind: PatternKind,
    pub pattern: SpanPattern,
    pub input_text: String,
    pub target_text: String,
}

pub fn make_example(
    lexicon: &Lexicon,
    verse: &Verse,
    span: SpanChoice,
    kind: PatternKind,
    mode: BeatMode,
    markers: &Markers,
    allow_fallback: bool,
) -> Result<MaskedExample> {
    if span.length_words == 0 || span.end_word() > verse.tokens.len() {
        return Err(Error::SpanOutOfBounds {
            start: span.start_word,
            len: span.length_words,
            tokens: verse.tokens.len(),
        });
    }
    if let Some(m) = markers.collides_with(&verse.text) {
        return Err(Error::MarkerCollision(m.to_string()));
    }
    let words = &verse.tokens[span.start_word..span.end_word()];
    let pattern = span_pattern_with(lexicon, words, kind, mode, allow_fallback)?;

    let from = verse.offsets[span.start_word].start;
    let to = verse.offsets[span.end_word() - 1].end;
    let serialized = pattern.serialized();
    let input_text = format!(
        "{}{} {} {}{}",
        &verse.text[..from],
        markers.open,
        serialized,
        markers.close,
        &verse.text[to..]
    );
    let target_text = format!("{} {}", markers.target, &verse.text[from..to]);
    Ok(MaskedExample {
        verse: verse.clone(),
        span,
        kind,
        pattern,
        input_text,
        target_text,
    })
}

/// Rebuilds a verse from an example's input and target strings.
pub fn reconstruct(input: &str, target: &str, markers: &Markers) -> Option<String> {
    let open = input.find(&markers.open)?;
    let after_open = open + markers.open.len();
    let close_end = after_open + input[after_open..].find(&markers.close)? + markers.close.len();
    let words = target.strip_prefix(&markers.target)?.strip_prefix(' ')?;
    Some(format!(
        "{}{}{}",
        &input[..open],
        words,
        &input[close_end..]
    ))
}

/// The text between the open and close markers, i.e. the serialized pattern.
pub fn masked_pattern<'a>(input: &'a str, markers: &Markers) -> Option<&'a str> {
    let open = input.find(&markers.open)? + markers.open.len();
    let close = open + input[open..].find(&markers.close)?;
    Some(input[open..close].trim())
}

/// One line of a dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub input: String,
    pub target: String,
    pub pattern: String,
    pub kind: PatternKind,
    pub mode: BeatMode,
    pub span_start: usize,
    pub span_len: usize,
    pub source_index: usize,
}

impl DatasetRecord {
    pub fn from_example(ex: &MaskedExample, mode: BeatMode) -> Self {
        Self {
            input: ex.input_text.clone(),
            target: ex.target_text.clone(),
            pattern: ex.pattern.stripped(),
            kind: ex.kind,
            mode,
            span_start: ex.span.start_word,
            span_len: ex.span.length_words,
            source_index: ex.verse.source_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub kind: PatternKind,
    pub mode: BeatMode,
    pub markers: Markers,
    pub seed: u64,
    pub eval_fraction: f64,
    pub allow_fallback: bool,
    /// Worker threads for example construction; `None` uses the rayon
    /// default. Output does not depend on it.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kind: PatternKind::Beat,
            mode: BeatMode::Onset,
            markers: Markers::default(),
            seed: 42,
            eval_fraction: 0.005,
            allow_fallback: true,
            workers: None,
        }
    }
}

/// Per-verse RNG, independent of processing order.
pub fn verse_rng(seed: u64, source_index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ source_index as u64)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipStats {
    pub total: usize,
    pub reasons: BTreeMap<String, usize>,
}

impl SkipStats {
    fn add(&mut self, reason: &str) {
        self.total += 1;
        *self.reasons.entry(reason.to_string()).or_default() += 1;
    }
}

fn skip_reason(err: &Error) -> &'static str {
    match err {
        Error::OutOfVocabulary(_) => "out_of_vocabulary",
        Error::EmptyWord(_) => "empty_word",
        Error::MarkerCollision(_) => "marker_collision",
        Error::SpanOutOfBounds { .. } => "no_words",
        _ => "other",
    }
}

/// Builds one example per verse, in input order.
pub fn build_examples(
    lexicon: &Lexicon,
    verses: &[Verse],
    config: &DatasetConfig,
) -> (Vec<DatasetRecord>, SkipStats) {
    let work = || {
        verses
            .par_iter()
            .map(|verse| {
                let mut rng = verse_rng(config.seed, verse.source_index);
                let span = sample_span(verse.tokens.len(), &mut rng);
                make_example(
                    lexicon,
                    verse,
                    span,
                    config.kind,
                    config.mode,
                    &config.markers,
                    config.allow_fallback,
                )
                .map(|ex| DatasetRecord::from_example(&ex, config.mode))
            })
            .collect::<Vec<_>>()
    };
    let results = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(work),
        None => work(),
    };
    let mut skips = SkipStats::default();
    let mut records = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => skips.add(skip_reason(&e)),
        }
    }
    (records, skips)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub toolkit_version: String,
    pub config: DatasetConfig,
    pub input_verses: usize,
    pub train_examples: usize,
    pub eval_examples: usize,
    pub split: SplitManifest,
    pub train_skipped: SkipStats,
    pub eval_skipped: SkipStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective_config: Option<serde_json::Value>,
}

pub const TRAIN_FILE: &str = "train.jsonl";
pub const EVAL_FILE: &str = "eval.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Splits `verses`, masks one span per verse and writes `train.jsonl`,
/// `eval.jsonl` and `manifest.json` into `output_dir`.
pub fn build_dataset(
    lexicon: &Lexicon,
    verses: Vec<Verse>,
    config: &DatasetConfig,
    output_dir: &Path,
    effective_config: Option<serde_json::Value>,
) -> Result<DatasetManifest> {
    let input_verses = verses.len();
    let split = split_verses(verses, config.seed, config.eval_fraction)?;
    let (train, train_skipped) = build_examples(lexicon, &split.train, config);
    let (eval, eval_skipped) = build_examples(lexicon, &split.eval, config);
    if train.is_empty() && eval.is_empty() {
        return Err(Error::EmptyDataset {
            skipped: train_skipped.total + eval_skipped.total,
        });
    }

    fs::create_dir_all(output_dir).map_err(|source| Error::Write {
        path: output_dir.to_path_buf(),
        source,
    })?;
    write_jsonl(&output_dir.join(TRAIN_FILE), &train)?;
    write_jsonl(&output_dir.join(EVAL_FILE), &eval)?;
    let manifest = DatasetManifest {
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        input_verses,
        train_examples: train.len(),
        eval_examples: eval.len(),
        split: split.manifest,
        train_skipped,
        eval_skipped,
        effective_config,
    };
    write_json(&output_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let write_err = |source| Error::Write {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(write_err)?;
    let mut out = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut out, row).map_err(|e| write_err(e.into()))?;
        out.write_all(b"\n").map_err(write_err)?;
    }
    out.flush().map_err(write_err)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Write {
        path: PathBuf::from(path),
        source,
    })
}
