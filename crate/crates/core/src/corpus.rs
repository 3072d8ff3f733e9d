//! Verse ingestion: line filtering and train/eval splitting.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::ops::Range;
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phonolex::normalize;

/// One line of poetry and the words in it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verse {
    pub text: String,
    /// Whitespace-separated tokens that survive normalization, as written.
    pub tokens: Vec<String>,
    /// Byte range of each token in `text`.
    pub offsets: Vec<Range<usize>>,
    pub source_index: usize,
}

impl Verse {
    pub fn new(text: impl Into<String>, source_index: usize) -> Self {
        let text = text.into();
        let mut tokens = Vec::new();
        let mut offsets = Vec::new();
        for range in whitespace_tokens(&text) {
            let tok = &text[range.clone()];
            if !normalize(tok).is_empty() {
                tokens.push(tok.to_string());
                offsets.push(range);
            }
        }
        Self {
            text,
            tokens,
            offsets,
            source_index,
        }
    }
}

fn whitespace_tokens(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..text.len());
    }
    out
}

/// Extracts the verse text from one input line: everything before the
/// first tab, without a trailing carriage return. Further tab-separated
/// columns are metadata and ignored.
pub fn verse_text(line: &str) -> &str {
    let line = line.strip_suffix('\r').unwrap_or(line);
    match line.find('\t') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

pub trait LineFilter: Send + Sync {
    fn name(&self) -> &str;
    fn accepts(&self, verse: &Verse) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterThresholds {
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Lines whose share of disallowed characters reaches this are dropped.
    pub max_foreign_fraction: f64,
    /// At least one stopword is required per this many tokens.
    pub tokens_per_stopword: usize,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self {
            min_tokens: 2,
            max_tokens: 30,
            max_foreign_fraction: 0.10,
            tokens_per_stopword: 8,
        }
    }
}

impl FilterThresholds {
    /// The charset, length and English filters, in that order.
    pub fn builtin_filters(&self) -> Vec<Filter> {
        vec![
            Filter::line(CharsetFilter {
                max_foreign_fraction: self.max_foreign_fraction,
            }),
            Filter::line(LengthFilter {
                min: self.min_tokens,
                max: self.max_tokens,
            }),
            Filter::line(EnglishFilter {
                tokens_per_stopword: self.tokens_per_stopword,
            }),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct LengthFilter {
    pub min: usize,
    pub max: usize,
}

impl LineFilter for LengthFilter {
    fn name(&self) -> &str {
        "length"
    }

    fn accepts(&self, verse: &Verse) -> bool {
        (self.min..=self.max).contains(&verse.tokens.len())
    }
}

#[derive(Debug, Clone)]
pub struct CharsetFilter {
    pub max_foreign_fraction: f64,
}

const COMMON_PUNCTUATION: &str = ".,;:!?'\"-()[]&/…—–‘’“”";

fn allowed_char(c: char) -> bool {
    c.is_alphabetic() || c.is_whitespace() || COMMON_PUNCTUATION.contains(c)
}

impl LineFilter for CharsetFilter {
    fn name(&self) -> &str {
        "charset"
    }

    fn accepts(&self, verse: &Verse) -> bool {
        let total = verse.text.chars().count();
        if total == 0 {
            return true;
        }
        let foreign = verse.text.chars().filter(|&c| !allowed_char(c)).count();
        (foreign as f64) / (total as f64) < self.max_foreign_fraction
    }
}

/// Cheap language check: English verse is dense in function words.
#[derive(Debug, Clone)]
pub struct EnglishFilter {
    pub tokens_per_stopword: usize,
}

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "art", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "did", "do", "does", "doth", "down", "each", "ere", "for", "from",
    "had", "has", "hath", "have", "he", "her", "here", "hers", "him", "his", "how", "i", "if",
    "in", "into", "is", "it", "its", "me", "might", "mine", "more", "most", "my", "no", "nor",
    "not", "now", "o", "of", "off", "oh", "on", "once", "one", "only", "or", "our", "out", "over",
    "shall", "she", "should", "so", "some", "such", "than", "that", "the", "thee", "their", "them",
    "then", "there", "these", "they", "thine", "this", "those", "thou", "thy", "to", "too",
    "under", "until", "up", "upon", "us", "very", "was", "we", "were", "what", "when", "where",
    "which", "while", "who", "whom", "why", "will", "with", "would", "ye", "yet", "you", "your",
];

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.binary_search(&normalize(word).as_str()).is_ok()
}

impl LineFilter for EnglishFilter {
    fn name(&self) -> &str {
        "english"
    }

    fn accepts(&self, verse: &Verse) -> bool {
        let hits = verse.tokens.iter().filter(|t| is_stopword(t)).count();
        hits * self.tokens_per_stopword.max(1) >= verse.tokens.len()
    }
}

/// External language classifier run as a child process.
///
/// The child reads one verse per line on stdin and answers `keep` or `drop`
/// per line, in order, on stdout.
#[derive(Debug, Clone)]
pub struct ClassifierHook {
    pub name: String,
    pub command: String,
}

impl ClassifierHook {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            name: "classifier".to_string(),
            command: command.into(),
        }
    }

    pub fn classify(&self, texts: &[&str]) -> Result<Vec<bool>> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|source| Error::Spawn {
                command: self.command.clone(),
                source,
            })?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let payload: String = texts.iter().flat_map(|t| [*t, "\n"]).collect();
        let writer = thread::spawn(move || {
            // A child that exits early surfaces below as a short response.
            let _ = stdin.write_all(payload.as_bytes());
        });

        let protocol = |message: String| Error::Protocol {
            command: self.command.clone(),
            message,
        };
        let mut verdicts = Vec::with_capacity(texts.len());
        for (idx, line) in BufReader::new(stdout).lines().enumerate() {
            let line = line.map_err(|e| protocol(format!("reading response: {e}")))?;
            let verdict = match line.trim() {
                "keep" => true,
                "drop" => false,
                other => {
                    return Err(protocol(format!(
                        "response line {}: expected keep or drop, got {other:?}",
                        idx + 1
                    )))
                }
            };
            verdicts.push(verdict);
        }
        let _ = writer.join();
        let _ = child.wait();
        if verdicts.len() != texts.len() {
            return Err(protocol(format!(
                "sent {} line(s) but received {} verdict(s)",
                texts.len(),
                verdicts.len()
            )));
        }
        Ok(verdicts)
    }
}

pub enum Filter {
    Line(Box<dyn LineFilter>),
    Hook(ClassifierHook),
}

impl Filter {
    pub fn line(filter: impl LineFilter + 'static) -> Self {
        Filter::Line(Box::new(filter))
    }

    pub fn name(&self) -> &str {
        match self {
            Filter::Line(f) => f.name(),
            Filter::Hook(h) => &h.name,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Cleaned {
    pub verses: Vec<Verse>,
    /// Rejections per filter; a line is charged to the first filter that
    /// rejects it.
    pub stats: BTreeMap<String, usize>,
}

/// Runs `lines` through `filters` in order. Line numbers (0-based) become
/// `source_index`. Lines without any word that pass every filter are still
/// dropped, counted under `empty`.
pub fn clean<I, S>(lines: I, filters: &[Filter]) -> Result<Cleaned>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut stats: BTreeMap<String, usize> = BTreeMap::new();
    let mut verses: Vec<Verse> = lines
        .into_iter()
        .enumerate()
        .map(|(idx, line)| Verse::new(verse_text(line.as_ref()), idx))
        .collect();
    for filter in filters {
        let keep: Vec<bool> = match filter {
            Filter::Line(f) => verses.par_iter().map(|v| f.accepts(v)).collect(),
            Filter::Hook(h) => {
                let texts: Vec<&str> = verses.iter().map(|v| v.text.as_str()).collect();
                h.classify(&texts)?
            }
        };
        let before = verses.len();
        let mut flags = keep.into_iter();
        verses.retain(|_| flags.next().unwrap_or(false));
        *stats.entry(filter.name().to_string()).or_default() += before - verses.len();
    }
    let before = verses.len();
    verses.retain(|v| !v.tokens.is_empty());
    if before > verses.len() {
        stats.insert("empty".to_string(), before - verses.len());
    }
    Ok(Cleaned { verses, stats })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub eval_fraction: f64,
    pub train_count: usize,
    pub eval_count: usize,
    pub filter_stats: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<Verse>,
    pub eval: Vec<Verse>,
    pub manifest: SplitManifest,
}

/// Number of evaluation items for `n` inputs.
pub fn eval_count(n: usize, eval_fraction: f64) -> usize {
    (eval_fraction * n as f64).round() as usize
}

/// Seeded random partition. Both halves keep the input order.
pub fn split<T>(
    items: Vec<T>,
    seed: u64,
    eval_fraction: f64,
) -> Result<(Vec<T>, Vec<T>, SplitManifest)> {
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(Error::EvalFraction(eval_fraction));
    }
    let n = items.len();
    if n < 2 {
        return Err(Error::TooFewVerses(n));
    }
    let n_eval = eval_count(n, eval_fraction);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_eval = vec![false; n];
    for &i in &order[..n_eval] {
        in_eval[i] = true;
    }
    let (mut train, mut eval) = (Vec::with_capacity(n - n_eval), Vec::with_capacity(n_eval));
    for (item, is_eval) in items.into_iter().zip(in_eval) {
        if is_eval {
            eval.push(item);
        } else {
            train.push(item);
        }
    }
    let manifest = SplitManifest {
        seed,
        eval_fraction,
        train_count: train.len(),
        eval_count: eval.len(),
        filter_stats: BTreeMap::new(),
    };
    Ok((train, eval, manifest))
}

pub fn split_verses(verses: Vec<Verse>, seed: u64, eval_fraction: f64) -> Result<Split> {
    let (train, eval, manifest) = split(verses, seed, eval_fraction)?;
    Ok(Split {
        train,
        eval,
        manifest,
    })
}

/// Reads a corpus file into verses, one per line, without filtering.
pub fn read_verses(path: &Path) -> Result<Vec<Verse>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(idx, line)| Verse::new(verse_text(line), idx))
        .collect())
}
