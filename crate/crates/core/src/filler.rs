//! Exact beat-constrained word insertion from the lexicon.
//!
//! Every lexicon word is indexed by its beat pattern. A target pattern is
//! cut into consecutive chunks that are index keys ([`segment`]), and each
//! cut is expanded into word sequences ranked by unigram log-frequency
//! ([`fill`]).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::patterns::{beat_of, BeatMode};
use crate::phonolex::{normalize, Lexicon};

/// Word counts from a `word<TAB>count` file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FreqTable {
    counts: HashMap<String, u64>,
}

/// Parses one frequency-table line. `Ok(None)` for blank lines.
pub fn parse_freq_line(line: &str) -> std::result::Result<Option<(String, u64)>, String> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.trim().is_empty() {
        return Ok(None);
    }
    let (word, count) = line
        .split_once('\t')
        .ok_or_else(|| "expected `word<TAB>count`".to_string())?;
    let key = normalize(word);
    if key.is_empty() {
        return Err(format!("word {word:?} is empty after normalization"));
    }
    let count: u64 = count
        .trim()
        .parse()
        .map_err(|_| format!("bad count {count:?}"))?;
    Ok(Some((key, count)))
}

impl FreqTable {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut counts = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            match parse_freq_line(line) {
                Ok(Some((word, count))) => *counts.entry(word).or_insert(0) += count,
                Ok(None) => {}
                Err(message) => {
                    return Err(Error::Format {
                        path: origin.to_string(),
                        line: idx + 1,
                        message,
                    })
                }
            }
        }
        Ok(Self { counts })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn from_counts<I: IntoIterator<Item = (S, u64)>, S: AsRef<str>>(items: I) -> Self {
        Self {
            counts: items
                .into_iter()
                .map(|(w, c)| (normalize(w.as_ref()), c))
                .collect(),
        }
    }

    /// Count for `word`, at least 1.
    pub fn frequency(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(1).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub word: String,
    pub frequency: u64,
    /// Which pronunciation produced the key; 0 is the default.
    pub variant: usize,
}

#[derive(Debug, Clone)]
pub struct BeatIndex {
    by_pattern: BTreeMap<String, Vec<IndexEntry>>,
    pattern_lengths: BTreeSet<usize>,
    mode: BeatMode,
}

/// Indexes every pronunciation with at least one vowel under its beat
/// pattern. Entries under a key are ordered by descending frequency, then
/// word, then variant.
pub fn build_index(lexicon: &Lexicon, freq: Option<&FreqTable>, mode: BeatMode) -> BeatIndex {
    let mut by_pattern: BTreeMap<String, Vec<IndexEntry>> = BTreeMap::new();
    for (word, variants) in lexicon.iter() {
        let frequency = freq.map_or(1, |f| f.frequency(word));
        let mut seen = BTreeSet::new();
        for (variant, seq) in variants.iter().enumerate() {
            if seq.vowel_count() == 0 {
                continue;
            }
            let key = beat_of(seq, mode).as_str().to_string();
            if seen.insert(key.clone()) {
                by_pattern.entry(key).or_default().push(IndexEntry {
                    word: word.to_string(),
                    frequency,
                    variant,
                });
            }
        }
    }
    for entries in by_pattern.values_mut() {
        entries.sort_by(|a, b| {
            b.frequency
                .cmp(&a.frequency)
                .then_with(|| a.word.cmp(&b.word))
                .then(a.variant.cmp(&b.variant))
        });
    }
    let pattern_lengths = by_pattern.keys().map(String::len).collect();
    BeatIndex {
        by_pattern,
        pattern_lengths,
        mode,
    }
}

/// Which pronunciations a query may use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Variants {
    /// Only each word's default pronunciation, so every candidate re-derives
    /// the target pattern through plain phonemization.
    #[default]
    DefaultOnly,
    All,
}

impl BeatIndex {
    pub fn mode(&self) -> BeatMode {
        self.mode
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.by_pattern.keys().map(String::as_str)
    }

    pub fn pattern_lengths(&self) -> &BTreeSet<usize> {
        &self.pattern_lengths
    }

    pub fn entries(&self, pattern: &str) -> &[IndexEntry] {
        self.by_pattern.get(pattern).map_or(&[], Vec::as_slice)
    }

    fn usable<'a>(
        &'a self,
        pattern: &str,
        variants: Variants,
    ) -> impl Iterator<Item = &'a IndexEntry> {
        self.entries(pattern)
            .iter()
            .filter(move |e| variants == Variants::All || e.variant == 0)
    }

    fn has_usable(&self, pattern: &str, variants: Variants) -> bool {
        self.usable(pattern, variants).next().is_some()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FillOptions {
    /// Defaults to the number of beats in the target.
    pub max_words: Option<usize>,
    pub max_segmentations: usize,
    pub variants: Variants,
}

impl Default for FillOptions {
    fn default() -> Self {
        Self {
            max_words: None,
            max_segmentations: 10_000,
            variants: Variants::DefaultOnly,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Segmentations {
    /// Chunk lengths, fewest chunks first, then by ascending cut positions.
    pub cuts: Vec<Vec<usize>>,
    /// Set when `max_segmentations` stopped the enumeration early.
    pub truncated: bool,
}

/// All ways to cut `pattern` into at most `max_words` index keys.
pub fn segment(pattern: &str, index: &BeatIndex, opts: &FillOptions) -> Segmentations {
    let n = pattern.len();
    let mut out = Segmentations::default();
    if n == 0 || !pattern.bytes().all(|b| b == b'0' || b == b'1') {
        return out;
    }
    let max_words = opts
        .max_words
        .unwrap_or_else(|| pattern.bytes().filter(|&b| b == b'1').count())
        .min(n);
    if max_words == 0 {
        return out;
    }

    // chunk[pos] = key lengths usable at pos, ascending
    let chunk: Vec<Vec<usize>> = (0..n)
        .map(|pos| {
            index
                .pattern_lengths()
                .iter()
                .copied()
                .filter(|&len| {
                    pos + len <= n && index.has_usable(&pattern[pos..pos + len], opts.variants)
                })
                .collect()
        })
        .collect();
    // feasible[pos][w]: pattern[pos..] splits into exactly w keys
    let mut feasible = vec![vec![false; max_words + 1]; n + 1];
    feasible[n][0] = true;
    for pos in (0..n).rev() {
        for w in 1..=max_words {
            feasible[pos][w] = chunk[pos].iter().any(|&len| feasible[pos + len][w - 1]);
        }
    }

    let mut stack = Vec::new();
    for words in 1..=max_words {
        if !feasible[0][words] {
            continue;
        }
        if !enumerate(
            0,
            words,
            &chunk,
            &feasible,
            &mut stack,
            &mut out,
            opts.max_segmentations,
        ) {
            out.truncated = true;
            break;
        }
    }
    out
}

fn enumerate(
    pos: usize,
    remaining: usize,
    chunk: &[Vec<usize>],
    feasible: &[Vec<bool>],
    stack: &mut Vec<usize>,
    out: &mut Segmentations,
    bound: usize,
) -> bool {
    if remaining == 0 {
        if out.cuts.len() >= bound {
            return false;
        }
        out.cuts.push(stack.clone());
        return true;
    }
    for &len in &chunk[pos] {
        if feasible[pos + len][remaining - 1] {
            stack.push(len);
            let more = enumerate(pos + len, remaining - 1, chunk, feasible, stack, out, bound);
            stack.pop();
            if !more {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FillCandidate {
    pub words: Vec<String>,
    /// Sum of natural-log word frequencies.
    pub score: f64,
    /// Pattern length of each word.
    pub segmentation: Vec<usize>,
    /// Pronunciation variant used for each word.
    pub variants: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FillResult {
    pub candidates: Vec<FillCandidate>,
    pub segmentations: usize,
    pub truncated: bool,
}

fn rank(a: &FillCandidate, b: &FillCandidate) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then(a.words.len().cmp(&b.words.len()))
        .then_with(|| a.words.cmp(&b.words))
        .then_with(|| a.variants.cmp(&b.variants))
}

/// The `k` best word sequences whose beat patterns concatenate to `pattern`.
pub fn fill(pattern: &str, index: &BeatIndex, k: usize, opts: &FillOptions) -> FillResult {
    let segs = segment(pattern, index, opts);
    let mut pool: Vec<FillCandidate> = Vec::new();
    for cuts in &segs.cuts {
        let mut partial = vec![FillCandidate {
            words: Vec::new(),
            score: 0.0,
            segmentation: Vec::new(),
            variants: Vec::new(),
        }];
        let mut pos = 0;
        for &len in cuts {
            let key = &pattern[pos..pos + len];
            pos += len;
            let choices: Vec<&IndexEntry> = index.usable(key, opts.variants).take(k).collect();
            let mut next =
                Vec::with_capacity(partial.len().saturating_mul(choices.len()).min(1 << 20));
            for p in &partial {
                for e in &choices {
                    let mut c = p.clone();
                    c.words.push(e.word.clone());
                    c.score += (e.frequency as f64).ln();
                    c.segmentation.push(len);
                    c.variants.push(e.variant);
                    next.push(c);
                }
            }
            next.sort_by(rank);
            next.truncate(k);
            partial = next;
        }
        pool.extend(partial);
    }
    pool.sort_by(rank);
    if opts.variants == Variants::All {
        let mut seen = BTreeSet::new();
        pool.retain(|c| seen.insert(c.words.clone()));
    }
    pool.truncate(k);
    FillResult {
        candidates: pool,
        segmentations: segs.cuts.len(),
        truncated: segs.truncated,
    }
}

/// Reorders candidates by an external cost, lower first. Ties keep the
/// frequency order.
pub fn rerank_by<F: FnMut(&FillCandidate) -> f64>(candidates: &mut [FillCandidate], mut cost: F) {
    let mut keyed: Vec<(f64, usize)> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| (cost(c), i))
        .collect();
    keyed.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    let reordered: Vec<FillCandidate> = keyed.iter().map(|&(_, i)| candidates[i].clone()).collect();
    candidates.clone_from_slice(&reordered);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phonolex::ClassTable;

    fn fixture() -> Lexicon {
        Lexicon::from_text(
            "IN  IH0 N\nBELIEVE  B IH0 L IY1 V\nI  AY1\nREAD  R IY1 D\nREAD(1)  R EH1 D\nHMM  HH M\n",
            ClassTable::bundled(),
        )
        .unwrap()
    }

    fn freq() -> FreqTable {
        FreqTable::from_counts([("in", 50u64), ("i", 20), ("believe", 3)])
    }

    #[test]
    fn index_keys_and_variants() {
        let idx = build_index(&fixture(), None, BeatMode::Onset);
        let words = |k: &str| {
            idx.entries(k)
                .iter()
                .map(|e| e.word.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(words("10"), ["i", "in"]);
        assert_eq!(words("101000"), ["believe"]);
        // R IY D -> 1000, R EH D -> 100
        assert_eq!(words("1000"), ["read"]);
        assert_eq!(words("100"), ["read"]);
        assert_eq!(idx.entries("100")[0].variant, 1);
        assert!(idx.entries("0").is_empty() && idx.entries("00").is_empty());
        assert!(idx.keys().all(|k| k.contains('1')));
    }

    #[test]
    fn missing_frequencies_default_to_one() {
        let idx = build_index(&fixture(), Some(&FreqTable::default()), BeatMode::Onset);
        assert!(idx.entries("10").iter().all(|e| e.frequency == 1));
    }

    #[test]
    fn fill_orders_by_frequency() {
        let idx = build_index(&fixture(), Some(&freq()), BeatMode::Onset);
        let r = fill("10", &idx, 2, &FillOptions::default());
        let words: Vec<_> = r.candidates.iter().map(|c| c.words.join(" ")).collect();
        assert_eq!(words, ["in", "i"]);
        assert!((r.candidates[0].score - 50f64.ln()).abs() < 1e-12);

        let three = Lexicon::from_text(
            "IN  IH0 N\nBELIEVE  B IH0 L IY1 V\nI  AY1\n",
            ClassTable::bundled(),
        )
        .unwrap();
        let idx = build_index(&three, Some(&freq()), BeatMode::Onset);
        let r = fill("101000", &idx, 1, &FillOptions::default());
        assert_eq!(r.candidates[0].words, ["believe"]);
        assert!(fill("11", &idx, 5, &FillOptions::default())
            .candidates
            .is_empty());
    }

    #[test]
    fn segmentation_order_and_cuts() {
        let lex = Lexicon::from_text("IN  IH0 N\nRED  R EH1 D\n", ClassTable::bundled()).unwrap();
        let idx = build_index(&lex, None, BeatMode::Onset);
        let segs = segment("1010010", &idx, &FillOptions::default());
        assert_eq!(segs.cuts, vec![vec![2, 3, 2]]);
        let segs = segment("10", &idx, &FillOptions::default());
        assert_eq!(segs.cuts, vec![vec![2]]);
    }

    #[test]
    fn default_only_skips_alternate_pronunciations() {
        let idx = build_index(&fixture(), None, BeatMode::Onset);
        assert!(fill("100", &idx, 5, &FillOptions::default())
            .candidates
            .is_empty());
        let all = FillOptions {
            variants: Variants::All,
            ..FillOptions::default()
        };
        let r = fill("100", &idx, 5, &all);
        assert_eq!(r.candidates[0].words, ["read"]);
        assert_eq!(r.candidates[0].variants, [1]);
    }

    #[test]
    fn segmentation_bound_truncates() {
        let lex =
            Lexicon::from_text("IN  IH0 N\nININ  IH0 N IH0 N\n", ClassTable::bundled()).unwrap();
        let idx = build_index(&lex, None, BeatMode::Nucleus);
        let segs = segment("1010", &idx, &FillOptions::default());
        assert_eq!(segs.cuts, vec![vec![4], vec![2, 2]]);
        assert!(!segs.truncated);
        let opts = FillOptions {
            max_segmentations: 1,
            ..FillOptions::default()
        };
        let segs = segment("1010", &idx, &opts);
        assert_eq!(segs.cuts, vec![vec![4]]);
        assert!(segs.truncated);
    }

    #[test]
    fn freq_lines() {
        assert_eq!(
            parse_freq_line("The\t12"),
            Ok(Some(("the".to_string(), 12)))
        );
        assert_eq!(parse_freq_line(""), Ok(None));
        assert!(parse_freq_line("the 12").is_err());
        assert!(parse_freq_line("the\tx").is_err());
        assert!(parse_freq_line("...\t3").is_err());
        let t = FreqTable::parse("a\t1\nA\t2\n", "t").unwrap();
        assert_eq!(t.frequency("a"), 3);
        assert!(FreqTable::parse("a\t1\nbad\n", "t").is_err());
    }

    #[test]
    fn rerank_is_stable() {
        let idx = build_index(&fixture(), Some(&freq()), BeatMode::Onset);
        let mut c = fill("10", &idx, 2, &FillOptions::default()).candidates;
        rerank_by(&mut c, |c| if c.words[0] == "i" { 0.0 } else { 1.0 });
        assert_eq!(c[0].words, ["i"]);
        rerank_by(&mut c, |_| 0.0);
        assert_eq!(c[0].words, ["i"]);
    }
}
