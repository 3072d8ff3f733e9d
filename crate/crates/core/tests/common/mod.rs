//! Fixtures and brute-force reference implementations shared by the
//! integration tests. Nothing here calls the code under test except to load
//! fixture data.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeSet, VecDeque};
use std::path::PathBuf;

use poembeat::filler::FreqTable;
use poembeat::phonolex::ClassTable;
use poembeat::{BeatMode, Lexicon, PhoneClass, PhonemeSequence};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).expect("fixture is readable")
}

pub fn tiny_lexicon() -> Lexicon {
    Lexicon::from_text(&read_fixture("tiny.dict"), ClassTable::bundled())
        .expect("tiny lexicon loads")
}

pub fn tiny_freq() -> FreqTable {
    FreqTable::parse(&read_fixture("tiny.freq"), "tiny.freq").expect("tiny freq table loads")
}

/// Beat pattern written out from the phone classes, slot by slot.
pub fn reference_beat(seq: &PhonemeSequence, mode: BeatMode) -> String {
    let mut slots: Vec<(bool, char)> = Vec::new();
    for phone in &seq.phones {
        match phone.class {
            PhoneClass::Consonant => slots.push((false, 'C')),
            PhoneClass::ShortVowel => slots.push((true, 'V')),
            PhoneClass::LongVowel | PhoneClass::Diphthong => {
                slots.push((true, 'V'));
                slots.push((false, 'V'));
            }
        }
    }
    let mut out = vec!['0'; slots.len()];
    for (i, &(vowel_start, _)) in slots.iter().enumerate() {
        if !vowel_start {
            continue;
        }
        let target = match mode {
            BeatMode::Onset if i > 0 && slots[i - 1].1 == 'C' => i - 1,
            _ => i,
        };
        out[target] = '1';
    }
    out.into_iter().collect()
}

/// Exact edit distances between all binary strings of length at most
/// `max_len`, found by breadth-first search over single edits.
pub struct EditOracle {
    max_len: usize,
    dist: Vec<Vec<u8>>,
}

fn binary_id(s: &[u8]) -> usize {
    let mut v = 0usize;
    for &b in s {
        v = v * 2 + usize::from(b == b'1');
    }
    (1usize << s.len()) - 1 + v
}

fn binary_string(id: usize) -> Vec<u8> {
    let mut len = 0;
    while (1usize << (len + 1)) - 1 <= id {
        len += 1;
    }
    let v = id - ((1usize << len) - 1);
    (0..len)
        .rev()
        .map(|bit| if v >> bit & 1 == 1 { b'1' } else { b'0' })
        .collect()
}

impl EditOracle {
    pub fn new(max_len: usize) -> Self {
        let count = (1usize << (max_len + 1)) - 1;
        let dist = (0..count)
            .map(|src| {
                let mut d = vec![u8::MAX; count];
                d[src] = 0;
                let mut queue = VecDeque::from([src]);
                while let Some(cur) = queue.pop_front() {
                    let s = binary_string(cur);
                    let next = d[cur] + 1;
                    let mut visit = |t: Vec<u8>| {
                        if t.len() <= max_len {
                            let id = binary_id(&t);
                            if d[id] == u8::MAX {
                                d[id] = next;
                                queue.push_back(id);
                            }
                        }
                    };
                    for i in 0..s.len() {
                        let mut t = s.clone();
                        t.remove(i);
                        visit(t);
                        let mut t = s.clone();
                        t[i] = if t[i] == b'0' { b'1' } else { b'0' };
                        visit(t);
                    }
                    for i in 0..=s.len() {
                        for c in *b"01" {
                            let mut t = s.clone();
                            t.insert(i, c);
                            visit(t);
                        }
                    }
                }
                d
            })
            .collect();
        Self { max_len, dist }
    }

    pub fn distance(&self, a: &str, b: &str) -> usize {
        assert!(a.len() <= self.max_len && b.len() <= self.max_len);
        usize::from(self.dist[binary_id(a.as_bytes())][binary_id(b.as_bytes())])
    }

    pub fn similarity(&self, a: &str, b: &str) -> f64 {
        let longest = a.len().max(b.len());
        if longest == 0 {
            1.0
        } else {
            1.0 - self.distance(a, b) as f64 / longest as f64
        }
    }
}

/// Steps `indices` to the next tuple in lexicographic order; false after
/// the last one.
fn advance(indices: &mut [usize], base: usize) -> bool {
    for slot in indices.iter_mut().rev() {
        *slot += 1;
        if *slot < base {
            return true;
        }
        *slot = 0;
    }
    false
}

/// A word sequence matching a target, as the brute-force search sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteCandidate {
    pub words: Vec<String>,
    pub variants: Vec<usize>,
    pub score: f64,
}

fn brute_rank(a: &BruteCandidate, b: &BruteCandidate) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then(a.words.len().cmp(&b.words.len()))
        .then_with(|| a.words.cmp(&b.words))
        .then_with(|| a.variants.cmp(&b.variants))
}

/// Every sequence of at most `max_words` lexicon pronunciations whose beat
/// patterns concatenate to `target`, found by trying all sequences.
pub fn brute_fill(
    lexicon: &Lexicon,
    freq: &FreqTable,
    target: &str,
    mode: BeatMode,
    max_words: usize,
    all_variants: bool,
) -> Vec<BruteCandidate> {
    let mut options: Vec<(String, usize, String, f64)> = Vec::new();
    for (word, variants) in lexicon.iter() {
        let mut seen = BTreeSet::new();
        for (v, seq) in variants.iter().enumerate() {
            if !all_variants && v > 0 {
                break;
            }
            if seq.vowel_count() == 0 {
                continue;
            }
            let beat = reference_beat(seq, mode);
            if seen.insert(beat.clone()) {
                options.push((
                    word.to_string(),
                    v,
                    beat,
                    (freq.frequency(word) as f64).ln(),
                ));
            }
        }
    }

    let mut found = Vec::new();
    let mut indices: Vec<usize> = Vec::new();
    for len in 1..=max_words {
        indices.clear();
        indices.resize(len, 0);
        loop {
            let joined: String = indices.iter().map(|&i| options[i].2.as_str()).collect();
            if joined == target {
                found.push(BruteCandidate {
                    words: indices.iter().map(|&i| options[i].0.clone()).collect(),
                    variants: indices.iter().map(|&i| options[i].1).collect(),
                    score: indices.iter().map(|&i| options[i].3).sum(),
                });
            }
            if !advance(&mut indices, options.len()) {
                break;
            }
        }
    }
    found.sort_by(brute_rank);
    if all_variants {
        let mut seen = BTreeSet::new();
        found.retain(|c| seen.insert(c.words.clone()));
    }
    found
}

/// Pearson goodness of fit of span lengths against Geometric(p) on
/// {1, 2, ...} truncated at `cap`. Tail bins are pooled until every
/// expected count is at least 5. Returns (statistic, degrees of freedom,
/// p-value).
pub fn chi_square_truncated_geometric(lengths: &[usize], p: f64, cap: usize) -> (f64, usize, f64) {
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    let n = lengths.len() as f64;
    let z = 1.0 - (1.0 - p).powi(cap as i32);
    let expected: Vec<f64> = (1..=cap)
        .map(|k| n * p * (1.0 - p).powi(k as i32 - 1) / z)
        .collect();
    let mut observed = vec![0.0; cap];
    for &len in lengths {
        observed[len - 1] += 1.0;
    }

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for k in (0..cap).rev() {
        o_acc += observed[k];
        e_acc += expected[k];
        if e_acc >= 5.0 {
            bins.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => bins.push((o_acc, e_acc)),
        }
    }
    let stat: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = bins.len().saturating_sub(1);
    let p_value = if df == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(df as f64).expect("positive df").cdf(stat)
    };
    (stat, df, p_value)
}
