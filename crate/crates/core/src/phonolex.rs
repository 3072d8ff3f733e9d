//! Pronouncing-lexicon lookup and phone classification.
//!
//! A [`Lexicon`] pairs a pronouncing dictionary (one `WORD PH1 PH2 ...`
//! entry per line, CMU style) with a [`ClassTable`] that assigns every phone
//! symbol to consonant, short vowel, long vowel or diphthong. Words missing
//! from the dictionary go through [`fallback_phonemize`], a letter-based
//! heuristic that is crude but total.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED_DICT: &str = include_str!("../data/cmudict.dict");
const BUNDLED_CLASSES: &str = include_str!("../data/phone_classes.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhoneClass {
    Consonant,
    ShortVowel,
    LongVowel,
    Diphthong,
}

impl PhoneClass {
    pub fn is_vowel(self) -> bool {
        !matches!(self, PhoneClass::Consonant)
    }

    /// Number of CV slots the phone occupies.
    pub fn slots(self) -> usize {
        match self {
            PhoneClass::Consonant | PhoneClass::ShortVowel => 1,
            PhoneClass::LongVowel | PhoneClass::Diphthong => 2,
        }
    }

    /// Parses the class column of a classification table.
    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "C" => Some(PhoneClass::Consonant),
            "SV" => Some(PhoneClass::ShortVowel),
            "LV" => Some(PhoneClass::LongVowel),
            "DIPH" => Some(PhoneClass::Diphthong),
            _ => None,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            PhoneClass::Consonant => "C",
            PhoneClass::ShortVowel => "SV",
            PhoneClass::LongVowel => "LV",
            PhoneClass::Diphthong => "DIPH",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stress {
    Unstressed,
    Primary,
    Secondary,
}

impl Stress {
    fn from_digit(d: char) -> Option<Self> {
        match d {
            '0' => Some(Stress::Unstressed),
            '1' => Some(Stress::Primary),
            '2' => Some(Stress::Secondary),
            _ => None,
        }
    }

    fn digit(self) -> char {
        match self {
            Stress::Unstressed => '0',
            Stress::Primary => '1',
            Stress::Secondary => '2',
        }
    }
}

/// One phone with its stress digit split off. Stress is only ever set on
/// vowels and is carried along but not used for beat placement.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Phone {
    pub symbol: Arc<str>,
    pub class: PhoneClass,
    pub stress: Option<Stress>,
}

impl fmt::Display for Phone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.symbol)?;
        if let Some(stress) = self.stress {
            write!(f, "{}", stress.digit())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Lexicon,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeSequence {
    pub word: String,
    pub phones: Vec<Phone>,
    pub source: Source,
}

impl PhonemeSequence {
    pub fn vowel_count(&self) -> usize {
        self.phones.iter().filter(|p| p.class.is_vowel()).count()
    }
}

/// Phone symbol to class mapping, loaded from `SYMBOL CLASS` lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassTable {
    classes: HashMap<String, PhoneClass>,
}

impl ClassTable {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut classes = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let format_err = |message: String| Error::Format {
                path: origin.to_string(),
                line: idx + 1,
                message,
            };
            let mut cols = line.split_whitespace();
            let (Some(symbol), Some(code), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(format_err(format!("expected `SYMBOL CLASS`, got {line:?}")));
            };
            let class = PhoneClass::from_code(code).ok_or_else(|| {
                format_err(format!(
                    "unknown class {code:?} (expected C, SV, LV or DIPH)"
                ))
            })?;
            if !is_phone_symbol(symbol) {
                return Err(format_err(format!("bad phone symbol {symbol:?}")));
            }
            classes.insert(symbol.to_ascii_uppercase(), class);
        }
        Ok(Self { classes })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_CLASSES, "phone_classes.txt").expect("bundled class table parses")
    }

    pub fn classify(&self, symbol: &str) -> Option<PhoneClass> {
        self.classes.get(symbol).copied()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

fn is_phone_symbol(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphabetic())
}

/// A successfully parsed dictionary line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictEntry {
    /// Headword as written, variant suffix removed.
    pub word: String,
    /// The `N` in `WORD(N)`, when present.
    pub variant: Option<u32>,
    /// Phone symbols (uppercased) and their optional stress digit.
    pub phones: Vec<(String, Option<Stress>)>,
}

/// Parses one pronouncing-dictionary line.
///
/// `Ok(None)` for blank and comment lines (`#` or `;;;`). Trailing `# ...`
/// comments are dropped. Word and phones may be separated by any run of
/// whitespace.
pub fn parse_dict_line(line: &str) -> std::result::Result<Option<DictEntry>, String> {
    let body = match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    };
    let body = body.trim();
    if body.is_empty() || body.starts_with(";;;") {
        return Ok(None);
    }
    let mut cols = body.split_whitespace();
    let head = cols.next().expect("non-empty line has a first column");
    let (word, variant) = split_variant(head)?;
    let mut phones = Vec::new();
    for tok in cols {
        let (symbol, stress) = match tok.char_indices().last() {
            Some((pos, d)) if d.is_ascii_digit() => {
                let stress =
                    Stress::from_digit(d).ok_or_else(|| format!("bad stress digit in {tok:?}"))?;
                (&tok[..pos], Some(stress))
            }
            _ => (tok, None),
        };
        if !is_phone_symbol(symbol) {
            return Err(format!("bad phone {tok:?}"));
        }
        phones.push((symbol.to_ascii_uppercase(), stress));
    }
    if phones.is_empty() {
        return Err(format!("entry {head:?} has no phones"));
    }
    Ok(Some(DictEntry {
        word: word.to_string(),
        variant,
        phones,
    }))
}

fn split_variant(head: &str) -> std::result::Result<(&str, Option<u32>), String> {
    let Some(open) = head.find('(') else {
        if head.contains(')') {
            return Err(format!("unbalanced parenthesis in {head:?}"));
        }
        return Ok((head, None));
    };
    let rest = &head[open + 1..];
    let num = rest
        .strip_suffix(')')
        .ok_or_else(|| format!("unterminated variant suffix in {head:?}"))?;
    let n: u32 = num
        .parse()
        .map_err(|_| format!("bad variant number in {head:?}"))?;
    if open == 0 {
        return Err(format!("variant suffix without a word in {head:?}"));
    }
    Ok((&head[..open], Some(n)))
}

/// Statistics gathered while loading a dictionary.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub words: usize,
    pub pronunciations: usize,
    /// Malformed lines as (1-based line number, reason).
    pub skipped: Vec<(usize, String)>,
    /// Well-formed entries whose headword normalizes to nothing.
    pub unaddressable: usize,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: HashMap<String, Vec<PhonemeSequence>>,
    table: ClassTable,
    report: LoadReport,
}

impl Lexicon {
    pub fn load(path: impl AsRef<Path>, table_path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let table = ClassTable::load(table_path)?;
        let text = read_to_string(path)?;
        Self::from_text(&text, table)
    }

    /// The CMU pronouncing dictionary with the default class table, parsed
    /// once per process.
    pub fn bundled() -> &'static Lexicon {
        static BUNDLED: OnceLock<Lexicon> = OnceLock::new();
        BUNDLED.get_or_init(|| {
            Lexicon::from_text(BUNDLED_DICT, ClassTable::bundled())
                .expect("bundled lexicon is consistent with the bundled class table")
        })
    }

    pub fn from_text(text: &str, table: ClassTable) -> Result<Self> {
        let mut report = LoadReport::default();
        // Entries whose headword survives normalization unchanged come
        // first; stripped forms such as 'tis -> tis only add variants.
        let mut exact = Vec::new();
        let mut stripped = Vec::new();
        let mut missing = BTreeSet::new();

        for (idx, line) in text.lines().enumerate() {
            let entry = match parse_dict_line(line) {
                Ok(Some(entry)) => entry,
                Ok(None) => continue,
                Err(reason) => {
                    report.skipped.push((idx + 1, reason));
                    continue;
                }
            };
            let key = normalize(&entry.word);
            if key.is_empty() {
                report.unaddressable += 1;
                continue;
            }
            for (symbol, _) in &entry.phones {
                if table.classify(symbol).is_none() {
                    missing.insert(symbol.clone());
                }
            }
            if key == entry.word.to_lowercase() {
                exact.push((key, entry.phones, idx + 1));
            } else {
                stripped.push((key, entry.phones, idx + 1));
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingPhoneClasses(missing.into_iter().collect()));
        }

        let mut symbols: HashMap<String, Arc<str>> = HashMap::new();
        let mut entries: HashMap<String, Vec<PhonemeSequence>> = HashMap::new();
        for (key, raw, line) in exact.into_iter().chain(stripped) {
            let mut phones = Vec::with_capacity(raw.len());
            let mut bad = None;
            for (symbol, stress) in raw {
                let class = table.classify(&symbol).expect("coverage checked above");
                if stress.is_some() && !class.is_vowel() {
                    bad = Some(format!("stress digit on consonant {symbol:?}"));
                    break;
                }
                let symbol = symbols
                    .entry(symbol)
                    .or_insert_with_key(|s| Arc::from(s.as_str()))
                    .clone();
                phones.push(Phone {
                    symbol,
                    class,
                    stress,
                });
            }
            if let Some(reason) = bad {
                report.skipped.push((line, reason));
                continue;
            }
            report.pronunciations += 1;
            entries
                .entry(key.clone())
                .or_default()
                .push(PhonemeSequence {
                    word: key,
                    phones,
                    source: Source::Lexicon,
                });
        }
        report.skipped.sort();
        report.words = entries.len();
        Ok(Self {
            entries,
            table,
            report,
        })
    }

    pub fn report(&self) -> &LoadReport {
        &self.report
    }

    pub fn class_table(&self) -> &ClassTable {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(&normalize(word))
    }

    /// All pronunciations of a word, default first.
    pub fn variants(&self, word: &str) -> Option<&[PhonemeSequence]> {
        self.entries.get(&normalize(word)).map(Vec::as_slice)
    }

    /// Iterates over (normalized word, pronunciations) in unspecified order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[PhonemeSequence])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Sorted headwords, for deterministic traversal.
    pub fn words(&self) -> Vec<&str> {
        let mut words: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        words.sort_unstable();
        words
    }

    /// Default pronunciation, falling back to the orthographic heuristic.
    pub fn phonemize(&self, word: &str) -> Result<PhonemeSequence> {
        self.phonemize_with(word, true)
    }

    pub fn phonemize_with(&self, word: &str, allow_fallback: bool) -> Result<PhonemeSequence> {
        let key = normalize(word);
        if key.is_empty() {
            return Err(Error::EmptyWord(word.to_string()));
        }
        match self.entries.get(&key) {
            Some(variants) => Ok(variants[0].clone()),
            None if allow_fallback => Ok(fallback_phonemize(&key)),
            None => Err(Error::OutOfVocabulary(key)),
        }
    }
}

/// Lowercases and strips leading and trailing non-alphanumeric characters.
/// Internal punctuation, apostrophes included, is kept.
pub fn normalize(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Letter-based pronunciation for words missing from the lexicon.
///
/// Runs of the same letter collapse to one. `a e i o u` are short vowels,
/// `y` is a short vowel only with a consonant letter on both sides, every
/// other alphanumeric is a consonant, and anything else is ignored.
pub fn fallback_phonemize(word: &str) -> PhonemeSequence {
    let mut letters: Vec<char> = Vec::with_capacity(word.len());
    for c in word.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() && letters.last() != Some(&c) {
            letters.push(c);
        }
    }
    let is_plain_vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u');
    let is_consonant_letter =
        |c: Option<&char>| matches!(c, Some(&c) if !is_plain_vowel(c) && c != 'y');

    let phones = letters
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let vowel = is_plain_vowel(c)
                || (c == 'y'
                    && i > 0
                    && is_consonant_letter(letters.get(i - 1))
                    && is_consonant_letter(letters.get(i + 1)));
            let symbol: String = c.to_uppercase().collect();
            Phone {
                symbol: Arc::from(symbol),
                class: if vowel {
                    PhoneClass::ShortVowel
                } else {
                    PhoneClass::Consonant
                },
                stress: None,
            }
        })
        .collect();
    PhonemeSequence {
        word: word.to_string(),
        phones,
        source: Source::Fallback,
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })
}
