//! Checks run by the fuzz targets. Each takes arbitrary text, feeds it to
//! one parser or decoder and asserts what must hold for anything that
//! parses. The core crate replays the checked-in corpus through these same
//! functions on stable.

use std::sync::OnceLock;

use poembeat::corpus::{verse_text, Verse};
use poembeat::filler::{parse_freq_line, FreqTable};
use poembeat::masker::{make_example, masked_pattern, reconstruct, Markers, SpanChoice};
use poembeat::metrics::{
    decode_output_line, parse_scorer_response, score_record, RecordStatus, ScoreOptions,
};
use poembeat::patterns::{parse_pattern, strip};
use poembeat::phonolex::{parse_dict_line, ClassTable};
use poembeat::{
    beat_of, cv_of, fallback_phonemize, normalize, BeatMode, Lexicon, PatternKind, PhonemeSequence,
};

fn small_lexicon() -> &'static Lexicon {
    static LEX: OnceLock<Lexicon> = OnceLock::new();
    LEX.get_or_init(|| {
        Lexicon::from_text(
            "i AY1\nin IH1 N\nbelieve B IH0 L IY1 V\nmusic M Y UW1 Z IH0 K\nread R IY1 D\nread(2) R EH1 D\n",
            ClassTable::bundled(),
        )
        .expect("small lexicon")
    })
}

fn check_sequence(seq: &PhonemeSequence) {
    let cv = cv_of(seq);
    assert!(cv.as_str().chars().all(|c| c == 'C' || c == 'V'));
    for mode in [BeatMode::Onset, BeatMode::Nucleus] {
        let beat = beat_of(seq, mode);
        assert_eq!(beat.len(), cv.len());
        assert_eq!(beat.beats(), seq.vowel_count());
    }
}

pub fn dict_line(text: &str) {
    for line in text.lines() {
        if let Ok(Some(entry)) = parse_dict_line(line) {
            assert!(!entry.word.is_empty());
            assert!(!entry.phones.is_empty());
            for (symbol, _) in &entry.phones {
                assert!(!symbol.is_empty());
                assert!(symbol.chars().all(|c| c.is_ascii_uppercase()));
            }
        }
    }
}

pub fn lexicon_text(text: &str) {
    let Ok(lex) = Lexicon::from_text(text, ClassTable::bundled()) else {
        return;
    };
    for (word, variants) in lex.iter() {
        assert_eq!(normalize(word), word);
        assert!(!variants.is_empty());
        for seq in variants {
            check_sequence(seq);
        }
        let upper = word.to_uppercase();
        if normalize(&upper) == word {
            assert!(lex.contains(&upper));
        }
    }
}

pub fn class_table(text: &str) {
    if let Ok(table) = ClassTable::parse(text, "fuzz") {
        for token in text.split_whitespace() {
            assert_eq!(table.classify(token), table.classify(token));
        }
    }
}

pub fn freq_table(text: &str) {
    for line in text.lines() {
        if let Ok(Some((word, _))) = parse_freq_line(line) {
            assert!(!word.is_empty());
            assert_eq!(normalize(&word), word);
        }
    }
    if let Ok(table) = FreqTable::parse(text, "fuzz") {
        for token in text.split_whitespace() {
            assert!(table.frequency(&normalize(token)) >= 1);
        }
    }
}

pub fn pattern(text: &str) {
    for kind in [PatternKind::Beat, PatternKind::Cv] {
        if let Ok(stripped) = parse_pattern(text, kind) {
            assert_eq!(stripped, strip(text));
            let ok: &[char] = match kind {
                PatternKind::Beat => &['0', '1'],
                PatternKind::Cv => &['C', 'V'],
            };
            assert!(stripped.chars().all(|c| ok.contains(&c)));
        }
    }
}

pub fn verse(text: &str) {
    let line = verse_text(text);
    assert!(!line.contains('\t'));
    let verse = Verse::new(line, 0);
    assert_eq!(verse.tokens.len(), verse.offsets.len());
    for (tok, range) in verse.tokens.iter().zip(&verse.offsets) {
        assert_eq!(&verse.text[range.clone()], tok);
        let norm = normalize(tok);
        assert!(!norm.is_empty());
        assert_eq!(normalize(&norm), norm);
        let seq = fallback_phonemize(tok);
        assert!(!seq.phones.is_empty());
        check_sequence(&seq);
    }
}

pub fn output_record(text: &str) {
    for line in text.lines() {
        let Ok(rec) = decode_output_line(line) else {
            continue;
        };
        let expected = strip(&rec.expected_pattern);
        let scored = score_record(small_lexicon(), rec, ScoreOptions::default());
        if scored.status == RecordStatus::Scored {
            let generated = scored
                .generated_pattern
                .as_deref()
                .expect("scored record has a pattern");
            assert_eq!(scored.exact == Some(1), generated == expected);
            let lev = scored
                .lev_similarity
                .expect("scored record has a similarity");
            assert!((0.0..=1.0).contains(&lev));
            if scored.exact == Some(1) {
                assert_eq!(lev, 1.0);
            }
        }
    }
}

pub fn scorer_response(text: &str) {
    if let Ok(v) = parse_scorer_response(text) {
        assert!(v.is_finite() && v >= 0.0);
    }
}

/// First line: OPEN,CLOSE,TARGET markers; the rest: a verse.
pub fn markers(text: &str) {
    let (spec, rest) = text.split_once('\n').unwrap_or((text, ""));
    let _ = reconstruct(rest, rest, &Markers::default());
    let _ = masked_pattern(rest, &Markers::default());
    let Ok(markers) = Markers::parse(spec) else {
        return;
    };
    let line = verse_text(rest);
    let verse = Verse::new(line, 0);
    for start in 0..verse.tokens.len() {
        let span = SpanChoice {
            start_word: start,
            length_words: 1,
        };
        let Ok(ex) = make_example(
            small_lexicon(),
            &verse,
            span,
            PatternKind::Beat,
            BeatMode::Onset,
            &markers,
            true,
        ) else {
            continue;
        };
        assert_eq!(
            reconstruct(&ex.input_text, &ex.target_text, &markers).as_deref(),
            Some(line)
        );
        assert_eq!(
            masked_pattern(&ex.input_text, &markers),
            Some(ex.pattern.serialized().as_str())
        );
    }
}
