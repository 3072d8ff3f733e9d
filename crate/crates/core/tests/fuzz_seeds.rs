//! Replays the checked-in fuzz corpus through the fuzz checks on stable.

#[allow(dead_code)]
#[path = "../../../fuzz/src/lib.rs"]
mod checks;

use std::fs;
use std::path::Path;

fn replay(target: &str, check: fn(&str)) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap_or_else(|e| panic!("{}: {e}", dir.display())) {
        let bytes = fs::read(entry.unwrap().path()).unwrap();
        if let Ok(text) = std::str::from_utf8(&bytes) {
            check(text);
        }
        seen += 1;
    }
    assert!(seen > 0, "no seeds for {target}");
}

#[test]
fn dict_line() {
    replay("dict_line", checks::dict_line);
}

#[test]
fn lexicon_text() {
    replay("lexicon_text", checks::lexicon_text);
}

#[test]
fn class_table() {
    replay("class_table", checks::class_table);
}

#[test]
fn freq_table() {
    replay("freq_table", checks::freq_table);
}

#[test]
fn pattern() {
    replay("pattern", checks::pattern);
}

#[test]
fn verse() {
    replay("verse", checks::verse);
}

#[test]
fn output_record() {
    replay("output_record", checks::output_record);
}

#[test]
fn scorer_response() {
    replay("scorer_response", checks::scorer_response);
}

#[test]
fn markers() {
    replay("markers", checks::markers);
}

mod mutated {
    use super::checks;
    use proptest::prelude::*;
    use std::fs;
    use std::path::Path;
    use std::sync::OnceLock;

    type Check = (&'static str, fn(&str));

    const TARGETS: [Check; 9] = [
        ("dict_line", checks::dict_line),
        ("lexicon_text", checks::lexicon_text),
        ("class_table", checks::class_table),
        ("freq_table", checks::freq_table),
        ("pattern", checks::pattern),
        ("verse", checks::verse),
        ("output_record", checks::output_record),
        ("scorer_response", checks::scorer_response),
        ("markers", checks::markers),
    ];

    fn seeds() -> &'static [(usize, String)] {
        static SEEDS: OnceLock<Vec<(usize, String)>> = OnceLock::new();
        SEEDS.get_or_init(load)
    }

    fn load() -> Vec<(usize, String)> {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
        let mut out = Vec::new();
        for (i, (name, _)) in TARGETS.iter().enumerate() {
            let mut paths: Vec<_> = fs::read_dir(root.join(name))
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            paths.sort();
            for p in paths {
                out.push((i, fs::read_to_string(p).unwrap()));
            }
        }
        out
    }

    fn splice(seed: &str, at: usize, cut: usize, insert: &str) -> String {
        let chars: Vec<char> = seed.chars().collect();
        let at = at.min(chars.len());
        let end = (at + cut).min(chars.len());
        chars[..at]
            .iter()
            .chain(insert.chars().collect::<Vec<_>>().iter())
            .chain(&chars[end..])
            .collect()
    }

    proptest! {
        #[test]
        fn checks_hold_on_mutated_seeds(
            pick in any::<prop::sample::Index>(),
            at in 0usize..64,
            cut in 0usize..4,
            insert in "[ \t\n,01CV⟦⟧E<>()'A-Za-z0-9.-]{0,6}|\\PC{0,3}",
        ) {
            let all = seeds();
            let (target, seed) = &all[pick.index(all.len())];
            TARGETS[*target].1(&splice(seed, at, cut, &insert));
        }

        #[test]
        fn checks_hold_on_arbitrary_text(target in 0usize..9, text in "\\PC{0,40}") {
            TARGETS[target].1(&text);
        }
    }
}
