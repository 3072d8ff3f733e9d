//! Alignment and coherence scoring of generated spans.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::corpus::Verse;
use crate::error::{Error, Result};
use crate::masker::Markers;
use crate::patterns::{parse_pattern, span_pattern_with, strip, BeatMode, PatternKind};
use crate::phonolex::Lexicon;

/// Unit-cost edit distance over characters.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if ca == cb {
                diag
            } else {
                1 + diag.min(up).min(row[j])
            };
            diag = up;
        }
    }
    row[b.len()]
}

/// `1 - d(a, b) / max(|a|, |b|)`; two empty patterns are identical.
pub fn lev_similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - edit_distance(a, b) as f64 / longest as f64
}

/// 1 when the patterns match after removing word separators, else 0.
pub fn exact_alignment(expected: &str, generated: &str) -> u8 {
    u8::from(strip(expected) == strip(generated))
}

/// One line of a generator's output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub expected_pattern: String,
    pub generated_text: String,
    pub kind: PatternKind,
    pub mode: BeatMode,
    #[serde(flatten)]
    pub passthrough: Map<String, Value>,
}

/// Decodes and validates one outputs line.
pub fn decode_output_line(line: &str) -> std::result::Result<OutputRecord, String> {
    let rec: OutputRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    parse_pattern(&rec.expected_pattern, rec.kind).map_err(|e| e.to_string())?;
    Ok(rec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Scored,
    Unphonemizable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub expected_pattern: String,
    pub generated_text: String,
    pub generated_pattern: Option<String>,
    pub exact: Option<u8>,
    pub lev_similarity: Option<f64>,
    pub coherence: Option<f64>,
    pub status: RecordStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(flatten)]
    pub passthrough: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Well-formed records, scored or not.
    pub n: usize,
    pub scored: usize,
    pub unphonemizable: usize,
    pub malformed_lines: Vec<(usize, String)>,
    /// Means are `None` when nothing was scored.
    pub exact_accuracy: Option<f64>,
    pub mean_lev_similarity: Option<f64>,
    pub mean_coherence: Option<f64>,
    pub coherence_scored: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coherence_note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scorer_header: Option<String>,
    pub records: Vec<EvalRecord>,
}

#[derive(Debug, Clone, Copy)]
pub struct ScoreOptions {
    pub allow_fallback: bool,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            allow_fallback: true,
        }
    }
}

pub fn score_record(lexicon: &Lexicon, rec: OutputRecord, opts: ScoreOptions) -> EvalRecord {
    let expected = strip(&rec.expected_pattern);
    let words = Verse::new(rec.generated_text.as_str(), 0).tokens;
    let derived = span_pattern_with(lexicon, &words, rec.kind, rec.mode, opts.allow_fallback);
    let mut out = EvalRecord {
        expected_pattern: expected,
        generated_text: rec.generated_text,
        generated_pattern: None,
        exact: None,
        lev_similarity: None,
        coherence: None,
        status: RecordStatus::Unphonemizable,
        error: None,
        passthrough: rec.passthrough,
    };
    match derived {
        Ok(span) => {
            let generated = span.stripped();
            out.exact = Some(exact_alignment(&out.expected_pattern, &generated));
            out.lev_similarity = Some(lev_similarity(&out.expected_pattern, &generated));
            out.generated_pattern = Some(generated);
            out.status = RecordStatus::Scored;
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// Scores an outputs file given as lines. Malformed lines are skipped and
/// listed; blank lines are ignored.
pub fn score_outputs<'a, I>(lexicon: &Lexicon, lines: I, opts: ScoreOptions) -> EvalReport
where
    I: IntoIterator<Item = &'a str>,
{
    let mut malformed = Vec::new();
    let mut parsed = Vec::new();
    for (idx, line) in lines.into_iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match decode_output_line(line) {
            Ok(rec) => parsed.push(rec),
            Err(reason) => malformed.push((idx + 1, reason)),
        }
    }
    let records: Vec<EvalRecord> = parsed
        .into_par_iter()
        .map(|rec| score_record(lexicon, rec, opts))
        .collect();
    let mut report = EvalReport {
        malformed_lines: malformed,
        records,
        ..EvalReport::default()
    };
    report.recompute();
    report
}

impl EvalReport {
    /// Refreshes counts and means from `records`.
    pub fn recompute(&mut self) {
        self.n = self.records.len();
        let scored: Vec<&EvalRecord> = self
            .records
            .iter()
            .filter(|r| r.status == RecordStatus::Scored)
            .collect();
        self.scored = scored.len();
        self.unphonemizable = self.n - self.scored;
        self.exact_accuracy = mean(scored.iter().filter_map(|r| r.exact.map(f64::from)));
        self.mean_lev_similarity = mean(scored.iter().filter_map(|r| r.lev_similarity));
        let coherence: Vec<f64> = self.records.iter().filter_map(|r| r.coherence).collect();
        self.coherence_scored = coherence.len();
        self.mean_coherence = mean(coherence.into_iter());
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// A verse with the generated span substituted, located by character
/// offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoherenceRequest {
    pub verse: String,
    pub span_start_char: usize,
    pub span_end_char: usize,
}

/// Builds the scorer request for a record whose passthrough fields carry
/// the masked `input` string.
pub fn coherence_request(record: &EvalRecord, markers: &Markers) -> Option<CoherenceRequest> {
    let input = record.passthrough.get("input")?.as_str()?;
    let open = input.find(&markers.open)?;
    let after_open = open + markers.open.len();
    let close = after_open + input[after_open..].find(&markers.close)? + markers.close.len();
    let prefix = &input[..open];
    let start = prefix.chars().count();
    let end = start + record.generated_text.chars().count();
    Some(CoherenceRequest {
        verse: format!("{prefix}{}{}", record.generated_text, &input[close..]),
        span_start_char: start,
        span_end_char: end,
    })
}

/// Parses one scorer response line.
pub fn parse_scorer_response(line: &str) -> std::result::Result<f64, String> {
    let text = line.trim();
    let value: f64 = text
        .parse()
        .map_err(|_| format!("expected a decimal number, got {text:?}"))?;
    if !value.is_finite() || value < 0.0 {
        return Err(format!(
            "score must be a finite non-negative number, got {text:?}"
        ));
    }
    Ok(value)
}

/// Sequential child process speaking the scorer protocol: one JSON request
/// per line in, one non-negative decimal per line out. A first output line
/// starting with `#` is a header describing the score.
struct ScorerProcess {
    command: String,
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: std::io::Lines<BufReader<ChildStdout>>,
    line_no: usize,
    header: Option<String>,
}

enum Reply {
    Score(f64),
    Eof,
}

impl ScorerProcess {
    fn spawn(command: &str) -> std::io::Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout")).lines();
        Ok(Self {
            command: command.to_string(),
            child,
            stdin,
            stdout,
            line_no: 0,
            header: None,
        })
    }

    fn protocol(&self, message: String) -> Error {
        Error::Protocol {
            command: self.command.clone(),
            message,
        }
    }

    fn ask(&mut self, request: &CoherenceRequest) -> Result<Reply> {
        let mut payload = serde_json::to_string(request).expect("serializable");
        payload.push('\n');
        let sent = match self.stdin.as_mut() {
            Some(stdin) => stdin
                .write_all(payload.as_bytes())
                .and_then(|_| stdin.flush()),
            None => Err(std::io::ErrorKind::BrokenPipe.into()),
        };
        if sent.is_err() {
            // Reading below tells a clean exit from a short answer.
            self.stdin = None;
        }
        loop {
            let Some(line) = self.stdout.next() else {
                return Ok(Reply::Eof);
            };
            let line = line.map_err(|e| self.protocol(format!("reading response: {e}")))?;
            self.line_no += 1;
            if self.line_no == 1 && line.starts_with('#') {
                self.header = Some(line.trim_start_matches('#').trim().to_string());
                continue;
            }
            let value = parse_scorer_response(&line)
                .map_err(|m| self.protocol(format!("response line {}: {m}", self.line_no)))?;
            return Ok(Reply::Score(value));
        }
    }

    fn finish(mut self) -> Option<std::process::ExitStatus> {
        drop(self.stdin.take());
        self.child.wait().ok()
    }
}

/// Fills `coherence` for every scored record that carries an `input`
/// passthrough field, then refreshes the report means.
///
/// A scorer that cannot be started, or that exits without answering the
/// first request, leaves coherence empty and sets `coherence_note`. Invalid
/// or missing answers after that are protocol errors.
pub fn attach_coherence(report: &mut EvalReport, command: &str, markers: &Markers) -> Result<()> {
    let pending: Vec<(usize, CoherenceRequest)> = report
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.status == RecordStatus::Scored)
        .filter_map(|(i, r)| coherence_request(r, markers).map(|q| (i, q)))
        .collect();
    if pending.is_empty() {
        report.coherence_note = Some("no record carries a masked input to score".to_string());
        report.recompute();
        return Ok(());
    }

    let mut scorer = match ScorerProcess::spawn(command) {
        Ok(s) => s,
        Err(e) => {
            report.coherence_note = Some(format!("scorer unavailable: {e}"));
            report.recompute();
            return Ok(());
        }
    };
    let mut scores = Vec::with_capacity(pending.len());
    for (nth, (_, request)) in pending.iter().enumerate() {
        match scorer.ask(request)? {
            Reply::Score(v) => scores.push(v),
            Reply::Eof if nth == 0 => {
                let status = scorer.finish();
                report.coherence_note = Some(match status {
                    Some(s) => format!("scorer unavailable: exited with {s} before answering"),
                    None => "scorer unavailable".to_string(),
                });
                report.recompute();
                return Ok(());
            }
            Reply::Eof => {
                return Err(scorer.protocol(format!(
                    "output ended after {nth} of {} response(s)",
                    pending.len()
                )))
            }
        }
    }
    report.scorer_header = scorer.header.clone();
    scorer.finish();
    for ((idx, _), score) in pending.iter().zip(scores) {
        report.records[*idx].coherence = Some(score);
    }
    report.coherence_note = None;
    report.recompute();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_alignment_examples() {
        assert_eq!(exact_alignment("10100", "10100"), 1);
        assert_eq!(exact_alignment("10100", "10000"), 0);
        assert_eq!(exact_alignment("10 100", "10100"), 1);
    }

    #[test]
    fn lev_examples() {
        assert_eq!(lev_similarity("10100", "10100"), 1.0);
        assert!((lev_similarity("101", "100") - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(lev_similarity("1", ""), 0.0);
        assert_eq!(lev_similarity("", ""), 1.0);
        assert_eq!(edit_distance("10", "10100"), 3);
    }

    #[test]
    fn decode_rejects_bad_records() {
        assert!(decode_output_line("not json").is_err());
        assert!(decode_output_line(
            r#"{"expected_pattern":"10","generated_text":"in","kind":"beat"}"#
        )
        .is_err());
        assert!(decode_output_line(
            r#"{"expected_pattern":"1C","generated_text":"in","kind":"beat","mode":"onset"}"#
        )
        .is_err());
        let rec = decode_output_line(
            r#"{"expected_pattern":"10","generated_text":"in","kind":"beat","mode":"onset","id":7}"#,
        )
        .unwrap();
        assert_eq!(rec.passthrough["id"], 7);
    }

    #[test]
    fn scorer_response_validation() {
        assert_eq!(parse_scorer_response("7.0\n"), Ok(7.0));
        assert!(parse_scorer_response("-1").is_err());
        assert!(parse_scorer_response("NaN").is_err());
        assert!(parse_scorer_response("inf").is_err());
        assert!(parse_scorer_response("seven").is_err());
    }

    #[test]
    fn coherence_request_substitutes_span() {
        let mut passthrough = Map::new();
        passthrough.insert("input".into(), Value::from("I believe ⟦E0⟧ 10 ⟦E1⟧ music"));
        let rec = EvalRecord {
            expected_pattern: "10".into(),
            generated_text: "in".into(),
            generated_pattern: Some("10".into()),
            exact: Some(1),
            lev_similarity: Some(1.0),
            coherence: None,
            status: RecordStatus::Scored,
            error: None,
            passthrough,
        };
        let q = coherence_request(&rec, &Markers::default()).unwrap();
        assert_eq!(q.verse, "I believe in music");
        assert_eq!((q.span_start_char, q.span_end_char), (10, 12));
    }
}
