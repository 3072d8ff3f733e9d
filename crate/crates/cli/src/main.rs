mod config;

use std::borrow::Cow;
use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use poembeat::corpus::{self, ClassifierHook, Filter, FilterThresholds, SplitManifest};
use poembeat::filler::{self, FillOptions, FreqTable, Variants};
use poembeat::masker::{self, DatasetConfig, DatasetRecord, Markers};
use poembeat::metrics::{self, ScoreOptions};
use poembeat::phonolex::ClassTable;
use poembeat::{patterns, BeatMode, ErrorClass, Lexicon, PatternKind};

use config::{CliConfig, FileConfig};

/// Beat patterns for English verse: phonemize words, build beat-conditioned
/// infilling datasets, fill patterns from the lexicon and score generators.
#[derive(Debug, Parser)]
#[command(name = "poembeat", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML file with default settings; flags and environment win over it.
    #[arg(long, global = true, env = "POEMBEAT_CONFIG")]
    config: Option<PathBuf>,

    /// Pronouncing dictionary (`WORD  PH1 PH2 ...`). Defaults to the bundled CMU dictionary.
    #[arg(long, global = true, env = "POEMBEAT_LEXICON")]
    lexicon: Option<PathBuf>,

    /// Phone classification table (`SYMBOL C|SV|LV|DIPH`). Defaults to the bundled table.
    #[arg(long, global = true, env = "POEMBEAT_CLASSES")]
    classes: Option<PathBuf>,

    /// Beat placement: onset or nucleus.
    #[arg(long, global = true, env = "POEMBEAT_MODE")]
    mode: Option<String>,

    /// Pattern kind written into datasets: beat or cv.
    #[arg(long, global = true, env = "POEMBEAT_KIND")]
    kind: Option<String>,

    /// Seed for every random choice.
    #[arg(long, global = true, env = "POEMBEAT_SEED")]
    seed: Option<u64>,

    /// Share of verses assigned to the evaluation split.
    #[arg(long, global = true, env = "POEMBEAT_EVAL_FRACTION")]
    eval_fraction: Option<f64>,

    /// Marker strings as OPEN,CLOSE,TARGET.
    #[arg(long, global = true, env = "POEMBEAT_MARKERS")]
    markers: Option<String>,

    /// Word frequencies (`word<TAB>count`) used to rank fill candidates.
    #[arg(long, global = true, env = "POEMBEAT_FREQ_TABLE")]
    freq_table: Option<PathBuf>,

    /// Coherence scorer command (run through `sh -c`).
    #[arg(long, global = true, env = "POEMBEAT_SCORER_CMD")]
    scorer_cmd: Option<String>,

    /// Language classifier command for ingest (run through `sh -c`).
    #[arg(long, global = true, env = "POEMBEAT_CLASSIFIER_CMD")]
    classifier_cmd: Option<String>,

    /// Treat words missing from the lexicon as errors instead of guessing.
    #[arg(long, global = true, env = "POEMBEAT_NO_FALLBACK")]
    no_fallback: bool,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "POEMBEAT_WORKERS")]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Print phones, CV and beat patterns for words (arguments or stdin).
    Phonemize { words: Vec<String> },
    /// Filter a verse corpus and split it into train and eval sets.
    Ingest {
        /// UTF-8 text, one verse per line.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long)]
        min_tokens: Option<usize>,
        #[arg(long)]
        max_tokens: Option<usize>,
        #[arg(long)]
        max_foreign_fraction: Option<f64>,
        #[arg(long)]
        tokens_per_stopword: Option<usize>,
    },
    /// Mask one span per verse and write train/eval JSON Lines plus a manifest.
    BuildDataset {
        /// Verses file, one per line.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Find words whose beat patterns spell out a target pattern.
    Fill {
        /// Target beat pattern; spaces are ignored.
        #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
        pattern: Option<String>,
        /// Fill every record of a beat dataset and write an outputs file.
        #[arg(long, requires = "output")]
        dataset: Option<PathBuf>,
        /// Outputs file for --dataset.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Number of candidates (per record with --dataset: the best one is used).
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Most words per candidate; defaults to the number of beats.
        #[arg(long)]
        max_words: Option<usize>,
        /// Bound on enumerated segmentations.
        #[arg(long, default_value_t = 10_000)]
        max_segmentations: usize,
        /// Also use alternate pronunciations.
        #[arg(long)]
        all_variants: bool,
    },
    /// Score an outputs file for beat alignment and, optionally, coherence.
    Eval {
        /// JSON Lines with expected_pattern, generated_text, kind, mode.
        #[arg(long)]
        outputs: PathBuf,
        /// Report path; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn classify(error: anyhow::Error) -> Failure {
    let code = error
        .chain()
        .find_map(|e| {
            if let Some(e) = e.downcast_ref::<poembeat::Error>() {
                return Some(match e.class() {
                    ErrorClass::Usage => 1,
                    ErrorClass::Data => 2,
                    ErrorClass::Environment => 3,
                });
            }
            e.downcast_ref::<io::Error>().map(|_| 3)
        })
        .unwrap_or(1);
    Failure { code, error }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let f = classify(e);
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn effective_config(global: &GlobalArgs) -> Result<CliConfig> {
    let mut cfg = CliConfig::default();
    if let Some(path) = &global.config {
        cfg.apply_file(FileConfig::load(path)?)?;
    }
    if let Some(v) = &global.lexicon {
        cfg.lexicon = Some(v.clone());
    }
    if let Some(v) = &global.classes {
        cfg.classes = Some(v.clone());
    }
    if let Some(v) = &global.mode {
        cfg.mode = v.parse()?;
    }
    if let Some(v) = &global.kind {
        cfg.kind = v.parse()?;
    }
    if let Some(v) = global.seed {
        cfg.seed = v;
    }
    if let Some(v) = global.eval_fraction {
        cfg.eval_fraction = v;
    }
    if let Some(v) = &global.markers {
        cfg.markers = Markers::parse(v)?;
    }
    if let Some(v) = &global.freq_table {
        cfg.freq_table = Some(v.clone());
    }
    if let Some(v) = &global.scorer_cmd {
        cfg.scorer_cmd = Some(v.clone());
    }
    if let Some(v) = &global.classifier_cmd {
        cfg.classifier_cmd = Some(v.clone());
    }
    if global.no_fallback {
        cfg.allow_fallback = false;
    }
    if let Some(v) = global.workers {
        cfg.workers = Some(v);
    }
    Ok(cfg)
}

fn load_lexicon(cfg: &CliConfig) -> Result<Cow<'static, Lexicon>> {
    match (&cfg.lexicon, &cfg.classes) {
        (None, None) => Ok(Cow::Borrowed(Lexicon::bundled())),
        (None, Some(_)) => bail!("--classes needs --lexicon"),
        (Some(dict), classes) => {
            let table = match classes {
                Some(path) => ClassTable::load(path)?,
                None => ClassTable::bundled(),
            };
            let text = fs::read_to_string(dict).map_err(|source| poembeat::Error::Read {
                path: dict.clone(),
                source,
            })?;
            let lexicon = Lexicon::from_text(&text, table)?;
            let skipped = &lexicon.report().skipped;
            if !skipped.is_empty() {
                eprintln!(
                    "{}: skipped {} malformed line(s), first at line {}",
                    dict.display(),
                    skipped.len(),
                    skipped[0].0
                );
            }
            Ok(Cow::Owned(lexicon))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = effective_config(&cli.global)?;
    match cli.command {
        Cmd::Phonemize { words } => phonemize(&cfg, &words),
        Cmd::Ingest {
            input,
            output_dir,
            min_tokens,
            max_tokens,
            max_foreign_fraction,
            tokens_per_stopword,
        } => {
            let th = &mut cfg.thresholds;
            th.min_tokens = min_tokens.unwrap_or(th.min_tokens);
            th.max_tokens = max_tokens.unwrap_or(th.max_tokens);
            th.max_foreign_fraction = max_foreign_fraction.unwrap_or(th.max_foreign_fraction);
            th.tokens_per_stopword = tokens_per_stopword.unwrap_or(th.tokens_per_stopword);
            ingest(&cfg, &input, &output_dir)
        }
        Cmd::BuildDataset { input, output_dir } => build_dataset(&cfg, &input, &output_dir),
        Cmd::Fill {
            pattern,
            dataset,
            output,
            k,
            max_words,
            max_segmentations,
            all_variants,
        } => {
            let opts = FillOptions {
                max_words,
                max_segmentations,
                variants: if all_variants {
                    Variants::All
                } else {
                    Variants::DefaultOnly
                },
            };
            match (pattern, dataset, output) {
                (Some(p), _, _) => fill_pattern(&cfg, &p, k, &opts),
                (None, Some(d), Some(o)) => fill_dataset(&cfg, &d, &o, k, &opts),
                _ => bail!("fill needs --pattern or --dataset with --output"),
            }
        }
        Cmd::Eval { outputs, report } => eval(&cfg, &outputs, report.as_deref()),
    }
}

fn phonemize(cfg: &CliConfig, words: &[String]) -> Result<()> {
    let lexicon = load_lexicon(cfg)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut emit = |token: &str| -> Result<()> {
        if poembeat::normalize(token).is_empty() {
            return Ok(());
        }
        let seq = lexicon.phonemize_with(token, cfg.allow_fallback)?;
        let phones: Vec<String> = seq.phones.iter().map(ToString::to_string).collect();
        let source = match seq.source {
            poembeat::Source::Lexicon => "lexicon",
            poembeat::Source::Fallback => "fallback",
        };
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            seq.word,
            source,
            phones.join(" "),
            poembeat::cv_of(&seq),
            poembeat::beat_of(&seq, cfg.mode)
        )?;
        Ok(())
    };
    if words.is_empty() {
        for line in io::stdin().lock().lines() {
            for token in line?.split_whitespace() {
                emit(token)?;
            }
        }
    } else {
        for token in words.iter().flat_map(|w| w.split_whitespace()) {
            emit(token)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct IngestManifest {
    toolkit_version: &'static str,
    input_lines: usize,
    retained: usize,
    thresholds: FilterThresholds,
    classifier_cmd: Option<String>,
    split: SplitManifest,
    effective_config: serde_json::Value,
}

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|source| poembeat::Error::Read {
            path: path.to_path_buf(),
            source,
        })
        .map_err(Into::into)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)
        .map_err(|source| poembeat::Error::Write {
            path: path.to_path_buf(),
            source,
        })
        .map_err(Into::into)
}

fn ingest(cfg: &CliConfig, input: &Path, output_dir: &Path) -> Result<()> {
    let text = read_input(input)?;
    let mut filters = cfg.thresholds.builtin_filters();
    if let Some(cmd) = &cfg.classifier_cmd {
        filters.push(Filter::Hook(ClassifierHook::new(cmd.clone())));
    }
    let input_lines = text.lines().count();
    let cleaned = corpus::clean(text.lines(), &filters)?;
    let join = |verses: &[corpus::Verse]| -> String {
        verses
            .iter()
            .flat_map(|v| [v.text.as_str(), "\n"])
            .collect()
    };
    let retained = join(&cleaned.verses);
    let count = cleaned.verses.len();
    let split = corpus::split_verses(cleaned.verses, cfg.seed, cfg.eval_fraction)?;
    let mut manifest = split.manifest;
    manifest.filter_stats = cleaned.stats;

    fs::create_dir_all(output_dir).map_err(|source| poembeat::Error::Write {
        path: output_dir.to_path_buf(),
        source,
    })?;
    write_file(&output_dir.join("verses.txt"), &retained)?;
    write_file(&output_dir.join("train.txt"), &join(&split.train))?;
    write_file(&output_dir.join("eval.txt"), &join(&split.eval))?;
    let manifest = IngestManifest {
        toolkit_version: env!("CARGO_PKG_VERSION"),
        input_lines,
        retained: count,
        thresholds: cfg.thresholds,
        classifier_cmd: cfg.classifier_cmd.clone(),
        split: manifest,
        effective_config: cfg.echo(),
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    write_file(&output_dir.join("manifest.json"), &json)?;
    eprintln!(
        "retained {count} of {input_lines} line(s): {} train, {} eval",
        manifest.split.train_count, manifest.split.eval_count
    );
    Ok(())
}

fn build_dataset(cfg: &CliConfig, input: &Path, output_dir: &Path) -> Result<()> {
    let lexicon = load_lexicon(cfg)?;
    let verses = corpus::read_verses(input)?;
    let config = DatasetConfig {
        kind: cfg.kind,
        mode: cfg.mode,
        markers: cfg.markers.clone(),
        seed: cfg.seed,
        eval_fraction: cfg.eval_fraction,
        allow_fallback: cfg.allow_fallback,
        workers: cfg.workers,
    };
    let manifest = masker::build_dataset(&lexicon, verses, &config, output_dir, Some(cfg.echo()))?;
    eprintln!(
        "wrote {} train and {} eval example(s); skipped {}",
        manifest.train_examples,
        manifest.eval_examples,
        manifest.train_skipped.total + manifest.eval_skipped.total
    );
    Ok(())
}

fn load_index(cfg: &CliConfig) -> Result<filler::BeatIndex> {
    let lexicon = load_lexicon(cfg)?;
    let freq = cfg.freq_table.as_deref().map(FreqTable::load).transpose()?;
    Ok(filler::build_index(&lexicon, freq.as_ref(), cfg.mode))
}

#[derive(Debug, Serialize)]
struct CandidateLine<'a> {
    text: String,
    words: &'a [String],
    score: f64,
    segmentation: &'a [usize],
    variants: &'a [usize],
}

fn fill_pattern(cfg: &CliConfig, pattern: &str, k: usize, opts: &FillOptions) -> Result<()> {
    let target = patterns::parse_pattern(pattern, PatternKind::Beat)?;
    if target.is_empty() {
        bail!("pattern is empty");
    }
    let index = load_index(cfg)?;
    let result = filler::fill(&target, &index, k, opts);
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for c in &result.candidates {
        let line = CandidateLine {
            text: c.words.join(" "),
            words: &c.words,
            score: c.score,
            segmentation: &c.segmentation,
            variants: &c.variants,
        };
        serde_json::to_writer(&mut out, &line)?;
        writeln!(out)?;
    }
    out.flush()?;
    if result.truncated {
        eprintln!(
            "segmentation bound reached after {} segmentation(s); results may be incomplete",
            result.segmentations
        );
    }
    if result.candidates.is_empty() {
        eprintln!("no word sequence matches {target}");
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct OutputLine<'a> {
    expected_pattern: &'a str,
    generated_text: String,
    kind: PatternKind,
    mode: BeatMode,
    input: &'a str,
    target: &'a str,
    source_index: usize,
}

fn fill_dataset(
    cfg: &CliConfig,
    dataset: &Path,
    output: &Path,
    k: usize,
    opts: &FillOptions,
) -> Result<()> {
    let text = read_input(dataset)?;
    let index = load_index(cfg)?;
    let mut lines = String::new();
    let mut unsatisfied = 0;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord =
            serde_json::from_str(line).map_err(|e| poembeat::Error::Format {
                path: dataset.display().to_string(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        if rec.kind != PatternKind::Beat {
            return Err(poembeat::Error::Invalid(format!(
                "{}:{}: fill only handles beat datasets",
                dataset.display(),
                idx + 1
            ))
            .into());
        }
        if rec.mode != index.mode() {
            return Err(poembeat::Error::Invalid(format!(
                "{}:{}: dataset mode {} differs from --mode {}",
                dataset.display(),
                idx + 1,
                rec.mode,
                index.mode()
            ))
            .into());
        }
        let result = filler::fill(&rec.pattern, &index, k.max(1), opts);
        let Some(best) = result.candidates.first() else {
            unsatisfied += 1;
            continue;
        };
        let out = OutputLine {
            expected_pattern: &rec.pattern,
            generated_text: best.words.join(" "),
            kind: rec.kind,
            mode: rec.mode,
            input: &rec.input,
            target: &rec.target,
            source_index: rec.source_index,
        };
        lines.push_str(&serde_json::to_string(&out)?);
        lines.push('\n');
    }
    write_file(output, &lines)?;
    if unsatisfied > 0 {
        eprintln!("{unsatisfied} record(s) had no matching word sequence and were left out");
    }
    Ok(())
}

fn eval(cfg: &CliConfig, outputs: &Path, report_path: Option<&Path>) -> Result<()> {
    let lexicon = load_lexicon(cfg)?;
    let text = read_input(outputs)?;
    let opts = ScoreOptions {
        allow_fallback: cfg.allow_fallback,
    };
    let mut report = metrics::score_outputs(&lexicon, text.lines(), opts);
    match &cfg.scorer_cmd {
        Some(cmd) => metrics::attach_coherence(&mut report, cmd, &cfg.markers)
            .context("coherence scoring failed")?,
        None => report.coherence_note = Some("no scorer configured".to_string()),
    }
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    match report_path {
        Some(path) => write_file(path, &json)?,
        None => io::stdout().write_all(json.as_bytes())?,
    }
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    eprintln!(
        "n={} scored={} exact_accuracy={} mean_lev_similarity={} mean_coherence={} malformed={}",
        report.n,
        report.scored,
        fmt(report.exact_accuracy),
        fmt(report.mean_lev_similarity),
        fmt(report.mean_coherence),
        report.malformed_lines.len()
    );
    Ok(())
}
