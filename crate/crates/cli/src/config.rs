//! Effective configuration: defaults, then an optional TOML file, then
//! environment variables (`POEMBEAT_*`), then flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use poembeat::corpus::FilterThresholds;
use poembeat::masker::Markers;
use poembeat::{BeatMode, PatternKind};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub lexicon: Option<PathBuf>,
    pub classes: Option<PathBuf>,
    pub mode: Option<String>,
    pub kind: Option<String>,
    pub markers: Option<String>,
    pub seed: Option<u64>,
    pub eval_fraction: Option<f64>,
    pub freq_table: Option<PathBuf>,
    pub scorer_cmd: Option<String>,
    pub classifier_cmd: Option<String>,
    pub no_fallback: Option<bool>,
    pub workers: Option<usize>,
    pub thresholds: Option<ThresholdFile>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdFile {
    pub min_tokens: Option<usize>,
    pub max_tokens: Option<usize>,
    pub max_foreign_fraction: Option<f64>,
    pub tokens_per_stopword: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Settings shared by every subcommand, after all overrides. Serialized
/// into output manifests.
#[derive(Debug, Clone, Serialize)]
pub struct CliConfig {
    pub lexicon: Option<PathBuf>,
    pub classes: Option<PathBuf>,
    pub mode: BeatMode,
    pub kind: PatternKind,
    pub markers: Markers,
    pub seed: u64,
    pub eval_fraction: f64,
    pub freq_table: Option<PathBuf>,
    pub scorer_cmd: Option<String>,
    pub classifier_cmd: Option<String>,
    pub allow_fallback: bool,
    pub workers: Option<usize>,
    pub thresholds: FilterThresholds,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            lexicon: None,
            classes: None,
            mode: BeatMode::Onset,
            kind: PatternKind::Beat,
            markers: Markers::default(),
            seed: 42,
            eval_fraction: 5194.0 / 1_038_743.0,
            freq_table: None,
            scorer_cmd: None,
            classifier_cmd: None,
            allow_fallback: true,
            workers: None,
            thresholds: FilterThresholds::default(),
        }
    }
}

impl CliConfig {
    pub fn apply_file(&mut self, file: FileConfig) -> Result<()> {
        if let Some(v) = file.lexicon {
            self.lexicon = Some(v);
        }
        if let Some(v) = file.classes {
            self.classes = Some(v);
        }
        if let Some(v) = file.mode {
            self.mode = v.parse()?;
        }
        if let Some(v) = file.kind {
            self.kind = v.parse()?;
        }
        if let Some(v) = file.markers {
            self.markers = Markers::parse(&v)?;
        }
        if let Some(v) = file.seed {
            self.seed = v;
        }
        if let Some(v) = file.eval_fraction {
            self.eval_fraction = v;
        }
        if let Some(v) = file.freq_table {
            self.freq_table = Some(v);
        }
        if let Some(v) = file.scorer_cmd {
            self.scorer_cmd = Some(v);
        }
        if let Some(v) = file.classifier_cmd {
            self.classifier_cmd = Some(v);
        }
        if let Some(v) = file.no_fallback {
            self.allow_fallback = !v;
        }
        if let Some(v) = file.workers {
            self.workers = Some(v);
        }
        if let Some(t) = file.thresholds {
            let th = &mut self.thresholds;
            th.min_tokens = t.min_tokens.unwrap_or(th.min_tokens);
            th.max_tokens = t.max_tokens.unwrap_or(th.max_tokens);
            th.max_foreign_fraction = t.max_foreign_fraction.unwrap_or(th.max_foreign_fraction);
            th.tokens_per_stopword = t.tokens_per_stopword.unwrap_or(th.tokens_per_stopword);
        }
        Ok(())
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_override_defaults() {
        let file: FileConfig = toml::from_str(
            r#"
            mode = "nucleus"
            kind = "cv"
            seed = 9
            markers = "<a>,<b>,<c>"
            [thresholds]
            max_tokens = 12
            "#,
        )
        .unwrap();
        let mut cfg = CliConfig::default();
        cfg.apply_file(file).unwrap();
        assert_eq!(cfg.mode, BeatMode::Nucleus);
        assert_eq!(cfg.kind, PatternKind::Cv);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.markers.open, "<a>");
        assert_eq!(cfg.thresholds.max_tokens, 12);
        assert_eq!(cfg.thresholds.min_tokens, 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("sead = 1").is_err());
    }

    #[test]
    fn bad_mode_in_file_fails() {
        let file: FileConfig = toml::from_str(r#"mode = "offbeat""#).unwrap();
        assert!(CliConfig::default().apply_file(file).is_err());
    }
}
