//! Pipeline configuration: one TOML or JSON file, overridable from the command
//! line. Relative paths are resolved against the file's directory on load.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::DEFAULT_REJECT_THRESHOLD;
use crate::error::{Error, Result};
use crate::lang::LanguageId;
use crate::noising::{DictNoiseConfig, NoiseConfig};
use crate::sampler::SamplerConfig;
use crate::tokenizer::FRAMING_LEN;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonoSource {
    pub path: PathBuf,
    pub lang: LanguageId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BitextSource {
    pub path: PathBuf,
    pub src: LanguageId,
    pub tgt: LanguageId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub reject_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dictionary_dir: Option<PathBuf>,
    /// Vocabulary file: written by `build-vocab`, read by `emit` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vocab: Option<PathBuf>,
    pub mono: Vec<MonoSource>,
    pub bitext: Vec<BitextSource>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            reject_threshold: DEFAULT_REJECT_THRESHOLD,
            max_pairs: None,
            dictionary_dir: None,
            vocab: None,
            mono: Vec::new(),
            bitext: Vec::new(),
        }
    }
}

// Scalars come before tables so the struct serializes to valid TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Records to emit.
    pub records: usize,
    pub max_len: usize,
    pub token_budget: usize,
    pub vocab_size: usize,
    pub trace: bool,
    pub corpus: CorpusConfig,
    pub dict_noise: DictNoiseConfig,
    pub noise: NoiseConfig,
    pub sampler: SamplerConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            records: 1000,
            max_len: 256,
            token_budget: 4096,
            vocab_size: 8192,
            trace: false,
            corpus: CorpusConfig::default(),
            dict_noise: DictNoiseConfig::default(),
            noise: NoiseConfig::default(),
            sampler: SamplerConfig::default(),
        }
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

impl PipelineConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes to JSON")
    }

    /// Reads `path` (JSON if the extension says so, TOML otherwise) and makes
    /// its relative paths absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = if is_json(path) {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        let base = std::path::absolute(base).map_err(|e| Error::io(base, e))?;
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let c = &mut self.corpus;
        c.mono.iter_mut().for_each(|m| fix(&mut m.path));
        c.bitext.iter_mut().for_each(|b| fix(&mut b.path));
        c.dictionary_dir.iter_mut().for_each(fix);
        c.vocab.iter_mut().for_each(fix);
    }

    /// Checks everything that does not need the corpus. An empty dictionary
    /// noise language list is allowed here; it is filled from the corpus.
    pub fn validate(&self) -> Result<()> {
        if self.records == 0 {
            return Err(Error::Config("records must be positive".into()));
        }
        if self.max_len <= FRAMING_LEN {
            return Err(Error::Config(format!("max_len must exceed {FRAMING_LEN}")));
        }
        if self.token_budget < 2 * self.max_len {
            return Err(Error::Config(format!(
                "token_budget {} is below the largest possible record ({} tokens)",
                self.token_budget,
                2 * self.max_len
            )));
        }
        if !(0.0..=1.0).contains(&self.corpus.reject_threshold) {
            return Err(Error::Config("reject_threshold must be within [0, 1]".into()));
        }
        if self.corpus.max_pairs == Some(0) {
            return Err(Error::Config("max_pairs must be positive".into()));
        }
        if self.corpus.mono.is_empty() {
            return Err(Error::Config("no monolingual shards configured".into()));
        }
        if !self.dict_noise.languages.is_empty() {
            self.dict_noise.validate()?;
        } else if !(0.0..=1.0).contains(&self.dict_noise.p_r) {
            return Err(Error::Config(format!("p_r = {} is outside [0, 1]", self.dict_noise.p_r)));
        }
        self.noise.validate()?;
        self.sampler.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::lang;
    use crate::sampler::Task;

    fn sample() -> PipelineConfig {
        let mut cfg = PipelineConfig {
            seed: 17,
            trace: true,
            ..Default::default()
        };
        cfg.corpus.max_pairs = Some(100);
        cfg.corpus.dictionary_dir = Some("dict".into());
        cfg.corpus.mono = vec![MonoSource {
            path: "mono/en.txt".into(),
            lang: lang("en"),
        }];
        cfg.corpus.bitext = vec![BitextSource {
            path: "bitext/en-fr.tsv".into(),
            src: lang("en"),
            tgt: lang("fr"),
        }];
        cfg.dict_noise.languages = vec![lang("fr"), lang("de")];
        cfg.sampler.tasks = vec![Task::Mono, Task::Bitext];
        cfg
    }

    #[test]
    fn round_trips() {
        let cfg = sample();
        let toml = cfg.to_toml();
        assert_eq!(PipelineConfig::from_toml(&toml).unwrap(), cfg);
        assert_eq!(PipelineConfig::from_toml(&toml).unwrap().to_toml(), toml);
        assert_eq!(PipelineConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn defaults_fill_missing_keys() {
        let cfg = PipelineConfig::from_toml("[[corpus.mono]]\npath = \"a.txt\"\nlang = \"en\"\n").unwrap();
        assert_eq!(cfg.dict_noise.p_r, 0.4);
        assert_eq!(cfg.noise, NoiseConfig::default());
        assert_eq!((cfg.sampler.alpha_mono, cfg.sampler.alpha_bitext, cfg.sampler.alpha_task), (0.5, 0.3, 0.3));
        assert_eq!(cfg.max_len, 256);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml("sede = 3\n").is_err());
        assert!(PipelineConfig::from_toml("[noise]\nmask = 0.3\n").is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = sample();
        cfg.validate().unwrap();
        cfg.token_budget = cfg.max_len;
        assert!(cfg.validate().is_err());
        let mut cfg = sample();
        cfg.noise.mask_ratio = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = sample();
        cfg.corpus.mono.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn paths_resolve_against_base() {
        let mut cfg = sample();
        cfg.corpus.vocab = Some("/abs/vocab.json".into());
        cfg.resolve_paths(Path::new("/data/run"));
        assert_eq!(cfg.corpus.mono[0].path, Path::new("/data/run/mono/en.txt"));
        assert_eq!(cfg.corpus.dictionary_dir.as_deref(), Some(Path::new("/data/run/dict")));
        assert_eq!(cfg.corpus.vocab.as_deref(), Some(Path::new("/abs/vocab.json")));
    }
}
