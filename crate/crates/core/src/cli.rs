//! Command-line front end. Flags override the config file.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::corpus::CorpusManifest;
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::pipeline::{self, dict_languages, Corpus, Prepared};
use crate::rng::Rng;
use crate::sampler::{empirical_mix, EmpiricalMix, MixPlan, Task};
use crate::tokenizer::{build_vocab, corpus_sentences, unk_stats};
use crate::verify;

#[derive(Debug, Parser)]
#[command(name = "polyglot-pretrain", version, about = "Multilingual denoising pretraining data pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Pipeline config (TOML, or JSON by extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Keep per-record noise traces in emitted records.
    #[arg(long, global = true)]
    pub trace: bool,
    /// Restrict the task mix, e.g. `--tasks mono,bitext`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub tasks: Option<Vec<Task>>,
    /// Keep at most N pairs per bitext file.
    #[arg(long, global = true)]
    pub max_pairs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the vocabulary and write it as JSON.
    BuildVocab {
        /// Output file; defaults to `corpus.vocab` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the sampling plan and corpus statistics as JSON.
    Stats {
        /// Add Monte-Carlo frequencies from at least N draws per distribution.
        #[arg(long, value_name = "N")]
        empirical: Option<u64>,
    },
    /// Emit batches, vocabulary and manifest into a directory.
    Emit {
        #[arg(long)]
        out: PathBuf,
        /// Records to emit; overrides `records` in the config.
        #[arg(long)]
        records: Option<usize>,
    },
    /// Re-check an emission directory.
    Verify {
        dir: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
}

impl GlobalArgs {
    fn exec(&self) -> Exec {
        if self.jobs == 1 {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    fn load_config(&self) -> Result<PipelineConfig> {
        let path = self
            .config
            .as_deref()
            .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
        let mut cfg = PipelineConfig::load(path)?;
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.trace {
            cfg.trace = true;
        }
        if let Some(tasks) = &self.tasks {
            cfg.sampler.tasks = tasks.clone();
        }
        if self.max_pairs.is_some() {
            cfg.corpus.max_pairs = self.max_pairs;
        }
    }
}

#[derive(Serialize)]
struct StatsReport {
    corpus: CorpusManifest,
    #[serde(skip_serializing_if = "Option::is_none")]
    empirical: Option<EmpiricalMix>,
    plan: MixPlan,
    vocab: VocabStats,
}

#[derive(Serialize)]
struct VocabStats {
    size: usize,
    tokens: u64,
    unk: u64,
    unk_rate: f64,
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let g = &cli.global;
    par::with_jobs(g.jobs, || match &cli.command {
        Command::BuildVocab { out } => build_vocab_cmd(g, out.as_deref()),
        Command::Stats { empirical } => stats_cmd(g, *empirical),
        Command::Emit { out, records } => emit_cmd(g, out, *records),
        Command::Verify { dir, json } => verify_cmd(g, dir, *json),
    })
}

fn build_vocab_cmd(g: &GlobalArgs, out: Option<&Path>) -> Result<i32> {
    let cfg = g.load_config()?;
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.corpus.vocab.clone())
        .ok_or_else(|| Error::Config("no output path: pass --out or set corpus.vocab".into()))?;
    let exec = g.exec();
    let extra = cfg.dict_noise.languages.iter().cloned().collect();
    let corpus = Corpus::load(&cfg.corpus, &extra, exec)?;
    let langs = dict_languages(&cfg, &corpus).into_iter().collect();
    let vocab = build_vocab(&corpus.mono, &corpus.bitext, &langs, cfg.vocab_size, exec)?;
    std::fs::write(&out, vocab.to_json()).map_err(|e| Error::io(&out, e))?;
    eprintln!("wrote {} tokens ({} specials) to {}", vocab.len(), vocab.num_specials(), out.display());
    Ok(0)
}

fn stats_cmd(g: &GlobalArgs, empirical: Option<u64>) -> Result<i32> {
    let cfg = g.load_config()?;
    let exec = g.exec();
    let p = Prepared::load(cfg, exec)?;
    let sentences = corpus_sentences(&p.corpus.mono, &p.corpus.bitext);
    let (unk, tokens) = unk_stats(&p.vocab, &sentences, exec);
    let empirical = match empirical {
        Some(n) => Some(empirical_mix(&p.plan, &p.manifest, Rng::from_seed(p.config.seed).split_named("empirical"), n)?),
        None => None,
    };
    let report = StatsReport {
        corpus: p.manifest.clone(),
        empirical,
        plan: p.plan.clone(),
        vocab: VocabStats {
            size: p.vocab.len(),
            tokens,
            unk,
            unk_rate: if tokens > 0 { unk as f64 / tokens as f64 } else { 0.0 },
        },
    };
    print_stdout(&serde_json::to_string_pretty(&report).expect("stats serialize"));
    Ok(0)
}

fn emit_cmd(g: &GlobalArgs, out: &Path, records: Option<usize>) -> Result<i32> {
    let mut cfg = g.load_config()?;
    if let Some(n) = records {
        cfg.records = n;
        cfg.validate()?;
    }
    let exec = g.exec();
    let p = Prepared::load(cfg, exec)?;
    let summary = pipeline::emit(&p, out, exec)?;
    let m = &summary.manifest;
    let tasks: BTreeMap<String, usize> = m.task_counts.iter().map(|(t, n)| (t.to_string(), *n)).collect();
    eprintln!(
        "emitted {} records, {} tokens, {} batches to {} {:?}",
        m.record_count,
        m.token_count,
        m.batch_count,
        out.display(),
        tasks
    );
    Ok(0)
}

fn verify_cmd(g: &GlobalArgs, dir: &Path, json: bool) -> Result<i32> {
    let report = verify::verify_dir(dir, g.exec())?;
    if json {
        print_stdout(&report.to_json());
    } else {
        print_stdout(report.render().trim_end());
    }
    Ok(if report.passed { 0 } else { 1 })
}

// A closed pipe (e.g. `| head`) is not an error worth a panic.
fn print_stdout(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "p", "--seed", "9", "--trace", "--tasks", "mono,dict", "--max-pairs", "5", "stats",
        ])
        .unwrap();
        let mut cfg = PipelineConfig::default();
        cli.global.apply(&mut cfg);
        assert_eq!(cfg.seed, 9);
        assert!(cfg.trace);
        assert_eq!(cfg.sampler.tasks, [Task::Mono, Task::Dict]);
        assert_eq!(cfg.corpus.max_pairs, Some(5));
        assert!(Cli::try_parse_from(["p", "--tasks", "nope", "stats"]).is_err());
    }
}
