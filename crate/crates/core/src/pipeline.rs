//! End-to-end emission: load corpora, plan draws, build records in parallel,
//! batch them and write the output directory.
//!
//! Output layout:
//!
//! ```text
//! out/
//!   batch-000000.jsonl   one TrainingRecord per line
//!   ...
//!   vocab.json
//!   manifest.json        counts, hashes, resolved config, plan
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{CorpusConfig, PipelineConfig};
use crate::corpus::{build_manifest, load_bitext, load_dictionary, load_mono, BitextOptions, BitextShard, CorpusManifest, Dictionary, MonoShard};
use crate::error::{Error, Result};
use crate::lang::{Direction, LanguageId};
use crate::par::{self, Exec};
use crate::records::{assemble_batches, pack_bitext, PackedPair, PairFeed, PairItem, RecordBuilder, SourceRef, TrainingRecord, Window};
use crate::rng::Rng;
use crate::sampler::{build_mix_plan, Bucket, EpochCursor, MixPlan, MixStream, Task};
use crate::tokenizer::{build_vocab, tokenize_words, Vocab};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const VOCAB_FILE: &str = "vocab.json";
pub const FORMAT_VERSION: u32 = 1;

pub fn batch_file_name(index: usize) -> String {
    format!("batch-{index:06}.jsonl")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Loaded shards, tokenized, with bucket-to-shard indexes. Shards are sorted
/// by (language or direction, path) so bucket item numbering does not depend
/// on config order.
pub struct Corpus {
    pub mono: Vec<MonoShard>,
    pub bitext: Vec<BitextShard>,
    pub dictionary: Dictionary,
    mono_words: Vec<Vec<Vec<String>>>,
    bitext_words: Vec<Vec<(Vec<String>, Vec<String>)>>,
    // bucket -> (shard, first item index) in bucket order
    lang_shards: BTreeMap<LanguageId, Vec<(usize, usize)>>,
    dir_shards: BTreeMap<Direction, Vec<(usize, usize)>>,
}

impl Corpus {
    pub fn new(mut mono: Vec<MonoShard>, mut bitext: Vec<BitextShard>, dictionary: Dictionary, exec: Exec) -> Self {
        mono.sort_by(|a, b| (&a.lang, &a.source_path).cmp(&(&b.lang, &b.source_path)));
        bitext.sort_by(|a, b| (&a.direction, &a.source_path).cmp(&(&b.direction, &b.source_path)));
        let mono_words = mono
            .iter()
            .map(|s| par::map(exec, &s.sentences, |t| tokenize_words(t)))
            .collect();
        let bitext_words = bitext
            .iter()
            .map(|s| par::map(exec, &s.pairs, |(a, b)| (tokenize_words(a), tokenize_words(b))))
            .collect();
        let mut lang_shards: BTreeMap<LanguageId, Vec<(usize, usize)>> = BTreeMap::new();
        for (i, s) in mono.iter().enumerate() {
            let e = lang_shards.entry(s.lang.clone()).or_default();
            let start = e.last().map_or(0, |&(j, o)| o + mono[j].sentences.len());
            e.push((i, start));
        }
        let mut dir_shards: BTreeMap<Direction, Vec<(usize, usize)>> = BTreeMap::new();
        for (i, s) in bitext.iter().enumerate() {
            let e = dir_shards.entry(s.direction.clone()).or_default();
            let start = e.last().map_or(0, |&(j, o)| o + bitext[j].pairs.len());
            e.push((i, start));
        }
        Corpus {
            mono,
            bitext,
            dictionary,
            mono_words,
            bitext_words,
            lang_shards,
            dir_shards,
        }
    }

    /// Loads every shard named in `cfg`. The dictionary is restricted to
    /// corpus languages plus `extra_langs`.
    pub fn load(cfg: &CorpusConfig, extra_langs: &BTreeSet<LanguageId>, exec: Exec) -> Result<Self> {
        let mono = cfg
            .mono
            .iter()
            .map(|m| load_mono(&m.path, m.lang.clone()))
            .collect::<Result<Vec<_>>>()?;
        let opts = BitextOptions {
            reject_threshold: cfg.reject_threshold,
            max_pairs: cfg.max_pairs,
        };
        let bitext = cfg
            .bitext
            .iter()
            .map(|b| load_bitext(&b.path, b.src.clone(), b.tgt.clone(), opts))
            .collect::<Result<Vec<_>>>()?;
        let mut langs = extra_langs.clone();
        langs.extend(mono.iter().map(|s| s.lang.clone()));
        for b in &bitext {
            langs.insert(b.direction.src.clone());
            langs.insert(b.direction.tgt.clone());
        }
        let dictionary = match &cfg.dictionary_dir {
            Some(dir) => load_dictionary(dir, &langs)?,
            None => Dictionary::new(),
        };
        for b in &bitext {
            if b.rejected > 0 {
                log::warn!("{}: skipped {} malformed lines", b.source_path, b.rejected);
            }
        }
        Ok(Corpus::new(mono, bitext, dictionary, exec))
    }

    pub fn manifest(&self) -> Result<CorpusManifest> {
        build_manifest(&self.mono, &self.bitext, &self.dictionary)
    }

    /// Monolingual languages, sorted.
    pub fn mono_languages(&self) -> Vec<LanguageId> {
        self.lang_shards.keys().cloned().collect()
    }

    fn locate(index: &[(usize, usize)], item: usize) -> (usize, usize) {
        let k = index.partition_point(|&(_, start)| start <= item) - 1;
        let (shard, start) = index[k];
        (shard, item - start)
    }

    /// Maps a bucket item index to its shard and line.
    pub fn mono_ref(&self, lang: &LanguageId, item: usize) -> SourceRef {
        let (shard, line) = Self::locate(&self.lang_shards[lang], item);
        SourceRef { shard, line }
    }

    pub fn bitext_ref(&self, dir: &Direction, item: usize) -> SourceRef {
        let (shard, line) = Self::locate(&self.dir_shards[dir], item);
        SourceRef { shard, line }
    }

    pub fn mono_sentence(&self, at: SourceRef) -> Option<&[String]> {
        self.mono_words.get(at.shard)?.get(at.line).map(Vec::as_slice)
    }

    pub fn bitext_pair(&self, at: SourceRef) -> Option<(&[String], &[String])> {
        let (s, t) = self.bitext_words.get(at.shard)?.get(at.line)?;
        Some((s, t))
    }

    /// Window starting at bucket item `item` of `lang`.
    pub fn window(&self, lang: &LanguageId, item: usize, max_len: usize) -> Window<'_> {
        let at = self.mono_ref(lang, item);
        Window::build(&self.mono[at.shard].lang, at.shard, &self.mono_words[at.shard], at.line, max_len)
    }

    pub fn pair(&self, dir: &Direction, item: usize) -> PairItem<'_> {
        let at = self.bitext_ref(dir, item);
        let (source, target) = &self.bitext_words[at.shard][at.line];
        PairItem {
            direction: &self.bitext[at.shard].direction,
            at,
            source,
            target,
        }
    }
}

/// Dictionary noise languages: the configured list, or every monolingual
/// language when the list is empty.
pub fn dict_languages(cfg: &PipelineConfig, corpus: &Corpus) -> Vec<LanguageId> {
    if cfg.dict_noise.languages.is_empty() {
        corpus.mono_languages()
    } else {
        cfg.dict_noise.languages.clone()
    }
}

/// A config, its corpus and everything derived from them.
pub struct Prepared {
    pub config: PipelineConfig,
    pub corpus: Corpus,
    pub manifest: CorpusManifest,
    pub plan: MixPlan,
    pub vocab: Vocab,
}

impl Prepared {
    /// Loads corpora and builds the plan. The vocabulary is read from the
    /// configured file if it exists, otherwise built from the corpus.
    pub fn load(config: PipelineConfig, exec: Exec) -> Result<Self> {
        let vocab = match &config.corpus.vocab {
            Some(path) if path.exists() => Some(read_vocab(path)?),
            _ => None,
        };
        Self::with_vocab(config, vocab, exec)
    }

    pub fn with_vocab(mut config: PipelineConfig, vocab: Option<Vocab>, exec: Exec) -> Result<Self> {
        config.validate()?;
        let extra: BTreeSet<LanguageId> = config.dict_noise.languages.iter().cloned().collect();
        let corpus = Corpus::load(&config.corpus, &extra, exec)?;
        config.dict_noise.languages = dict_languages(&config, &corpus);
        config.dict_noise.validate()?;
        let manifest = corpus.manifest()?;
        let plan = build_mix_plan(&manifest, &config.sampler)?;
        let vocab = match vocab {
            Some(v) => v,
            None => {
                let extra = config.dict_noise.languages.iter().cloned().collect();
                build_vocab(&corpus.mono, &corpus.bitext, &extra, config.vocab_size, exec)?
            }
        };
        Ok(Prepared {
            config,
            corpus,
            manifest,
            plan,
            vocab,
        })
    }

    pub fn builder(&self) -> RecordBuilder<'_> {
        RecordBuilder {
            vocab: &self.vocab,
            dictionary: &self.corpus.dictionary,
            dict_noise: &self.config.dict_noise,
            noise: &self.config.noise,
            max_len: self.config.max_len,
            trace: self.config.trace,
        }
    }

    pub fn root_rng(&self) -> Rng {
        Rng::from_seed(self.config.seed)
    }

    /// Draws and packs `n` record inputs. Sequential: every draw advances
    /// shared sampler state.
    pub fn plan_records(&self, n: usize) -> Result<Vec<Planned<'_>>> {
        let mut stream = MixStream::new(&self.plan, &self.manifest, self.root_rng().split_named("stream"))?;
        let max_len = self.config.max_len;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let draw = stream.next_draw();
            let planned = match (draw.task, &draw.bucket) {
                (Task::Mono, Bucket::Lang(l)) => Planned::Mono(self.corpus.window(l, draw.item, max_len)),
                (Task::Dict, Bucket::Lang(l)) => Planned::Dict(self.corpus.window(l, draw.item, max_len)),
                (Task::Bitext, Bucket::Direction(d)) => {
                    let first = self.corpus.pair(d, draw.item);
                    let mut feed = CursorFeed {
                        first: Some(first),
                        cursor: stream.cursor(&draw.bucket),
                        corpus: &self.corpus,
                        direction: first.direction,
                    };
                    let packed = pack_bitext(&mut feed, max_len)?.expect("feed starts with the drawn pair");
                    Planned::Bitext(packed)
                }
                _ => unreachable!("task and bucket kinds agree"),
            };
            out.push(planned);
        }
        Ok(out)
    }

    /// Builds records from planned inputs. Record `i` uses its own rng split,
    /// so the result is identical in every execution mode.
    pub fn build_records(&self, planned: &[Planned<'_>], exec: Exec) -> Result<Vec<TrainingRecord>> {
        let builder = self.builder();
        let base = self.root_rng().split_named("records");
        let indexed: Vec<(usize, &Planned<'_>)> = planned.iter().enumerate().collect();
        par::map(exec, &indexed, |&(i, p)| {
            let rng = base.split(i as u64);
            match p {
                Planned::Mono(w) => builder.make_mono_record(w, &rng),
                Planned::Dict(w) => builder.make_dict_record(w, &rng),
                Planned::Bitext(b) => builder.make_bitext_record(b, &rng),
            }
        })
        .into_iter()
        .collect()
    }
}

pub fn read_vocab(path: &Path) -> Result<Vocab> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Vocab::from_json(&text)
}

/// Input of one record, before noise.
#[derive(Clone, Debug)]
pub enum Planned<'a> {
    Mono(Window<'a>),
    Dict(Window<'a>),
    Bitext(PackedPair<'a>),
}

// The drawn pair first, then further pairs from the same bucket's cursor.
struct CursorFeed<'c, 'a> {
    first: Option<PairItem<'a>>,
    cursor: &'c mut EpochCursor,
    corpus: &'a Corpus,
    direction: &'a Direction,
}

impl<'a> PairFeed<'a> for CursorFeed<'_, 'a> {
    fn peek_pair(&mut self) -> Option<PairItem<'a>> {
        if let Some(first) = self.first {
            return Some(first);
        }
        Some(self.corpus.pair(self.direction, self.cursor.peek()))
    }

    fn advance(&mut self) {
        if self.first.take().is_none() {
            self.cursor.advance();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub file: String,
    pub records: usize,
    pub tokens: usize,
}

/// `manifest.json` of an emission directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmissionManifest {
    pub format_version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub vocab_hash: String,
    pub vocab_size: usize,
    pub record_count: usize,
    pub token_count: usize,
    pub batch_count: usize,
    pub task_counts: BTreeMap<Task, usize>,
    pub truncated_records: usize,
    pub batches: Vec<BatchEntry>,
    pub corpus: CorpusManifest,
    pub plan: MixPlan,
    pub config: PipelineConfig,
}

impl EmissionManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }
}

/// Hash of the resolved config as canonical JSON.
pub fn config_hash(cfg: &PipelineConfig) -> String {
    sha256_hex(serde_json::to_string(cfg).expect("config serializes").as_bytes())
}

#[derive(Clone, Debug)]
pub struct EmitSummary {
    pub out_dir: PathBuf,
    pub manifest: EmissionManifest,
}

/// Emits `config.records` records into `out_dir`. Existing batch files there
/// are removed first.
pub fn emit(prepared: &Prepared, out_dir: &Path, exec: Exec) -> Result<EmitSummary> {
    let cfg = &prepared.config;
    let planned = prepared.plan_records(cfg.records)?;
    let records = prepared.build_records(&planned, exec)?;
    drop(planned);

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    clear_batches(out_dir)?;

    let mut task_counts: BTreeMap<Task, usize> = BTreeMap::new();
    let mut truncated = 0;
    for r in &records {
        *task_counts.entry(r.task).or_default() += 1;
        if r.provenance.truncated.is_some() || r.source_clipped {
            truncated += 1;
        }
    }
    let record_count = records.len();
    let mut batches = Vec::new();
    let mut token_count = 0;
    for (i, batch) in assemble_batches(records, cfg.token_budget).enumerate() {
        let batch = batch?;
        let file = batch_file_name(i);
        let path = out_dir.join(&file);
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(f);
        for r in &batch.records {
            serde_json::to_writer(&mut w, r).map_err(|e| Error::json("record", e))?;
            w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        token_count += batch.token_count;
        batches.push(BatchEntry {
            file,
            records: batch.records.len(),
            tokens: batch.token_count,
        });
    }

    let vocab_json = prepared.vocab.to_json();
    let vocab_path = out_dir.join(VOCAB_FILE);
    fs::write(&vocab_path, &vocab_json).map_err(|e| Error::io(&vocab_path, e))?;

    let manifest = EmissionManifest {
        format_version: FORMAT_VERSION,
        seed: cfg.seed,
        config_hash: config_hash(cfg),
        vocab_hash: sha256_hex(vocab_json.as_bytes()),
        vocab_size: prepared.vocab.len(),
        record_count,
        token_count,
        batch_count: batches.len(),
        task_counts,
        truncated_records: truncated,
        batches,
        corpus: prepared.manifest.clone(),
        plan: prepared.plan.clone(),
        config: cfg.clone(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json("manifest", e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    log::info!("wrote {record_count} records in {} batches to {}", manifest.batch_count, out_dir.display());
    Ok(EmitSummary {
        out_dir: out_dir.to_path_buf(),
        manifest,
    })
}

fn is_batch_file(name: &str) -> bool {
    name.strip_prefix("batch-")
        .and_then(|r| r.strip_suffix(".jsonl"))
        .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

fn clear_batches(dir: &Path) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.file_name().to_str().is_some_and(is_batch_file) {
            fs::remove_file(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
        }
    }
    Ok(())
}

/// SHA-256 over the sorted (name, content) pairs of the regular files in `dir`.
pub fn hash_dir(dir: &Path) -> Result<String> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_file() {
            names.push(entry.file_name());
        }
    }
    names.sort();
    let mut h = Sha256::new();
    for name in names {
        let path = dir.join(&name);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        h.update(name.to_string_lossy().as_bytes());
        h.update([0]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}
