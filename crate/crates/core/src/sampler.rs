//! Exponential (temperature-style) sampling over languages, directions and
//! tasks, and the seeded draw stream that realizes a [`MixPlan`].

use std::collections::BTreeMap;
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusManifest;
use crate::error::{Error, Result};
use crate::lang::{Direction, LanguageId};
use crate::rng::Rng;

/// Training objective. Variants are declared alphabetically so maps keyed by
/// task serialize with sorted keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Bitext,
    Dict,
    Mono,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Mono, Task::Dict, Task::Bitext];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Bitext => "bitext",
            Task::Dict => "dict",
            Task::Mono => "mono",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mono" => Ok(Task::Mono),
            "dict" => Ok(Task::Dict),
            "bitext" => Ok(Task::Bitext),
            _ => Err(Error::Config(format!("unknown task {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub alpha_mono: f64,
    pub alpha_bitext: f64,
    pub alpha_task: f64,
    pub halve_to_english: bool,
    pub english_code: LanguageId,
    /// Tasks allowed in the mix; the rest get probability 0.
    pub tasks: Vec<Task>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            alpha_mono: 0.5,
            alpha_bitext: 0.3,
            alpha_task: 0.3,
            halve_to_english: true,
            english_code: LanguageId::new("en").expect("valid"),
            tasks: Task::ALL.to_vec(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, a) in [
            ("alpha_mono", self.alpha_mono),
            ("alpha_bitext", self.alpha_bitext),
            ("alpha_task", self.alpha_task),
        ] {
            check_alpha(name, a)?;
        }
        if self.tasks.is_empty() {
            return Err(Error::Config("no tasks enabled".into()));
        }
        Ok(())
    }
}

fn check_alpha(name: &str, alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {alpha} must be a finite value >= 0")))
    }
}

/// `q_i = s_i^alpha / sum_j s_j^alpha`, with zero sizes mapped to zero.
///
/// Sizes are divided by the largest size before exponentiation. For integer
/// counts this makes the result bit-identical under scaling by any integer
/// factor, because each ratio is a single correctly rounded division of the
/// same exact quotient.
pub fn exponential_weights<K: Ord + Clone>(sizes: &BTreeMap<K, u64>, alpha: f64) -> Result<BTreeMap<K, f64>> {
    check_alpha("alpha", alpha)?;
    let max = sizes.values().copied().max().unwrap_or(0);
    if max == 0 {
        return Err(Error::AllZero);
    }
    let raw: Vec<(K, f64)> = sizes
        .iter()
        .map(|(k, &s)| {
            let w = if s == 0 { 0.0 } else { (s as f64 / max as f64).powf(alpha) };
            (k.clone(), w)
        })
        .collect();
    Ok(normalize(raw))
}

fn normalize<K: Ord>(raw: Vec<(K, f64)>) -> BTreeMap<K, f64> {
    let total: f64 = raw.iter().map(|(_, w)| w).sum();
    raw.into_iter().map(|(k, w)| (k, w / total)).collect()
}

/// Exponential weights over directions, then to-English directions halved and
/// the whole distribution renormalized once.
pub fn direction_weights(bitext_sizes: &BTreeMap<Direction, u64>, cfg: &SamplerConfig) -> Result<BTreeMap<Direction, f64>> {
    let q = exponential_weights(bitext_sizes, cfg.alpha_bitext)?;
    if !cfg.halve_to_english {
        return Ok(q);
    }
    let halved = q
        .into_iter()
        .map(|(d, p)| {
            let p = if d.tgt == cfg.english_code { p * 0.5 } else { p };
            (d, p)
        })
        .collect();
    Ok(normalize(halved))
}

/// Task data volumes: mono and dict both draw on the monolingual corpus, bitext
/// on the parallel one. Dict has zero volume without a dictionary.
pub fn task_volumes(manifest: &CorpusManifest, cfg: &SamplerConfig) -> BTreeMap<Task, u64> {
    let mono = manifest.total_mono();
    let has_dict = manifest.dict_coverage.values().any(|&c| c > 0);
    Task::ALL
        .iter()
        .map(|&t| {
            let v = match t {
                Task::Mono => mono,
                Task::Dict if has_dict => mono,
                Task::Dict => 0,
                Task::Bitext => manifest.total_bitext(),
            };
            (t, if cfg.tasks.contains(&t) { v } else { 0 })
        })
        .collect()
}

pub fn task_weights(manifest: &CorpusManifest, cfg: &SamplerConfig) -> Result<BTreeMap<Task, f64>> {
    if manifest.total_mono() == 0 {
        return Err(Error::NoMonolingualData);
    }
    exponential_weights(&task_volumes(manifest, cfg), cfg.alpha_task).map_err(|e| match e {
        Error::AllZero => Error::Config(format!(
            "none of the enabled tasks {:?} has data",
            cfg.tasks.iter().map(|t| t.as_str()).collect::<Vec<_>>()
        )),
        e => e,
    })
}

/// The realized sampling distributions, plus the settings that produced them.
/// Fields are alphabetical so the JSON form has sorted keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixPlan {
    pub alpha_bitext: f64,
    pub alpha_mono: f64,
    pub alpha_task: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bitext_probs: Option<BTreeMap<Direction, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dict_probs: Option<BTreeMap<LanguageId, f64>>,
    pub english_code: LanguageId,
    pub halve_to_english: bool,
    pub mono_probs: BTreeMap<LanguageId, f64>,
    pub task_probs: BTreeMap<Task, f64>,
}

impl MixPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn task_prob(&self, task: Task) -> f64 {
        self.task_probs.get(&task).copied().unwrap_or(0.0)
    }
}

pub fn build_mix_plan(manifest: &CorpusManifest, cfg: &SamplerConfig) -> Result<MixPlan> {
    cfg.validate()?;
    let task_probs = task_weights(manifest, cfg)?;
    let mono_probs = exponential_weights(&manifest.mono_sizes, cfg.alpha_mono)?;
    let dict_probs = (task_probs[&Task::Dict] > 0.0).then(|| mono_probs.clone());
    let bitext_probs = if manifest.total_bitext() > 0 {
        Some(direction_weights(&manifest.bitext_sizes, cfg)?)
    } else {
        None
    };
    Ok(MixPlan {
        alpha_bitext: cfg.alpha_bitext,
        alpha_mono: cfg.alpha_mono,
        alpha_task: cfg.alpha_task,
        bitext_probs,
        dict_probs,
        english_code: cfg.english_code.clone(),
        halve_to_english: cfg.halve_to_english,
        mono_probs,
        task_probs,
    })
}

/// A sampling bucket: a monolingual language or a bitext direction.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bucket {
    Lang(LanguageId),
    Direction(Direction),
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bucket::Lang(l) => write!(f, "mono/{l}"),
            Bucket::Direction(d) => write!(f, "bitext/{d}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Draw {
    pub task: Task,
    pub bucket: Bucket,
    /// Index of the sentence or pair within the bucket.
    pub item: usize,
}

/// Cycles through seeded permutations of `0..len`, one per epoch.
#[derive(Clone, Debug)]
pub struct EpochCursor {
    base: Rng,
    len: usize,
    epoch: u64,
    order: Vec<usize>,
    pos: usize,
}

impl EpochCursor {
    pub fn new(base: Rng, len: usize) -> Self {
        assert!(len > 0, "epoch cursor over an empty bucket");
        let mut c = EpochCursor {
            base,
            len,
            epoch: 0,
            order: Vec::new(),
            pos: 0,
        };
        c.shuffle();
        c
    }

    fn shuffle(&mut self) {
        self.order = (0..self.len).collect();
        self.order.shuffle(&mut self.base.split(self.epoch));
        self.pos = 0;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn peek(&mut self) -> usize {
        if self.pos == self.len {
            self.epoch += 1;
            self.shuffle();
        }
        self.order[self.pos]
    }

    pub fn advance(&mut self) -> usize {
        let item = self.peek();
        self.pos += 1;
        item
    }
}

struct Categorical<K> {
    keys: Vec<K>,
    index: WeightedIndex<f64>,
}

impl<K: Clone> Categorical<K> {
    fn new(probs: &BTreeMap<K, f64>) -> Option<Self> {
        let keys: Vec<K> = probs.keys().cloned().collect();
        let index = WeightedIndex::new(probs.values().copied()).ok()?;
        Some(Categorical { keys, index })
    }

    fn sample(&self, rng: &mut Rng) -> K {
        self.keys[self.index.sample(rng)].clone()
    }
}

/// Unbounded stream of draws realizing a plan: task, then bucket, then an
/// item from the bucket's epoch permutation. Mono and dict share the
/// per-language cursors.
pub struct MixStream {
    rng: Rng,
    tasks: Categorical<Task>,
    mono: Categorical<LanguageId>,
    dict: Option<Categorical<LanguageId>>,
    bitext: Option<Categorical<Direction>>,
    cursors: BTreeMap<Bucket, EpochCursor>,
}

impl MixStream {
    pub fn new(plan: &MixPlan, manifest: &CorpusManifest, rng: Rng) -> Result<Self> {
        let mut cursors = BTreeMap::new();
        let langs = plan.mono_probs.iter().chain(plan.dict_probs.iter().flatten());
        for (lang, &p) in langs {
            let bucket = Bucket::Lang(lang.clone());
            let size = manifest.mono_sizes.get(lang).copied().unwrap_or(0);
            register(&mut cursors, &rng, bucket, p, size)?;
        }
        for (dir, &p) in plan.bitext_probs.iter().flatten() {
            let bucket = Bucket::Direction(dir.clone());
            let size = manifest.bitext_sizes.get(dir).copied().unwrap_or(0);
            let p = if plan.task_prob(Task::Bitext) > 0.0 { p } else { 0.0 };
            register(&mut cursors, &rng, bucket, p, size)?;
        }
        let bitext = if plan.task_prob(Task::Bitext) > 0.0 {
            let probs = plan
                .bitext_probs
                .as_ref()
                .ok_or_else(|| Error::EmptyBucket("bitext".into()))?;
            Some(Categorical::new(probs).ok_or_else(|| Error::EmptyBucket("bitext".into()))?)
        } else {
            None
        };
        Ok(MixStream {
            tasks: Categorical::new(&plan.task_probs).ok_or(Error::AllZero)?,
            mono: Categorical::new(&plan.mono_probs).ok_or(Error::NoMonolingualData)?,
            dict: plan.dict_probs.as_ref().and_then(Categorical::new),
            bitext,
            cursors,
            rng,
        })
    }

    pub fn next_draw(&mut self) -> Draw {
        let task = self.tasks.sample(&mut self.rng);
        let bucket = match task {
            Task::Mono => Bucket::Lang(self.mono.sample(&mut self.rng)),
            Task::Dict => {
                let cat = self.dict.as_ref().unwrap_or(&self.mono);
                Bucket::Lang(cat.sample(&mut self.rng))
            }
            Task::Bitext => {
                let cat = self.bitext.as_ref().expect("bitext task has positive probability");
                Bucket::Direction(cat.sample(&mut self.rng))
            }
        };
        let item = self.cursor(&bucket).advance();
        Draw { task, bucket, item }
    }

    /// The epoch cursor of a bucket, for drawing additional items from it.
    pub fn cursor(&mut self, bucket: &Bucket) -> &mut EpochCursor {
        self.cursors.get_mut(bucket).expect("bucket registered at construction")
    }
}

fn register(
    cursors: &mut BTreeMap<Bucket, EpochCursor>,
    rng: &Rng,
    bucket: Bucket,
    p: f64,
    size: u64,
) -> Result<()> {
    if size == 0 {
        if p > 0.0 {
            return Err(Error::EmptyBucket(bucket.to_string()));
        }
        return Ok(());
    }
    if let std::collections::btree_map::Entry::Vacant(e) = cursors.entry(bucket) {
        let base = rng.split_named(&e.key().to_string());
        e.insert(EpochCursor::new(base, size as usize));
    }
    Ok(())
}

impl Iterator for MixStream {
    type Item = Draw;

    fn next(&mut self) -> Option<Draw> {
        Some(self.next_draw())
    }
}

/// Total-variation distance between two distributions over the same keys.
pub fn total_variation<K: Ord>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut sum = 0.0;
    for (k, pa) in a {
        sum += (pa - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, pb) in b {
        if !a.contains_key(k) {
            sum += pb.abs();
        }
    }
    0.5 * sum
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMix {
    pub draws: u64,
    pub task_freqs: BTreeMap<Task, f64>,
    pub mono_freqs: BTreeMap<LanguageId, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dict_freqs: Option<BTreeMap<LanguageId, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bitext_freqs: Option<BTreeMap<Direction, f64>>,
    /// TV distance to the analytic plan, per distribution.
    pub tv: BTreeMap<String, f64>,
}

fn freqs<K: Ord + Clone>(counts: &BTreeMap<K, u64>) -> BTreeMap<K, f64> {
    let total: u64 = counts.values().sum();
    counts.iter().map(|(k, &c)| (k.clone(), c as f64 / total.max(1) as f64)).collect()
}

/// Monte-Carlo estimate of a plan: keeps drawing until the task distribution
/// and every active per-task bucket distribution has at least `min_per_family`
/// samples.
pub fn empirical_mix(plan: &MixPlan, manifest: &CorpusManifest, rng: Rng, min_per_family: u64) -> Result<EmpiricalMix> {
    let mut stream = MixStream::new(plan, manifest, rng)?;
    let mut tasks: BTreeMap<Task, u64> = BTreeMap::new();
    let mut mono: BTreeMap<LanguageId, u64> = BTreeMap::new();
    let mut dict: BTreeMap<LanguageId, u64> = BTreeMap::new();
    let mut bitext: BTreeMap<Direction, u64> = BTreeMap::new();
    let need = |t: Task| plan.task_prob(t) > 0.0;
    let mut draws = 0u64;
    loop {
        let family = |m: u64, t: Task| !need(t) || m >= min_per_family;
        if draws >= min_per_family
            && family(mono.values().sum(), Task::Mono)
            && family(dict.values().sum(), Task::Dict)
            && family(bitext.values().sum(), Task::Bitext)
        {
            break;
        }
        let d = stream.next_draw();
        draws += 1;
        *tasks.entry(d.task).or_default() += 1;
        match (d.task, d.bucket) {
            (Task::Mono, Bucket::Lang(l)) => *mono.entry(l).or_default() += 1,
            (Task::Dict, Bucket::Lang(l)) => *dict.entry(l).or_default() += 1,
            (Task::Bitext, Bucket::Direction(dir)) => *bitext.entry(dir).or_default() += 1,
            _ => unreachable!("task and bucket kinds agree"),
        }
    }
    let task_freqs = freqs(&tasks);
    let mono_freqs = freqs(&mono);
    let mut tv = BTreeMap::new();
    tv.insert("task".to_owned(), total_variation(&task_freqs, &plan.task_probs));
    if need(Task::Mono) {
        tv.insert("mono".to_owned(), total_variation(&mono_freqs, &plan.mono_probs));
    }
    let dict_freqs = plan.dict_probs.as_ref().filter(|_| need(Task::Dict)).map(|p| {
        let f = freqs(&dict);
        tv.insert("dict".to_owned(), total_variation(&f, p));
        f
    });
    let bitext_freqs = plan.bitext_probs.as_ref().filter(|_| need(Task::Bitext)).map(|p| {
        let f = freqs(&bitext);
        tv.insert("bitext".to_owned(), total_variation(&f, p));
        f
    });
    Ok(EmpiricalMix {
        draws,
        task_freqs,
        mono_freqs,
        dict_freqs,
        bitext_freqs,
        tv,
    })
}
