//! Noising functions applied before encoding.
//!
//! * [`dictionary_noise`] swaps words for dictionary translations into other
//!   languages (code-switching).
//! * [`sequence_noise`] is the BART/mBART-style corruption: permute sentences,
//!   then mask spans of the flattened word sequence.
//!
//! All functions are pure given `(input, config, rng state)`.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::Dictionary;
use crate::error::{Error, Result};
use crate::lang::LanguageId;
use crate::rng::Rng;
use crate::tokenizer::MASK;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictNoiseConfig {
    /// Total probability that a word is sent to some language.
    pub p_r: f64,
    /// Candidate replacement languages.
    pub languages: Vec<LanguageId>,
}

impl Default for DictNoiseConfig {
    fn default() -> Self {
        DictNoiseConfig {
            p_r: 0.4,
            languages: Vec::new(),
        }
    }
}

impl DictNoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_r) {
            return Err(Error::Config(format!("p_r = {} is outside [0, 1]", self.p_r)));
        }
        if self.languages.is_empty() {
            return Err(Error::Config("dictionary noise needs at least one language".into()));
        }
        let mut sorted = self.languages.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.languages.len() {
            return Err(Error::Config("duplicate entry in dictionary noise languages".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub mask_ratio: f64,
    /// Mean of the Poisson span-length distribution.
    pub span_lambda: f64,
    pub permute_sentences: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            mask_ratio: 0.35,
            span_lambda: 3.5,
            permute_sentences: true,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mask_ratio) {
            return Err(Error::Config(format!("mask_ratio = {} is outside [0, 1]", self.mask_ratio)));
        }
        if !(self.span_lambda > 0.0 && self.span_lambda.is_finite()) {
            return Err(Error::Config(format!("span_lambda = {} must be positive", self.span_lambda)));
        }
        Ok(())
    }

    /// Words that must be masked in an `n`-word input.
    pub fn mask_target(&self, n: usize) -> usize {
        if self.mask_ratio <= 0.0 {
            return 0;
        }
        ((self.mask_ratio * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    /// Index of the replaced word in the input.
    pub position: usize,
    /// First output index of the spliced translation.
    pub output: usize,
    /// Number of output words the translation occupies.
    pub len: usize,
    pub lang: LanguageId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DictNoised {
    pub words: Vec<String>,
    pub replacements: Vec<Replacement>,
    /// Words for which some language was drawn, covered or not.
    pub draws: usize,
}

/// Replaces each word, independently, with a translation into language `l`
/// with probability `p_r / |T|` for every `l` in `T = L \ {lang}`.
///
/// A drawn language without an entry leaves the word unchanged. With several
/// translations one is picked uniformly. Multi-word translations are spliced in.
pub fn dictionary_noise(
    words: &[String],
    lang: &LanguageId,
    dict: &Dictionary,
    cfg: &DictNoiseConfig,
    rng: &mut Rng,
) -> DictNoised {
    let targets: Vec<&LanguageId> = cfg.languages.iter().filter(|l| *l != lang).collect();
    let mut out = DictNoised {
        words: Vec::with_capacity(words.len()),
        replacements: Vec::new(),
        draws: 0,
    };
    if targets.is_empty() || cfg.p_r <= 0.0 {
        out.words.extend_from_slice(words);
        return out;
    }
    for (position, word) in words.iter().enumerate() {
        let u: f64 = rng.random();
        if u >= cfg.p_r {
            out.words.push(word.clone());
            continue;
        }
        // u / p_r is uniform on [0, 1) given u < p_r
        let k = ((u / cfg.p_r * targets.len() as f64) as usize).min(targets.len() - 1);
        let target = targets[k];
        out.draws += 1;
        let choices = dict.translations(lang, word, target);
        if choices.is_empty() {
            out.words.push(word.clone());
            continue;
        }
        let pick = if choices.len() == 1 {
            0
        } else {
            rng.random_range(0..choices.len())
        };
        let start = out.words.len();
        out.words.extend(choices[pick].split_whitespace().map(str::to_owned));
        out.replacements.push(Replacement {
            position,
            output: start,
            len: out.words.len() - start,
            lang: target.clone(),
        });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub len: usize,
}

impl Span {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn contains(&self, pos: usize) -> bool {
        (self.start..self.end()).contains(&pos)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Masked {
    pub words: Vec<String>,
    /// Spans over input positions, sorted by start, non-overlapping.
    pub spans: Vec<Span>,
    pub masked: usize,
}

/// Masks spans until `ceil(mask_ratio * n)` words are covered.
///
/// Span lengths are Poisson(`span_lambda`) draws with zeros redrawn. A start is
/// chosen uniformly among still-unmasked positions and the span grows over
/// consecutive unmasked words, stopping early at an already-masked word, the
/// end of input, or once the target count is reached. Each span becomes one
/// MASK token.
pub fn span_mask(words: &[String], cfg: &NoiseConfig, rng: &mut Rng) -> Masked {
    let n = words.len();
    let target = cfg.mask_target(n);
    if target == 0 {
        return Masked {
            words: words.to_vec(),
            spans: Vec::new(),
            masked: 0,
        };
    }
    let poisson = Poisson::new(cfg.span_lambda).expect("span_lambda validated");
    let mut is_masked = vec![false; n];
    let mut spans = Vec::new();
    let mut masked = 0;
    while masked < target {
        let want = loop {
            let draw: f64 = poisson.sample(rng);
            if draw >= 1.0 {
                break draw as usize;
            }
        };
        let free = n - masked;
        let mut r = rng.random_range(0..free);
        let start = is_masked
            .iter()
            .position(|m| {
                if *m {
                    return false;
                }
                if r == 0 {
                    return true;
                }
                r -= 1;
                false
            })
            .expect("free position exists");
        let limit = want.min(target - masked);
        let mut len = 0;
        while len < limit && start + len < n && !is_masked[start + len] {
            is_masked[start + len] = true;
            len += 1;
        }
        masked += len;
        spans.push(Span { start, len });
    }
    spans.sort_by_key(|s| s.start);

    let mut out = Vec::with_capacity(n - masked + spans.len());
    let mut next = spans.iter().peekable();
    let mut i = 0;
    while i < n {
        match next.peek() {
            Some(span) if span.start == i => {
                out.push(MASK.to_owned());
                i = span.end();
                next.next();
            }
            _ => {
                out.push(words[i].clone());
                i += 1;
            }
        }
    }
    Masked {
        words: out,
        spans,
        masked,
    }
}

/// Uniform random permutation when enabled. Returns the permuted list and
/// `order`, where `order[k]` is the input index placed at position `k`.
pub fn permute_sentences<T: Clone>(
    sentences: &[T],
    cfg: &NoiseConfig,
    rng: &mut Rng,
) -> (Vec<T>, Vec<usize>) {
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    if cfg.permute_sentences && sentences.len() > 1 {
        order.shuffle(rng);
    }
    let permuted = order.iter().map(|&i| sentences[i].clone()).collect();
    (permuted, order)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceNoised {
    pub words: Vec<String>,
    pub order: Vec<usize>,
    /// Offsets where each permuted sentence starts in the flattened input.
    pub boundaries: Vec<usize>,
    pub spans: Vec<Span>,
    pub masked: usize,
    /// Word count before masking.
    pub input_len: usize,
}

/// Sentence permutation followed by span masking over the flattened result.
pub fn sequence_noise<S>(sentences: &[S], cfg: &NoiseConfig, rng: &mut Rng) -> SequenceNoised
where
    S: AsRef<[String]> + Clone,
{
    let (permuted, order) = permute_sentences(sentences, cfg, rng);
    let mut boundaries = Vec::with_capacity(permuted.len());
    let mut flat = Vec::new();
    for s in &permuted {
        boundaries.push(flat.len());
        flat.extend_from_slice(s.as_ref());
    }
    let masked = span_mask(&flat, cfg, rng);
    SequenceNoised {
        input_len: flat.len(),
        words: masked.words,
        order,
        boundaries,
        spans: masked.spans,
        masked: masked.masked,
    }
}
