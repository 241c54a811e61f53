//! Training records for the three objectives, bitext packing and token-budget
//! batching.
//!
//! | task   | source                          | target   |
//! |--------|---------------------------------|----------|
//! | mono   | `seq_noise(x)`                  | `x`      |
//! | dict   | `seq_noise(dictionary_noise(x))`| `x`      |
//! | bitext | `seq_noise(x)`                  | `y`      |
//!
//! Sources use [`Framing::Source`], targets [`Framing::Target`]. Bitext targets
//! are never noised.

use serde::{Deserialize, Serialize};

use crate::corpus::Dictionary;
use crate::error::{Error, Result};
use crate::lang::{Direction, LanguageId};
use crate::noising::{dictionary_noise, sequence_noise, DictNoiseConfig, NoiseConfig, SequenceNoised, Span};
use crate::rng::Rng;
use crate::sampler::Task;
use crate::tokenizer::{Framing, Vocab, FRAMING_LEN};

/// A sentence (or pair) inside a loaded shard: `line` counts retained lines,
/// i.e. after blank-line removal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceRef {
    pub shard: usize,
    pub line: usize,
}

/// Words kept on each side when a single over-long item was cut.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub source: usize,
    pub target: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub items: Vec<SourceRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated: Option<Truncation>,
}

/// A dictionary replacement located in the permuted, pre-mask word sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracedReplacement {
    /// Sentence index within the window.
    pub sentence: usize,
    /// Word index within that clean sentence.
    pub word: usize,
    /// Position in the flattened sequence fed to span masking.
    pub at: usize,
    pub len: usize,
    pub lang: LanguageId,
}

/// Noise events of one record, kept for post-hoc statistics.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseTrace {
    /// Word count entering span masking.
    pub words: usize,
    pub masked: usize,
    pub spans: Vec<Span>,
    pub order: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub replacements: Vec<TracedReplacement>,
    /// Clean words offered to dictionary noise.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub dict_words: usize,
    /// Words for which a replacement language was drawn.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub dict_draws: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One emitted example, in its JSON-lines wire form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub task: Task,
    pub src_lang: LanguageId,
    pub tgt_lang: LanguageId,
    pub source_ids: Vec<u32>,
    pub target_ids: Vec<u32>,
    pub provenance: Provenance,
    /// Source cut back to `max_len` after dictionary noise lengthened it.
    #[serde(default, skip_serializing_if = "is_false")]
    pub source_clipped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<NoiseTrace>,
}

impl TrainingRecord {
    pub fn token_count(&self) -> usize {
        self.source_ids.len() + self.target_ids.len()
    }
}

/// Consecutive sentences of one shard that fit in `max_len` once framed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window<'a> {
    pub lang: &'a LanguageId,
    pub refs: Vec<SourceRef>,
    pub sentences: Vec<&'a [String]>,
    pub truncated: Option<Truncation>,
}

impl<'a> Window<'a> {
    /// Starts at `start` and appends following sentences while they fit. A
    /// first sentence longer than the budget is cut and flagged.
    pub fn build(
        lang: &'a LanguageId,
        shard: usize,
        sentences: &'a [Vec<String>],
        start: usize,
        max_len: usize,
    ) -> Self {
        let budget = max_len.saturating_sub(FRAMING_LEN);
        let first = &sentences[start];
        if first.len() > budget {
            return Window {
                lang,
                refs: vec![SourceRef { shard, line: start }],
                sentences: vec![&first[..budget]],
                truncated: Some(Truncation {
                    source: budget,
                    target: budget,
                }),
            };
        }
        let mut used = first.len();
        let mut end = start + 1;
        while end < sentences.len() && used + sentences[end].len() <= budget {
            used += sentences[end].len();
            end += 1;
        }
        Window {
            lang,
            refs: (start..end).map(|line| SourceRef { shard, line }).collect(),
            sentences: sentences[start..end].iter().map(Vec::as_slice).collect(),
            truncated: None,
        }
    }

    pub fn words(&self) -> Vec<String> {
        self.sentences.iter().flat_map(|s| s.iter().cloned()).collect()
    }
}

/// One aligned pair offered to the packer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairItem<'a> {
    pub direction: &'a Direction,
    pub at: SourceRef,
    pub source: &'a [String],
    pub target: &'a [String],
}

/// A peekable supply of pairs.
pub trait PairFeed<'a> {
    fn peek_pair(&mut self) -> Option<PairItem<'a>>;
    fn advance(&mut self);
}

impl<'a, I: Iterator<Item = PairItem<'a>>> PairFeed<'a> for std::iter::Peekable<I> {
    fn peek_pair(&mut self) -> Option<PairItem<'a>> {
        self.peek().copied()
    }

    fn advance(&mut self) {
        self.next();
    }
}

/// Several pairs of one direction concatenated; segment `i` of the source
/// aligns with segment `i` of the target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedPair<'a> {
    pub direction: &'a Direction,
    pub refs: Vec<SourceRef>,
    pub source: Vec<&'a [String]>,
    pub target: Vec<&'a [String]>,
    pub truncated: Option<Truncation>,
}

impl PackedPair<'_> {
    pub fn segments(&self) -> usize {
        self.refs.len()
    }
}

/// Framed length of a packed source: words plus framing, no separators.
pub fn packed_source_len(words: usize) -> usize {
    words + FRAMING_LEN
}

/// Framed length of a packed target: words, `segments - 1` EOS separators, framing.
pub fn packed_target_len(words: usize, segments: usize) -> usize {
    words + segments.saturating_sub(1) + FRAMING_LEN
}

/// Greedily packs pairs from `feed` while both framed sides stay within
/// `max_len`. The first pair is always taken; if it alone is too long both
/// sides are cut by the same factor. Stops before a pair already in the pack.
pub fn pack_bitext<'a, F: PairFeed<'a>>(feed: &mut F, max_len: usize) -> Result<Option<PackedPair<'a>>> {
    let Some(first) = feed.peek_pair() else {
        return Ok(None);
    };
    feed.advance();
    let budget = max_len.saturating_sub(FRAMING_LEN).max(1);
    let mut pack = PackedPair {
        direction: first.direction,
        refs: vec![first.at],
        source: vec![first.source],
        target: vec![first.target],
        truncated: None,
    };
    if first.source.len() > budget || first.target.len() > budget {
        let factor = (budget as f64 / first.source.len() as f64).min(budget as f64 / first.target.len() as f64);
        let keep = |n: usize| ((n as f64 * factor).floor() as usize).clamp(1, budget.min(n));
        let (s, t) = (keep(first.source.len()), keep(first.target.len()));
        pack.source[0] = &first.source[..s];
        pack.target[0] = &first.target[..t];
        pack.truncated = Some(Truncation { source: s, target: t });
        return Ok(Some(pack));
    }
    let mut src_words = first.source.len();
    let mut tgt_words = first.target.len();
    while let Some(next) = feed.peek_pair() {
        if next.direction != pack.direction {
            return Err(Error::MixedDirections {
                expected: pack.direction.to_string(),
                found: next.direction.to_string(),
            });
        }
        if pack.refs.contains(&next.at) {
            break;
        }
        let s = src_words + next.source.len();
        let t = tgt_words + next.target.len();
        if packed_source_len(s) > max_len || packed_target_len(t, pack.segments() + 1) > max_len {
            break;
        }
        feed.advance();
        src_words = s;
        tgt_words = t;
        pack.refs.push(next.at);
        pack.source.push(next.source);
        pack.target.push(next.target);
    }
    Ok(Some(pack))
}

/// Settings and shared data for record construction.
#[derive(Clone, Copy, Debug)]
pub struct RecordBuilder<'a> {
    pub vocab: &'a Vocab,
    pub dictionary: &'a Dictionary,
    pub dict_noise: &'a DictNoiseConfig,
    pub noise: &'a NoiseConfig,
    pub max_len: usize,
    pub trace: bool,
}

impl RecordBuilder<'_> {
    fn clip(&self, mut words: Vec<String>) -> (Vec<String>, bool) {
        let budget = self.max_len.saturating_sub(FRAMING_LEN);
        let clipped = words.len() > budget;
        words.truncate(budget);
        (words, clipped)
    }

    fn trace_of(&self, phi: &SequenceNoised) -> NoiseTrace {
        NoiseTrace {
            words: phi.input_len,
            masked: phi.masked,
            spans: phi.spans.clone(),
            order: phi.order.clone(),
            ..Default::default()
        }
    }

    pub fn make_mono_record(&self, window: &Window<'_>, rng: &Rng) -> Result<TrainingRecord> {
        let phi = sequence_noise(&window.sentences, self.noise, &mut rng.split_named("seq"));
        let trace = self.trace_of(&phi);
        self.finish_monolingual(Task::Mono, window, phi.words, trace)
    }

    pub fn make_dict_record(&self, window: &Window<'_>, rng: &Rng) -> Result<TrainingRecord> {
        let mut dict_rng = rng.split_named("dict");
        let mut noised = Vec::with_capacity(window.sentences.len());
        let mut events = Vec::new();
        let mut draws = 0;
        for (i, sentence) in window.sentences.iter().enumerate() {
            let out = dictionary_noise(sentence, window.lang, self.dictionary, self.dict_noise, &mut dict_rng);
            draws += out.draws;
            events.extend(out.replacements.into_iter().map(|r| (i, r)));
            noised.push(out.words);
        }
        let phi = sequence_noise(&noised, self.noise, &mut rng.split_named("seq"));
        let mut trace = self.trace_of(&phi);
        trace.dict_words = window.sentences.iter().map(|s| s.len()).sum();
        trace.dict_draws = draws;
        trace.replacements = events
            .into_iter()
            .map(|(sentence, r)| {
                let slot = phi.order.iter().position(|&o| o == sentence).expect("permutation");
                TracedReplacement {
                    sentence,
                    word: r.position,
                    at: phi.boundaries[slot] + r.output,
                    len: r.len,
                    lang: r.lang,
                }
            })
            .collect();
        self.finish_monolingual(Task::Dict, window, phi.words, trace)
    }

    fn finish_monolingual(
        &self,
        task: Task,
        window: &Window<'_>,
        noised: Vec<String>,
        trace: NoiseTrace,
    ) -> Result<TrainingRecord> {
        let (noised, clipped) = self.clip(noised);
        let source = self.vocab.encode(&noised, window.lang, Framing::Source)?;
        let target = self.vocab.encode(&window.words(), window.lang, Framing::Target)?;
        Ok(TrainingRecord {
            task,
            src_lang: window.lang.clone(),
            tgt_lang: window.lang.clone(),
            source_ids: source.ids,
            target_ids: target.ids,
            provenance: Provenance {
                items: window.refs.clone(),
                truncated: window.truncated,
            },
            source_clipped: clipped,
            trace: self.trace.then_some(trace),
        })
    }

    pub fn make_bitext_record(&self, packed: &PackedPair<'_>, rng: &Rng) -> Result<TrainingRecord> {
        let phi = sequence_noise(&packed.source, self.noise, &mut rng.split_named("seq"));
        let trace = self.trace_of(&phi);
        let (noised, clipped) = self.clip(phi.words);
        let source = self.vocab.encode(&noised, &packed.direction.src, Framing::Source)?;
        let target = self.vocab.encode_segments(&packed.target, &packed.direction.tgt, Framing::Target)?;
        Ok(TrainingRecord {
            task: Task::Bitext,
            src_lang: packed.direction.src.clone(),
            tgt_lang: packed.direction.tgt.clone(),
            source_ids: source.ids,
            target_ids: target.ids,
            provenance: Provenance {
                items: packed.refs.clone(),
                truncated: packed.truncated,
            },
            source_clipped: clipped,
            trace: self.trace.then_some(trace),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub records: Vec<TrainingRecord>,
    pub token_count: usize,
}

/// Greedy, order-preserving token-budget batching.
pub struct Batches<I> {
    records: I,
    budget: usize,
    pending: Option<TrainingRecord>,
    done: bool,
}

pub fn assemble_batches<I: IntoIterator<Item = TrainingRecord>>(records: I, token_budget: usize) -> Batches<I::IntoIter> {
    Batches {
        records: records.into_iter(),
        budget: token_budget,
        pending: None,
        done: false,
    }
}

impl<I: Iterator<Item = TrainingRecord>> Iterator for Batches<I> {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut batch = Batch {
            records: Vec::new(),
            token_count: 0,
        };
        while let Some(record) = self.pending.take().or_else(|| self.records.next()) {
            let tokens = record.token_count();
            if tokens > self.budget && !batch.records.is_empty() {
                self.pending = Some(record);
                break;
            }
            if tokens > self.budget {
                self.done = true;
                return Some(Err(Error::RecordOverBudget {
                    tokens,
                    budget: self.budget,
                }));
            }
            if batch.token_count + tokens > self.budget {
                self.pending = Some(record);
                break;
            }
            batch.token_count += tokens;
            batch.records.push(record);
        }
        if batch.records.is_empty() {
            self.done = true;
            return None;
        }
        Some(Ok(batch))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::lang::lang;
    use crate::tokenizer::{Vocab, MASK, MASK_ID};
    use proptest::prelude::*;
    use std::collections::{BTreeSet, HashMap};

    fn ws(text: &str) -> Vec<String> {
        text.split_whitespace().map(str::to_owned).collect()
    }

    fn vocab(words: &[&str]) -> Vocab {
        let counts: HashMap<String, u64> = words.iter().map(|w| (w.to_string(), 1)).collect();
        let langs: BTreeSet<LanguageId> = ["en", "fr", "de"].iter().map(|l| lang(l)).collect();
        Vocab::from_counts(&counts, &langs, 1000).unwrap()
    }

    struct Fixture {
        vocab: Vocab,
        dict: Dictionary,
        dcfg: DictNoiseConfig,
        noise: NoiseConfig,
    }

    impl Fixture {
        fn new(p_r: f64, noise: NoiseConfig) -> Self {
            let words = ["a", "b", "c", "d", "e", "f", "g", "h", "A", "B", "C", "D", "E", "F", "G", "H"];
            let mut dict = Dictionary::new();
            for w in &words[..8] {
                dict.insert("en-fr".parse().unwrap(), w, &w.to_uppercase());
            }
            Fixture {
                vocab: vocab(&words),
                dict,
                dcfg: DictNoiseConfig {
                    p_r,
                    languages: vec![lang("fr")],
                },
                noise,
            }
        }

        fn builder(&self, max_len: usize) -> RecordBuilder<'_> {
            RecordBuilder {
                vocab: &self.vocab,
                dictionary: &self.dict,
                dict_noise: &self.dcfg,
                noise: &self.noise,
                max_len,
                trace: true,
            }
        }
    }

    fn no_noise() -> NoiseConfig {
        NoiseConfig {
            mask_ratio: 0.0,
            permute_sentences: false,
            ..Default::default()
        }
    }

    fn sentences() -> Vec<Vec<String>> {
        vec![ws("a b c"), ws("d e"), ws("f g h a"), ws("b")]
    }

    #[test]
    fn window_fills_then_stops_at_boundary() {
        let en = lang("en");
        let s = sentences();
        let w = Window::build(&en, 0, &s, 0, 5 + FRAMING_LEN);
        assert_eq!(w.refs.len(), 2);
        assert_eq!(w.words(), ws("a b c d e"));
        let w = Window::build(&en, 0, &s, 3, 100);
        assert_eq!(w.refs, [SourceRef { shard: 0, line: 3 }]);
        let w = Window::build(&en, 0, &s, 2, 2 + FRAMING_LEN);
        assert_eq!(w.words(), ws("f g"));
        assert_eq!(w.truncated, Some(Truncation { source: 2, target: 2 }));
    }

    #[test]
    fn mono_identity_noise() {
        let fx = Fixture::new(0.0, no_noise());
        let en = lang("en");
        let s = sentences();
        let w = Window::build(&en, 0, &s, 0, 64);
        let r = fx.builder(64).make_mono_record(&w, &Rng::from_seed(0)).unwrap();
        assert_eq!(r.task, Task::Mono);
        // identical up to framing
        let n = r.source_ids.len();
        assert_eq!(&r.source_ids[..n - 2], &r.target_ids[1..n - 1]);
        let decoded = fx.vocab.decode(&crate::tokenizer::TokenSeq { ids: r.target_ids.clone(), lang: en.clone() }).unwrap();
        assert_eq!(decoded, w.words());
    }

    #[test]
    fn mono_record_is_deterministic_and_reconstructs() {
        let fx = Fixture::new(0.4, NoiseConfig::default());
        let en = lang("en");
        let s = sentences();
        let w = Window::build(&en, 0, &s, 0, 64);
        let b = fx.builder(64);
        let r1 = b.make_mono_record(&w, &Rng::from_seed(9)).unwrap();
        let r2 = b.make_mono_record(&w, &Rng::from_seed(9)).unwrap();
        assert_eq!(serde_json::to_string(&r1).unwrap(), serde_json::to_string(&r2).unwrap());
        let target = fx.vocab.encode(&w.words(), &en, Framing::Target).unwrap();
        assert_eq!(r1.target_ids, target.ids);
        assert!(r1.source_ids.contains(&MASK_ID));
    }

    #[test]
    fn dict_record_without_masking_equals_dictionary_noise() {
        // permutation off, masking off: source is exactly the code-switched text
        let fx = Fixture::new(0.7, no_noise());
        let en = lang("en");
        let s = sentences();
        let w = Window::build(&en, 0, &s, 0, 64);
        let rng = Rng::from_seed(4);
        let r = fx.builder(64).make_dict_record(&w, &rng).unwrap();
        let mut expect_rng = rng.split_named("dict");
        let mut expect = Vec::new();
        for sent in &w.sentences {
            expect.extend(dictionary_noise(sent, &en, &fx.dict, &fx.dcfg, &mut expect_rng).words);
        }
        let src = fx.vocab.encode(&expect, &en, Framing::Source).unwrap();
        assert_eq!(r.source_ids, src.ids);
        assert_ne!(expect, w.words());
        assert_eq!(r.target_ids, fx.vocab.encode(&w.words(), &en, Framing::Target).unwrap().ids);
        let trace = r.trace.unwrap();
        assert_eq!(trace.dict_words, 10);
        assert!(!trace.replacements.is_empty());
        for rep in &trace.replacements {
            assert_eq!(expect[rep.at], w.sentences[rep.sentence][rep.word].to_uppercase());
        }
    }

    #[test]
    fn dict_record_identity_when_no_noise() {
        let fx = Fixture::new(0.0, no_noise());
        let en = lang("en");
        let s = sentences();
        let w = Window::build(&en, 0, &s, 1, 64);
        let r = fx.builder(64).make_dict_record(&w, &Rng::from_seed(1)).unwrap();
        assert_eq!(r.source_ids, fx.vocab.encode(&w.words(), &en, Framing::Source).unwrap().ids);
    }

    #[test]
    fn mask_wins_over_replacement() {
        // Find a seed where a replaced word falls inside a later mask span.
        let fx = Fixture::new(0.5, NoiseConfig::default());
        let en = lang("en");
        let s = sentences();
        let w = Window::build(&en, 0, &s, 0, 64);
        let b = fx.builder(64);
        let found = (0..200).find_map(|seed| {
            let r = b.make_dict_record(&w, &Rng::from_seed(seed)).unwrap();
            let t = r.trace.clone().unwrap();
            let hit = t.replacements.iter().any(|rep| t.spans.iter().any(|sp| sp.contains(rep.at)));
            hit.then_some(r)
        });
        let r = found.expect("some seed masks a replaced word");
        let t = r.trace.unwrap();
        assert!(r.source_ids.contains(&MASK_ID));
        assert!(!t.replacements.is_empty() && !t.spans.is_empty());
        // the covered translation does not surface in the source
        let rep = t.replacements.iter().find(|rep| t.spans.iter().any(|sp| sp.contains(rep.at))).unwrap();
        let translated = &w.sentences[rep.sentence][rep.word].to_uppercase();
        let visible = t.replacements.iter().filter(|x| !t.spans.iter().any(|sp| sp.contains(x.at)));
        if !visible.clone().any(|x| &w.sentences[x.sentence][x.word].to_uppercase() == translated) {
            assert!(!r.source_ids.contains(&fx.vocab.word_id(translated)));
        }
        assert_ne!(fx.vocab.id(MASK), None);
    }

    fn feed<'a>(dir: &'a Direction, pairs: &'a [(Vec<String>, Vec<String>)]) -> impl PairFeed<'a> {
        pairs
            .iter()
            .enumerate()
            .map(move |(i, (s, t))| PairItem {
                direction: dir,
                at: SourceRef { shard: 0, line: i },
                source: s,
                target: t,
            })
            .peekable()
    }

    fn pairs() -> Vec<(Vec<String>, Vec<String>)> {
        vec![(ws("a b"), ws("A B")), (ws("c"), ws("C D")), (ws("e f g"), ws("E F G"))]
    }

    #[test]
    fn pack_all_when_room() {
        let dir: Direction = "en-fr".parse().unwrap();
        let p = pairs();
        let packed = pack_bitext(&mut feed(&dir, &p), 1000).unwrap().unwrap();
        assert_eq!(packed.segments(), 3);
        assert_eq!(packed.source, [&p[0].0[..], &p[1].0[..], &p[2].0[..]]);
        assert_eq!(packed.target, [&p[0].1[..], &p[1].1[..], &p[2].1[..]]);
    }

    #[test]
    fn pack_one_per_record_when_tight() {
        let dir: Direction = "en-fr".parse().unwrap();
        let p = vec![(ws("a b"), ws("A B")), (ws("c d"), ws("C D"))];
        let mut f = feed(&dir, &p);
        let max_len = 2 + FRAMING_LEN;
        let a = pack_bitext(&mut f, max_len).unwrap().unwrap();
        let b = pack_bitext(&mut f, max_len).unwrap().unwrap();
        assert_eq!((a.segments(), b.segments()), (1, 1));
        assert_eq!(b.refs[0].line, 1);
        assert!(pack_bitext(&mut f, max_len).unwrap().is_none());
    }

    #[test]
    fn pack_counts_target_separators() {
        // sources fit (4 words) but the target needs 4 words + 1 separator
        let dir: Direction = "en-fr".parse().unwrap();
        let p = vec![(ws("a b"), ws("A B")), (ws("c d"), ws("C D"))];
        let packed = pack_bitext(&mut feed(&dir, &p), 4 + FRAMING_LEN).unwrap().unwrap();
        assert_eq!(packed.segments(), 1);
    }

    #[test]
    fn pack_rejects_mixed_directions() {
        let d1: Direction = "en-fr".parse().unwrap();
        let d2: Direction = "fr-en".parse().unwrap();
        let (a, b) = (ws("a"), ws("b"));
        let items = vec![
            PairItem { direction: &d1, at: SourceRef { shard: 0, line: 0 }, source: &a, target: &b },
            PairItem { direction: &d2, at: SourceRef { shard: 0, line: 1 }, source: &a, target: &b },
        ];
        let err = pack_bitext(&mut items.into_iter().peekable(), 100).unwrap_err();
        assert!(matches!(err, Error::MixedDirections { .. }));
    }

    #[test]
    fn pack_truncates_oversize_pair_proportionally() {
        let dir: Direction = "en-fr".parse().unwrap();
        let p = vec![(ws("a b c d e f g h"), ws("A B C D"))];
        let packed = pack_bitext(&mut feed(&dir, &p), 4 + FRAMING_LEN).unwrap().unwrap();
        assert_eq!(packed.truncated, Some(Truncation { source: 4, target: 2 }));
        assert_eq!(packed.source[0].len(), 4);
    }

    #[test]
    fn bitext_target_is_clean() {
        let fx = Fixture::new(0.4, NoiseConfig { mask_ratio: 0.9, ..Default::default() });
        let dir: Direction = "en-fr".parse().unwrap();
        let p = pairs();
        let packed = pack_bitext(&mut feed(&dir, &p), 1000).unwrap().unwrap();
        let r = fx.builder(1000).make_bitext_record(&packed, &Rng::from_seed(3)).unwrap();
        let clean = fx.vocab.encode_segments(&packed.target, &lang("fr"), Framing::Target).unwrap();
        assert_eq!(r.target_ids, clean.ids);
        assert_eq!((r.src_lang.as_str(), r.tgt_lang.as_str()), ("en", "fr"));
        assert_eq!(*r.source_ids.last().unwrap(), crate::tokenizer::EOS_ID);
        assert_eq!(r.source_ids[r.source_ids.len() - 2], fx.vocab.lang_id(&lang("en")).unwrap());
        assert_eq!(r.target_ids[0], fx.vocab.lang_id(&lang("fr")).unwrap());

        let clean_fx = Fixture::new(0.4, no_noise());
        let r = clean_fx.builder(1000).make_bitext_record(&packed, &Rng::from_seed(3)).unwrap();
        let words: Vec<String> = packed.source.concat();
        assert_eq!(r.source_ids, fx.vocab.encode(&words, &lang("en"), Framing::Source).unwrap().ids);
    }

    fn record(tokens: usize) -> TrainingRecord {
        TrainingRecord {
            task: Task::Mono,
            src_lang: lang("en"),
            tgt_lang: lang("en"),
            source_ids: vec![5; tokens / 2],
            target_ids: vec![6; tokens - tokens / 2],
            provenance: Provenance { items: vec![], truncated: None },
            source_clipped: false,
            trace: None,
        }
    }

    #[test]
    fn batches_of_one_at_tight_budget() {
        let batches: Vec<Batch> = assemble_batches(vec![record(10), record(10), record(10)], 10)
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(batches.len(), 3);
        assert!(batches.iter().all(|b| b.records.len() == 1));
    }

    #[test]
    fn record_over_budget_errors() {
        let mut it = assemble_batches(vec![record(4), record(11)], 10);
        assert!(it.next().unwrap().is_ok());
        assert!(matches!(it.next().unwrap(), Err(Error::RecordOverBudget { tokens: 11, budget: 10 })));
        assert!(it.next().is_none());
    }

    proptest! {
        #[test]
        fn batching_replays_the_stream(sizes in proptest::collection::vec(2usize..40, 0..60), budget in 40usize..200) {
            let records: Vec<TrainingRecord> = sizes.iter().enumerate().map(|(i, &n)| {
                let mut r = record(n);
                r.provenance.items.push(SourceRef { shard: 0, line: i });
                r
            }).collect();
            let batches: Vec<Batch> = assemble_batches(records.clone(), budget).collect::<Result<_>>().unwrap();
            let replay: Vec<TrainingRecord> = batches.iter().flat_map(|b| b.records.clone()).collect();
            prop_assert_eq!(&replay, &records);
            for b in &batches {
                prop_assert!(!b.records.is_empty());
                prop_assert!(b.token_count <= budget);
                prop_assert_eq!(b.token_count, b.records.iter().map(TrainingRecord::token_count).sum::<usize>());
            }
            let total: usize = batches.iter().map(|b| b.token_count).sum();
            prop_assert_eq!(total, sizes.iter().sum::<usize>());
        }
    }
}
