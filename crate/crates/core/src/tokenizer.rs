//! Word-level tokenization and the joint vocabulary.

use std::collections::{BTreeSet, HashMap};

use crate::corpus::{BitextShard, MonoShard};
use crate::error::{Error, Result};
use crate::lang::LanguageId;
use crate::par::{self, Exec};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const MASK: &str = "<mask>";

const FIXED_SPECIALS: [&str; 5] = [PAD, UNK, BOS, EOS, MASK];

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const BOS_ID: u32 = 2;
pub const EOS_ID: u32 = 3;
pub const MASK_ID: u32 = 4;

pub fn lang_tag(lang: &LanguageId) -> String {
    format!("<lang_{lang}>")
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '¡' | '¿' | '«' | '»' | '“' | '”' | '‘' | '’' | '„' | '…' | '\u{2014}' | '\u{2013}' | '。' | '、' | '，'
                | '！' | '？' | '：' | '；' | '।' | '؟' | '،'
        )
}

/// Splits on Unicode whitespace, then peels leading and trailing punctuation
/// off each chunk one character at a time. Interior punctuation stays put, so
/// `l'eau` is one token while `dog.` is two.
pub fn tokenize_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let lead = chars.iter().take_while(|c| is_punct(**c)).count();
        if lead == chars.len() {
            out.extend(chars.iter().map(char::to_string));
            continue;
        }
        let trail = chars.iter().rev().take_while(|c| is_punct(**c)).count();
        out.extend(chars[..lead].iter().map(char::to_string));
        out.push(chars[lead..chars.len() - trail].iter().collect());
        out.extend(chars[chars.len() - trail..].iter().map(char::to_string));
    }
    out
}

/// Ids plus the language they are framed for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSeq {
    pub ids: Vec<u32>,
    pub lang: LanguageId,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Where the framing tokens go.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Framing {
    /// `tokens <lang> </s>`
    Source,
    /// `<lang> tokens </s>`
    Target,
}

/// Number of framing tokens added by [`Vocab::encode`].
pub const FRAMING_LEN: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    n_specials: usize,
}

impl Vocab {
    /// Keeps the `size - specials` most frequent words, ties broken
    /// lexicographically.
    pub fn from_counts(
        counts: &HashMap<String, u64>,
        langs: &BTreeSet<LanguageId>,
        size: usize,
    ) -> Result<Self> {
        let n_specials = FIXED_SPECIALS.len() + langs.len();
        if size <= n_specials {
            return Err(Error::VocabTooSmall {
                size,
                specials: n_specials,
            });
        }
        let mut tokens: Vec<String> = FIXED_SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(langs.iter().map(lang_tag));

        let mut ranked: Vec<(&String, &u64)> = counts.iter().filter(|(w, _)| !w.is_empty()).collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        tokens.extend(ranked.into_iter().take(size - n_specials).map(|(w, _)| w.clone()));
        Self::from_tokens(tokens)
    }

    /// Rebuilds from the id-ordered token list, validating the special layout.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        for (i, s) in FIXED_SPECIALS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*s) {
                return Err(Error::BadVocab(format!("expected {s} at id {i}")));
            }
        }
        let n_tags = tokens[FIXED_SPECIALS.len()..]
            .iter()
            .take_while(|t| t.starts_with("<lang_") && t.ends_with('>'))
            .count();
        let tags = &tokens[FIXED_SPECIALS.len()..FIXED_SPECIALS.len() + n_tags];
        if tags.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::BadVocab("language tags are not sorted".into()));
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(Error::BadVocab(format!("duplicate token {t:?}")));
            }
        }
        Ok(Vocab {
            tokens,
            ids,
            n_specials: FIXED_SPECIALS.len() + n_tags,
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let tokens: Vec<String> = serde_json::from_str(s).map_err(|e| Error::json("vocab", e))?;
        Self::from_tokens(tokens)
    }

    /// JSON array of tokens in id order.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(&self.tokens).expect("vocab serializes");
        s.push('\n');
        s
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn num_specials(&self) -> usize {
        self.n_specials
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn word_id(&self, word: &str) -> u32 {
        self.id(word).unwrap_or(UNK_ID)
    }

    pub fn lang_id(&self, lang: &LanguageId) -> Result<u32> {
        self.id(&lang_tag(lang))
            .ok_or_else(|| Error::Config(format!("vocabulary has no tag for language {lang}")))
    }

    pub fn token(&self, id: u32) -> Result<&str> {
        self.tokens
            .get(id as usize)
            .map(String::as_str)
            .ok_or(Error::IdOutOfRange {
                id,
                size: self.tokens.len(),
            })
    }

    /// Encodes words with framing. OOV words become UNK; the literal `<mask>`
    /// word maps to MASK.
    pub fn encode(&self, words: &[String], lang: &LanguageId, framing: Framing) -> Result<TokenSeq> {
        self.encode_segments(&[words], lang, framing)
    }

    /// Encodes several segments separated by EOS, framed once.
    pub fn encode_segments<S: AsRef<[String]>>(
        &self,
        segments: &[S],
        lang: &LanguageId,
        framing: Framing,
    ) -> Result<TokenSeq> {
        let tag = self.lang_id(lang)?;
        let body: usize = segments.iter().map(|s| s.as_ref().len()).sum();
        let mut ids = Vec::with_capacity(body + segments.len() + 1);
        if framing == Framing::Target {
            ids.push(tag);
        }
        for (i, seg) in segments.iter().enumerate() {
            if i > 0 {
                ids.push(EOS_ID);
            }
            ids.extend(seg.as_ref().iter().map(|w| self.word_id(w)));
        }
        if framing == Framing::Source {
            ids.push(tag);
        }
        ids.push(EOS_ID);
        Ok(TokenSeq {
            ids,
            lang: lang.clone(),
        })
    }

    /// Words of a sequence with framing, padding and separators removed.
    pub fn decode(&self, seq: &TokenSeq) -> Result<Vec<String>> {
        Ok(self.decode_segments(seq)?.into_iter().flatten().collect())
    }

    /// Words split at EOS separators, framing removed.
    pub fn decode_segments(&self, seq: &TokenSeq) -> Result<Vec<Vec<String>>> {
        let mut segments = vec![Vec::new()];
        for &id in &seq.ids {
            let tok = self.token(id)?;
            match id {
                PAD_ID | BOS_ID => {}
                EOS_ID => segments.push(Vec::new()),
                _ if (id as usize) >= FIXED_SPECIALS.len() && (id as usize) < self.n_specials => {}
                _ => segments.last_mut().expect("nonempty").push(tok.to_owned()),
            }
        }
        // the closing EOS opens a trailing empty segment
        if segments.len() > 1 && segments.last().is_some_and(Vec::is_empty) {
            segments.pop();
        }
        Ok(segments)
    }
}

/// Word frequencies over raw sentences.
pub fn count_words(sentences: &[&str], exec: Exec) -> HashMap<String, u64> {
    par::map_reduce(
        exec,
        sentences,
        HashMap::new,
        |s| {
            let mut m = HashMap::new();
            for w in tokenize_words(s) {
                *m.entry(w).or_insert(0u64) += 1;
            }
            m
        },
        merge_counts,
    )
}

fn merge_counts(mut a: HashMap<String, u64>, b: HashMap<String, u64>) -> HashMap<String, u64> {
    if a.len() < b.len() {
        return merge_counts(b, a);
    }
    for (w, n) in b {
        *a.entry(w).or_insert(0) += n;
    }
    a
}

/// All sentences of the given shards, both bitext sides included.
pub fn corpus_sentences<'a>(mono: &'a [MonoShard], bitext: &'a [BitextShard]) -> Vec<&'a str> {
    let mut out: Vec<&str> = mono.iter().flat_map(|s| s.sentences.iter().map(String::as_str)).collect();
    for shard in bitext {
        for (s, t) in &shard.pairs {
            out.push(s);
            out.push(t);
        }
    }
    out
}

/// Builds the joint vocabulary over every shard. `extra_langs` adds tags for
/// languages that only appear as replacement targets.
pub fn build_vocab(
    mono: &[MonoShard],
    bitext: &[BitextShard],
    extra_langs: &BTreeSet<LanguageId>,
    size: usize,
    exec: Exec,
) -> Result<Vocab> {
    let mut langs: BTreeSet<LanguageId> = extra_langs.clone();
    langs.extend(mono.iter().map(|s| s.lang.clone()));
    for b in bitext {
        langs.insert(b.direction.src.clone());
        langs.insert(b.direction.tgt.clone());
    }
    let counts = count_words(&corpus_sentences(mono, bitext), exec);
    Vocab::from_counts(&counts, &langs, size)
}

/// (UNK tokens, total tokens) over raw sentences.
pub fn unk_stats(vocab: &Vocab, sentences: &[&str], exec: Exec) -> (u64, u64) {
    par::map_reduce(
        exec,
        sentences,
        || (0, 0),
        |s| {
            let words = tokenize_words(s);
            let unk = words.iter().filter(|w| vocab.id(w).is_none()).count() as u64;
            (unk, words.len() as u64)
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    )
}
