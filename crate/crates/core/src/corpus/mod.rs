//! Corpus ingestion: monolingual shards, bitext shards, bilingual dictionaries
//! and the size manifest that drives sampling.

mod dictionary;
mod loader;
mod manifest;

pub use dictionary::{load_dictionary, Dictionary};
pub use loader::{load_bitext, load_mono, BitextOptions, DEFAULT_REJECT_THRESHOLD};
pub use manifest::{build_manifest, CorpusManifest};

use crate::lang::{Direction, LanguageId};

/// One monolingual file: sentences in file order, blank lines removed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonoShard {
    pub lang: LanguageId,
    pub sentences: Vec<String>,
    pub source_path: String,
}

/// One aligned TSV file in a single direction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitextShard {
    pub direction: Direction,
    pub pairs: Vec<(String, String)>,
    pub source_path: String,
    /// Malformed lines skipped while loading.
    pub rejected: usize,
}

impl BitextShard {
    pub fn src_lang(&self) -> &LanguageId {
        &self.direction.src
    }

    pub fn tgt_lang(&self) -> &LanguageId {
        &self.direction.tgt
    }
}
