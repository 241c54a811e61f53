use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{BitextShard, Dictionary, MonoShard};
use crate::error::{Error, Result};
use crate::lang::{Direction, LanguageId};

/// Size statistics of the loaded data. Fields are declared in alphabetical
/// order and all maps are ordered, so the JSON form has sorted keys.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub bitext_sizes: BTreeMap<Direction, u64>,
    pub dict_coverage: BTreeMap<LanguageId, u64>,
    pub mono_sizes: BTreeMap<LanguageId, u64>,
}

impl CorpusManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::json("corpus manifest", e))
    }

    pub fn total_mono(&self) -> u64 {
        self.mono_sizes.values().sum()
    }

    pub fn total_bitext(&self) -> u64 {
        self.bitext_sizes.values().sum()
    }

    /// Multiplies every count by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        fn scale<K: Ord + Clone>(m: &BTreeMap<K, u64>, factor: u64) -> BTreeMap<K, u64> {
            m.iter().map(|(k, v)| (k.clone(), v * factor)).collect()
        }
        CorpusManifest {
            bitext_sizes: scale(&self.bitext_sizes, factor),
            dict_coverage: scale(&self.dict_coverage, factor),
            mono_sizes: scale(&self.mono_sizes, factor),
        }
    }
}

pub fn build_manifest(
    mono: &[MonoShard],
    bitext: &[BitextShard],
    dict: &Dictionary,
) -> Result<CorpusManifest> {
    if mono.is_empty() {
        return Err(Error::NoMonolingualData);
    }
    let mut seen = BTreeSet::new();
    let mut mono_sizes = BTreeMap::new();
    for shard in mono {
        if !seen.insert((shard.source_path.clone(), shard.lang.to_string())) {
            return Err(Error::DuplicateShard {
                path: shard.source_path.clone(),
                lang: shard.lang.to_string(),
            });
        }
        *mono_sizes.entry(shard.lang.clone()).or_insert(0) += shard.sentences.len() as u64;
    }
    let mut bitext_sizes = BTreeMap::new();
    for shard in bitext {
        if !seen.insert((shard.source_path.clone(), shard.direction.to_string())) {
            return Err(Error::DuplicateShard {
                path: shard.source_path.clone(),
                lang: shard.direction.to_string(),
            });
        }
        *bitext_sizes.entry(shard.direction.clone()).or_insert(0) += shard.pairs.len() as u64;
    }
    Ok(CorpusManifest {
        bitext_sizes,
        dict_coverage: dict.coverage(),
        mono_sizes,
    })
}
