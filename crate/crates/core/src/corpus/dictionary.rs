use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lang::{Direction, LanguageId};

/// Directional bilingual dictionaries, one table per `src-tgt` file.
///
/// Translations for a word are kept in first-seen order with duplicates
/// removed. Multi-word translations are stored verbatim.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dictionary {
    tables: BTreeMap<Direction, HashMap<String, Vec<String>>>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, direction: Direction, word: &str, translation: &str) {
        let entry = self
            .tables
            .entry(direction)
            .or_default()
            .entry(word.to_owned())
            .or_default();
        if !entry.iter().any(|t| t == translation) {
            entry.push(translation.to_owned());
        }
    }

    /// Translations of `word` (in language `src`) into `tgt`. Empty when absent.
    pub fn translations(&self, src: &LanguageId, word: &str, tgt: &LanguageId) -> &[String] {
        let key = Direction {
            src: src.clone(),
            tgt: tgt.clone(),
        };
        self.tables
            .get(&key)
            .and_then(|t| t.get(word))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Source-agnostic lookup of `word` into `tgt`, merged across every
    /// dictionary targeting `tgt`.
    pub fn lookup(&self, word: &str, tgt: &LanguageId) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for (dir, table) in &self.tables {
            if &dir.tgt != tgt {
                continue;
            }
            for t in table.get(word).into_iter().flatten() {
                if !out.contains(&t.as_str()) {
                    out.push(t);
                }
            }
        }
        out
    }

    /// Number of source entries with at least one translation, per target language.
    pub fn coverage(&self) -> BTreeMap<LanguageId, u64> {
        let mut cov = BTreeMap::new();
        for (dir, table) in &self.tables {
            *cov.entry(dir.tgt.clone()).or_insert(0) += table.len() as u64;
        }
        cov
    }

    pub fn directions(&self) -> impl Iterator<Item = &Direction> {
        self.tables.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.values().all(HashMap::is_empty)
    }
}

/// Loads every `<src>-<tgt>.txt` in `dir` whose languages are both in `langs`.
///
/// Each line is `word<whitespace>translation`; everything after the first
/// whitespace run is the translation. Malformed lines are skipped with a warning.
pub fn load_dictionary(dir: &Path, langs: &BTreeSet<LanguageId>) -> Result<Dictionary> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(stem) = name.to_str().and_then(|n| n.strip_suffix(".txt")) else {
            continue;
        };
        let Ok(direction) = stem.parse::<Direction>() else {
            continue;
        };
        if langs.contains(&direction.src) && langs.contains(&direction.tgt) {
            files.push((direction, entry.path()));
        }
    }
    if files.is_empty() {
        let langs = langs.iter().map(LanguageId::as_str).collect::<Vec<_>>().join(",");
        return Err(Error::NoDictionary {
            dir: dir.to_owned(),
            langs,
        });
    }
    files.sort();

    let mut dict = Dictionary::new();
    for (direction, path) in files {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once(char::is_whitespace) {
                Some((word, translation)) if !translation.trim().is_empty() => {
                    dict.insert(direction.clone(), word, translation.trim());
                }
                _ => log::warn!("{}:{}: no translation, skipped", path.display(), i + 1),
            }
        }
    }
    Ok(dict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::lang;

    fn langs(codes: &[&str]) -> BTreeSet<LanguageId> {
        codes.iter().map(|c| lang(c)).collect()
    }

    fn dir_with(files: &[(&str, &str)]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (name, body) in files {
            fs::write(dir.path().join(name), body).unwrap();
        }
        dir
    }

    #[test]
    fn single_entry() {
        let d = dir_with(&[("en-fr.txt", "dog chien\n")]);
        let dict = load_dictionary(d.path(), &langs(&["en", "fr"])).unwrap();
        assert_eq!(dict.translations(&lang("en"), "dog", &lang("fr")), ["chien"]);
        assert_eq!(dict.lookup("dog", &lang("fr")), ["chien"]);
    }

    #[test]
    fn alternatives_accumulate_and_dedupe() {
        let d = dir_with(&[("en-fr.txt", "dog chien\ndog clebs\ndog chien\n")]);
        let dict = load_dictionary(d.path(), &langs(&["en", "fr"])).unwrap();
        let t = dict.translations(&lang("en"), "dog", &lang("fr"));
        assert_eq!(t, ["chien", "clebs"]);
        assert_eq!(dict.coverage()[&lang("fr")], 1);
    }

    #[test]
    fn absent_word_is_empty_not_error() {
        let d = dir_with(&[("en-fr.txt", "dog chien\n")]);
        let dict = load_dictionary(d.path(), &langs(&["en", "fr"])).unwrap();
        assert!(dict.translations(&lang("en"), "cat", &lang("fr")).is_empty());
        assert!(dict.lookup("cat", &lang("fr")).is_empty());
        assert!(dict.lookup("dog", &lang("de")).is_empty());
    }

    #[test]
    fn multi_word_translation_and_tabs() {
        let d = dir_with(&[("en-fr.txt", "potato\tpomme de terre\nbroken\n")]);
        let dict = load_dictionary(d.path(), &langs(&["en", "fr"])).unwrap();
        assert_eq!(dict.translations(&lang("en"), "potato", &lang("fr")), ["pomme de terre"]);
        assert!(dict.translations(&lang("en"), "broken", &lang("fr")).is_empty());
    }

    #[test]
    fn directional_no_inversion() {
        let d = dir_with(&[("en-fr.txt", "dog chien\n")]);
        let dict = load_dictionary(d.path(), &langs(&["en", "fr"])).unwrap();
        assert!(dict.translations(&lang("fr"), "chien", &lang("en")).is_empty());
    }

    #[test]
    fn filters_by_requested_languages() {
        let d = dir_with(&[("en-fr.txt", "dog chien\n"), ("en-de.txt", "dog Hund\n"), ("README", "x")]);
        let dict = load_dictionary(d.path(), &langs(&["en", "de"])).unwrap();
        assert_eq!(dict.directions().count(), 1);
        let err = load_dictionary(d.path(), &langs(&["ne", "si"])).unwrap_err();
        assert!(matches!(err, Error::NoDictionary { .. }));
    }

    #[test]
    fn lookup_is_pure() {
        let d = dir_with(&[("en-fr.txt", "dog chien\ndog clebs\n"), ("de-fr.txt", "Hund chien\n")]);
        let dict = load_dictionary(d.path(), &langs(&["en", "fr", "de"])).unwrap();
        let a = dict.lookup("dog", &lang("fr"));
        let b = dict.lookup("dog", &lang("fr"));
        assert_eq!(a, b);
        assert_eq!(dict.coverage()[&lang("fr")], 2);
    }
}
