//! Re-checks an emission directory against the corpus and config recorded in
//! its manifest.
//!
//! Per-record checks (format, reconstruction, bitext purity, packing, masking,
//! replacements) are exact. Aggregate checks (replacement rate, task mix)
//! compare counts with their analytic expectation and fail beyond
//! [`Z_LIMIT`] standard deviations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lang::LanguageId;
use crate::noising::NoiseConfig;
use crate::par::{self, Exec};
use crate::pipeline::{sha256_hex, EmissionManifest, Prepared, VOCAB_FILE};
use crate::records::{packed_source_len, packed_target_len, TrainingRecord};
use crate::sampler::{total_variation, MixPlan, Task};
use crate::tokenizer::{Framing, TokenSeq, Vocab, EOS_ID, MASK_ID};

/// Two-sided bound, in standard deviations, for aggregate statistics.
pub const Z_LIMIT: f64 = 4.0;

const MAX_EXAMPLES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    /// Records (or categories) examined.
    pub checked: usize,
    pub violations: usize,
    pub detail: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub examples: Vec<String>,
}

impl Check {
    fn from_violations(name: &str, checked: usize, found: Vec<String>, detail: String) -> Self {
        let status = if checked == 0 {
            Status::Skip
        } else if found.is_empty() {
            Status::Pass
        } else {
            Status::Fail
        };
        Check {
            name: name.into(),
            status,
            checked,
            violations: found.len(),
            detail,
            examples: found.into_iter().take(MAX_EXAMPLES).collect(),
        }
    }

    fn skip(name: &str, detail: &str) -> Self {
        Check {
            name: name.into(),
            status: Status::Skip,
            checked: 0,
            violations: 0,
            detail: detail.into(),
            examples: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub dir: String,
    pub records: usize,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(out, "{} {}: {}", c.status.as_str(), c.name, c.detail);
            for e in &c.examples {
                let _ = writeln!(out, "    {e}");
            }
            if c.violations > c.examples.len() {
                let _ = writeln!(out, "    ... {} more", c.violations - c.examples.len());
            }
        }
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "verify {}: {} ({} records)", self.dir, verdict, self.records);
        out
    }
}

struct Line {
    index: usize,
    file: String,
    line: usize,
    record: std::result::Result<TrainingRecord, String>,
}

impl Line {
    fn label(&self) -> String {
        format!("record {} ({}:{})", self.index, self.file, self.line)
    }
}

#[derive(Default)]
struct Findings {
    format: Vec<String>,
    reconstruction: Vec<String>,
    purity: Vec<String>,
    packing: Vec<String>,
    masking: Vec<String>,
    replacements: Vec<String>,
    mask: Option<(usize, usize)>,
    dict: Option<DictStats>,
}

#[derive(Clone, Copy, Default)]
struct DictStats {
    words: usize,
    draws: usize,
    draw_words: usize,
    replaced: usize,
    expected: f64,
    variance: f64,
}

/// Verifies the emission in `dir`.
pub fn verify_dir(dir: &Path, exec: Exec) -> Result<VerifyReport> {
    let manifest = EmissionManifest::read(dir)?;
    let vocab_path = dir.join(VOCAB_FILE);
    let vocab_text = fs::read_to_string(&vocab_path).map_err(|e| Error::io(&vocab_path, e))?;
    let vocab = Vocab::from_json(&vocab_text)?;
    let prepared = Prepared::with_vocab(manifest.config.clone(), Some(vocab), exec)?;

    let (lines, manifest_check) = read_lines(dir, &manifest, &vocab_text)?;
    let mut checks = vec![manifest_check];
    let mut corpus_issues = Vec::new();
    if prepared.manifest != manifest.corpus {
        corpus_issues.push("corpus sizes differ from the emission manifest".to_owned());
    }
    if prepared.plan != manifest.plan {
        corpus_issues.push("sampling plan differs from the emission manifest".to_owned());
    }
    checks.push(Check::from_violations("corpus", 1, corpus_issues, "corpus and plan rebuilt from the recorded config".into()));

    let findings = par::map(exec, &lines, |l| match &l.record {
        Ok(r) => check_record(r, &prepared),
        Err(e) => Findings {
            format: vec![e.clone()],
            ..Default::default()
        },
    });

    let records: Vec<&TrainingRecord> = lines.iter().filter_map(|l| l.record.as_ref().ok()).collect();
    let count = |pred: &dyn Fn(&TrainingRecord) -> bool| records.iter().filter(|r| pred(r)).count();
    let monolingual = count(&|r| r.task != Task::Bitext);
    let bitext = count(&|r| r.task == Task::Bitext);
    let traced = count(&|r| r.trace.is_some());
    let traced_dict = count(&|r| r.task == Task::Dict && r.trace.is_some());

    let collect = |pick: fn(&Findings) -> &Vec<String>| -> Vec<String> {
        lines
            .iter()
            .zip(&findings)
            .flat_map(|(l, f)| pick(f).iter().map(move |m| format!("{}: {m}", l.label())))
            .collect()
    };

    checks.push(Check::from_violations(
        "format",
        lines.len(),
        collect(|f| &f.format),
        format!("{} records parsed; ids, lengths and framing", lines.len()),
    ));
    checks.push(Check::from_violations(
        "reconstruction",
        monolingual,
        collect(|f| &f.reconstruction),
        format!("{monolingual} mono/dict targets against the clean corpus text"),
    ));
    checks.push(Check::from_violations(
        "bitext_purity",
        bitext,
        collect(|f| &f.purity),
        format!("{bitext} bitext targets against the clean references"),
    ));
    checks.push(Check::from_violations(
        "packing",
        bitext,
        collect(|f| &f.packing),
        format!("{bitext} bitext records: length and segment alignment"),
    ));

    let (words, masked) = findings
        .iter()
        .filter_map(|f| f.mask)
        .fold((0, 0), |(w, m), (a, b)| (w + a, m + b));
    let mask_detail = if words > 0 {
        format!(
            "{traced} traced records, masked fraction {:.4} (mask_ratio {})",
            masked as f64 / words as f64,
            prepared.config.noise.mask_ratio
        )
    } else {
        "no traced records (emit with --trace)".into()
    };
    checks.push(Check::from_violations("masking", traced, collect(|f| &f.masking), mask_detail));

    if traced_dict == 0 {
        checks.push(Check::skip("replacements", "no traced dict records (emit with --trace)"));
    } else {
        let stats = findings.iter().filter_map(|f| f.dict).fold(DictStats::default(), |a, b| DictStats {
            words: a.words + b.words,
            draws: a.draws + b.draws,
            draw_words: a.draw_words + b.draw_words,
            replaced: a.replaced + b.replaced,
            expected: a.expected + b.expected,
            variance: a.variance + b.variance,
        });
        let mut found = collect(|f| &f.replacements);
        found.extend(replacement_rate(&stats, prepared.config.dict_noise.p_r));
        let w = stats.words.max(1) as f64;
        let p_r = prepared.config.dict_noise.p_r;
        let coverage = if p_r > 0.0 { stats.expected / (p_r * w) } else { 0.0 };
        let detail = format!(
            "{traced_dict} traced dict records, {} words: replaced {:.4}, expected {:.4} = p_r {p_r} x coverage {coverage:.4}",
            stats.words,
            stats.replaced as f64 / w,
            stats.expected / w,
        );
        checks.push(Check::from_violations("replacements", traced_dict, found, detail));
    }

    checks.push(task_mix(&records, &manifest.plan));

    let passed = checks.iter().all(|c| c.status != Status::Fail);
    Ok(VerifyReport {
        dir: dir.display().to_string(),
        records: lines.len(),
        passed,
        checks,
    })
}

fn read_lines(dir: &Path, manifest: &EmissionManifest, vocab_text: &str) -> Result<(Vec<Line>, Check)> {
    let mut issues = Vec::new();
    let mut lines = Vec::new();
    let mut tokens = 0;
    let mut tasks: BTreeMap<Task, usize> = BTreeMap::new();
    let budget = manifest.config.token_budget;
    for entry in &manifest.batches {
        let path = dir.join(&entry.file);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                issues.push(format!("{}: {e}", entry.file));
                continue;
            }
        };
        let mut batch_records = 0;
        let mut batch_tokens = 0;
        for (i, raw) in text.lines().enumerate() {
            let record = serde_json::from_str::<TrainingRecord>(raw).map_err(|e| format!("unparseable line: {e}"));
            if let Ok(r) = &record {
                batch_tokens += r.token_count();
                *tasks.entry(r.task).or_default() += 1;
            }
            batch_records += 1;
            lines.push(Line {
                index: lines.len(),
                file: entry.file.clone(),
                line: i + 1,
                record,
            });
        }
        tokens += batch_tokens;
        if batch_records != entry.records || batch_tokens != entry.tokens {
            issues.push(format!(
                "{}: {batch_records} records / {batch_tokens} tokens on disk, manifest says {} / {}",
                entry.file, entry.records, entry.tokens
            ));
        }
        if batch_records == 0 || batch_tokens > budget {
            issues.push(format!("{}: batch empty or over the {budget}-token budget", entry.file));
        }
    }
    let listed: BTreeSet<&str> = manifest.batches.iter().map(|b| b.file.as_str()).collect();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let name = entry.map_err(|e| Error::io(dir, e))?.file_name();
        let name = name.to_string_lossy();
        if name.starts_with("batch-") && !listed.contains(name.as_ref()) {
            issues.push(format!("{name}: batch file not listed in the manifest"));
        }
    }
    if lines.len() != manifest.record_count || tokens != manifest.token_count || manifest.batches.len() != manifest.batch_count {
        issues.push(format!(
            "totals on disk: {} records, {tokens} tokens, {} batches; manifest: {}, {}, {}",
            lines.len(),
            manifest.batches.len(),
            manifest.record_count,
            manifest.token_count,
            manifest.batch_count
        ));
    }
    let parsed = lines.iter().filter(|l| l.record.is_ok()).count();
    if parsed == lines.len() && tasks != manifest.task_counts {
        issues.push(format!("task counts on disk {tasks:?} differ from manifest {:?}", manifest.task_counts));
    }
    if sha256_hex(vocab_text.as_bytes()) != manifest.vocab_hash {
        issues.push("vocab.json hash differs from the manifest".into());
    }
    let check = Check::from_violations(
        "manifest",
        manifest.batches.len().max(1),
        issues,
        format!("{} batches, {} records, {} tokens", manifest.batch_count, manifest.record_count, manifest.token_count),
    );
    Ok((lines, check))
}

fn first_difference(a: &[u32], b: &[u32]) -> usize {
    a.iter().zip(b).position(|(x, y)| x != y).unwrap_or(a.len().min(b.len()))
}

fn check_record(r: &TrainingRecord, p: &Prepared) -> Findings {
    let mut f = Findings::default();
    let vocab = &p.vocab;
    let max_len = p.config.max_len;
    let size = vocab.len();
    if let Some(id) = r.source_ids.iter().chain(&r.target_ids).find(|&&id| id as usize >= size) {
        f.format.push(format!("token id {id} out of range for vocabulary of {size}"));
        return f;
    }
    if r.source_ids.len() > max_len || r.target_ids.len() > max_len {
        f.format.push(format!(
            "lengths {}/{} exceed max_len {max_len}",
            r.source_ids.len(),
            r.target_ids.len()
        ));
    }
    let (Ok(src_tag), Ok(tgt_tag)) = (vocab.lang_id(&r.src_lang), vocab.lang_id(&r.tgt_lang)) else {
        f.format.push("language without a vocabulary tag".into());
        return f;
    };
    let s = &r.source_ids;
    if s.len() < 2 || s[s.len() - 1] != EOS_ID || s[s.len() - 2] != src_tag {
        f.format.push("source framing is not `... <lang> </s>`".into());
    }
    let t = &r.target_ids;
    if t.len() < 2 || t[0] != tgt_tag || t[t.len() - 1] != EOS_ID {
        f.format.push("target framing is not `<lang> ... </s>`".into());
    }
    if r.provenance.items.is_empty() {
        f.format.push("empty provenance".into());
        return f;
    }
    let source_words = match r.task {
        Task::Mono | Task::Dict => check_monolingual(r, p, &mut f),
        Task::Bitext => check_bitext(r, p, &mut f),
    };
    if let (Some(trace), Some(words)) = (&r.trace, source_words) {
        check_trace(r, trace, words, &p.config.noise, &mut f);
        if r.task == Task::Dict {
            check_replacements(r, trace, p, &mut f);
        }
    }
    f
}

/// Returns the clean word count of each sentence, in window order.
fn check_monolingual(r: &TrainingRecord, p: &Prepared, f: &mut Findings) -> Option<Vec<Vec<String>>> {
    if r.src_lang != r.tgt_lang {
        f.reconstruction.push(format!("{} record with {} -> {}", r.task, r.src_lang, r.tgt_lang));
        return None;
    }
    let items = &r.provenance.items;
    let shard = items[0].shard;
    let consecutive = items.windows(2).all(|w| w[1].shard == shard && w[1].line == w[0].line + 1);
    if !consecutive || p.corpus.mono.get(shard).is_none_or(|s| s.lang != r.src_lang) {
        f.reconstruction.push("provenance is not a window of one shard in the record language".into());
        return None;
    }
    let mut sentences = Vec::new();
    for &at in items {
        let Some(words) = p.corpus.mono_sentence(at) else {
            f.reconstruction.push(format!("provenance line {} of shard {shard} does not exist", at.line));
            return None;
        };
        sentences.push(words.to_vec());
    }
    if let Some(t) = r.provenance.truncated {
        if sentences.len() != 1 || t.source > sentences[0].len() {
            f.reconstruction.push("truncation on a multi-sentence window".into());
            return None;
        }
        sentences[0].truncate(t.source);
    }
    let words: Vec<String> = sentences.concat();
    let expected = p.vocab.encode(&words, &r.src_lang, Framing::Target).expect("tag checked");
    if expected.ids != r.target_ids {
        f.reconstruction.push(format!(
            "target differs from the clean text at token {}",
            first_difference(&expected.ids, &r.target_ids)
        ));
    }
    let budget = p.config.max_len - crate::tokenizer::FRAMING_LEN;
    if words.len() > budget {
        f.reconstruction.push(format!("window of {} words exceeds max_len", words.len()));
    }
    Some(sentences)
}

fn check_bitext(r: &TrainingRecord, p: &Prepared, f: &mut Findings) -> Option<Vec<Vec<String>>> {
    if r.src_lang == r.tgt_lang {
        f.purity.push(format!("bitext record with {} -> {}", r.src_lang, r.tgt_lang));
        return None;
    }
    let items = &r.provenance.items;
    let unique: BTreeSet<_> = items.iter().collect();
    if unique.len() != items.len() {
        f.packing.push("a pair appears twice in one record".into());
    }
    let mut sources = Vec::new();
    let mut targets = Vec::new();
    for &at in items {
        let direction_ok = p
            .corpus
            .bitext
            .get(at.shard)
            .is_some_and(|s| s.direction.src == r.src_lang && s.direction.tgt == r.tgt_lang);
        match p.corpus.bitext_pair(at).filter(|_| direction_ok) {
            Some((s, t)) => {
                sources.push(s.to_vec());
                targets.push(t.to_vec());
            }
            None => {
                f.purity.push(format!("provenance {}:{} is not a pair of this direction", at.shard, at.line));
                return None;
            }
        }
    }
    if let Some(t) = r.provenance.truncated {
        if items.len() != 1 || t.source > sources[0].len() || t.target > targets[0].len() {
            f.packing.push("truncation on a multi-pair record".into());
            return None;
        }
        sources[0].truncate(t.source);
        targets[0].truncate(t.target);
    }
    let expected = p
        .vocab
        .encode_segments(&targets, &r.tgt_lang, Framing::Target)
        .expect("tag checked");
    if expected.ids != r.target_ids {
        f.purity.push(format!(
            "target differs from the clean reference at token {}",
            first_difference(&expected.ids, &r.target_ids)
        ));
    }
    let max_len = p.config.max_len;
    let src_words: usize = sources.iter().map(Vec::len).sum();
    let tgt_words: usize = targets.iter().map(Vec::len).sum();
    if packed_source_len(src_words) > max_len || packed_target_len(tgt_words, items.len()) > max_len {
        f.packing.push(format!("packed {} pairs beyond max_len {max_len}", items.len()));
    }
    let seq = TokenSeq {
        ids: r.target_ids.clone(),
        lang: r.tgt_lang.clone(),
    };
    match p.vocab.decode_segments(&seq) {
        Ok(segs) if segs.len() == items.len() => {}
        Ok(segs) => f.packing.push(format!("{} target segments for {} source segments", segs.len(), items.len())),
        Err(e) => f.packing.push(e.to_string()),
    }
    if let Some(trace) = &r.trace {
        if trace.words != src_words || trace.order.len() != items.len() {
            f.packing.push(format!(
                "trace covers {} words in {} segments, provenance {src_words} in {}",
                trace.words,
                trace.order.len(),
                items.len()
            ));
        }
    }
    Some(sources)
}

fn check_trace(
    r: &TrainingRecord,
    trace: &crate::records::NoiseTrace,
    sentences: Vec<Vec<String>>,
    noise: &NoiseConfig,
    f: &mut Findings,
) {
    let clean: usize = sentences.iter().map(Vec::len).sum();
    let grown: usize = trace.replacements.iter().map(|x| x.len.saturating_sub(1)).sum();
    if trace.words != clean + grown {
        f.masking.push(format!("trace has {} input words, expected {}", trace.words, clean + grown));
    }
    let mut order = trace.order.clone();
    order.sort_unstable();
    if order != (0..sentences.len()).collect::<Vec<_>>() {
        f.masking.push("sentence order is not a permutation of the window".into());
    }
    if !noise.permute_sentences && trace.order.windows(2).any(|w| w[0] > w[1]) {
        f.masking.push("sentences permuted although permutation is off".into());
    }
    let target = noise.mask_target(trace.words);
    if trace.masked != target {
        f.masking.push(format!("{} words masked, expected {target} of {}", trace.masked, trace.words));
    }
    let mut end = 0;
    let mut total = 0;
    for (i, s) in trace.spans.iter().enumerate() {
        if s.len == 0 || (i > 0 && s.start < end) || s.end() > trace.words {
            f.masking.push(format!("span {i} at {}+{} overlaps or leaves the input", s.start, s.len));
        }
        end = s.end();
        total += s.len;
    }
    if total != trace.masked {
        f.masking.push(format!("spans cover {total} words, trace says {}", trace.masked));
    }
    if !r.source_clipped {
        let expected = trace.words - trace.masked + trace.spans.len() + crate::tokenizer::FRAMING_LEN;
        if r.source_ids.len() != expected {
            f.masking.push(format!("source has {} tokens, trace implies {expected}", r.source_ids.len()));
        }
        let masks = r.source_ids.iter().filter(|&&id| id == MASK_ID).count();
        if masks < trace.spans.len() {
            f.masking.push(format!("{masks} MASK tokens for {} spans", trace.spans.len()));
        }
    }
    f.mask = Some((trace.words, trace.masked));
}

fn check_replacements(r: &TrainingRecord, trace: &crate::records::NoiseTrace, p: &Prepared, f: &mut Findings) {
    let Some(sentences) = window_sentences(r, p) else {
        return;
    };
    let cfg = &p.config.dict_noise;
    let targets: Vec<&LanguageId> = cfg.languages.iter().filter(|l| **l != r.src_lang).collect();
    let dict = &p.corpus.dictionary;
    let mut stats = DictStats {
        words: trace.dict_words,
        draws: trace.dict_draws,
        replaced: trace.replacements.len(),
        ..Default::default()
    };
    let clean: usize = sentences.iter().map(Vec::len).sum();
    if trace.dict_words != clean {
        f.replacements.push(format!("trace offers {} words to the dictionary, window has {clean}", trace.dict_words));
    }
    if !targets.is_empty() {
        stats.draw_words = clean;
        for w in sentences.iter().flatten() {
            let covered = targets.iter().filter(|t| !dict.translations(&r.src_lang, w, t).is_empty()).count();
            let q = cfg.p_r * covered as f64 / targets.len() as f64;
            stats.expected += q;
            stats.variance += q * (1.0 - q);
        }
    }
    for rep in &trace.replacements {
        let word = sentences.get(rep.sentence).and_then(|s| s.get(rep.word));
        let ok = targets.contains(&&rep.lang)
            && word.is_some_and(|w| !dict.translations(&r.src_lang, w, &rep.lang).is_empty());
        if !ok {
            f.replacements.push(format!(
                "replacement of word {}/{} into {} has no dictionary entry",
                rep.sentence, rep.word, rep.lang
            ));
        }
    }
    f.dict = Some(stats);
}

fn window_sentences(r: &TrainingRecord, p: &Prepared) -> Option<Vec<Vec<String>>> {
    let mut out: Vec<Vec<String>> = r
        .provenance
        .items
        .iter()
        .map(|&at| p.corpus.mono_sentence(at).map(<[String]>::to_vec))
        .collect::<Option<_>>()?;
    if let (Some(t), Some(first)) = (r.provenance.truncated, out.first_mut()) {
        first.truncate(t.source);
    }
    Some(out)
}

fn replacement_rate(s: &DictStats, p_r: f64) -> Vec<String> {
    let mut out = Vec::new();
    let z = |obs: f64, mean: f64, var: f64| {
        if var > 0.0 {
            (obs - mean) / var.sqrt()
        } else if (obs - mean).abs() < 0.5 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let zr = z(s.replaced as f64, s.expected, s.variance);
    if zr.abs() > Z_LIMIT {
        out.push(format!(
            "{} replacements, expected {:.1} (z = {zr:.2})",
            s.replaced, s.expected
        ));
    }
    let n = s.draw_words as f64;
    let zd = z(s.draws as f64, p_r * n, n * p_r * (1.0 - p_r));
    if zd.abs() > Z_LIMIT {
        out.push(format!("{} language draws over {} words at p_r {p_r} (z = {zd:.2})", s.draws, s.draw_words));
    }
    out
}

/// Compares category counts with a multinomial expectation.
fn multinomial<K: Ord + std::fmt::Display>(
    family: &str,
    counts: &BTreeMap<K, usize>,
    probs: &BTreeMap<K, f64>,
    out: &mut Vec<String>,
) -> usize {
    let n: usize = counts.values().sum();
    if n == 0 {
        return 0;
    }
    for k in counts.keys() {
        if !probs.contains_key(k) {
            out.push(format!("{family}: {k} drawn but absent from the plan"));
        }
    }
    for (k, &p) in probs {
        let c = counts.get(k).copied().unwrap_or(0) as f64;
        let mean = n as f64 * p;
        let sd = (mean * (1.0 - p)).sqrt();
        if (c - mean).abs() > Z_LIMIT * sd + 1.0 {
            out.push(format!("{family}: {k} drawn {c} times, expected {mean:.1} +- {:.1}", Z_LIMIT * sd));
        }
    }
    probs.len()
}

fn task_mix(records: &[&TrainingRecord], plan: &MixPlan) -> Check {
    let mut tasks: BTreeMap<Task, usize> = BTreeMap::new();
    let mut mono: BTreeMap<LanguageId, usize> = BTreeMap::new();
    let mut dict: BTreeMap<LanguageId, usize> = BTreeMap::new();
    let mut bitext: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        *tasks.entry(r.task).or_default() += 1;
        match r.task {
            Task::Mono => *mono.entry(r.src_lang.clone()).or_default() += 1,
            Task::Dict => *dict.entry(r.src_lang.clone()).or_default() += 1,
            Task::Bitext => *bitext.entry(format!("{}-{}", r.src_lang, r.tgt_lang)).or_default() += 1,
        }
    }
    let mut found = Vec::new();
    let mut categories = multinomial("task", &tasks, &plan.task_probs, &mut found);
    categories += multinomial("mono", &mono, &plan.mono_probs, &mut found);
    if let Some(p) = &plan.dict_probs {
        categories += multinomial("dict", &dict, p, &mut found);
    } else if !dict.is_empty() {
        found.push("dict records without a dict distribution in the plan".into());
    }
    if let Some(p) = &plan.bitext_probs {
        let p: BTreeMap<String, f64> = p.iter().map(|(d, v)| (d.to_string(), *v)).collect();
        categories += multinomial("bitext", &bitext, &p, &mut found);
    } else if !bitext.is_empty() {
        found.push("bitext records without a bitext distribution in the plan".into());
    }
    let n = records.len().max(1) as f64;
    let freqs: BTreeMap<Task, f64> = tasks.iter().map(|(k, &c)| (*k, c as f64 / n)).collect();
    let detail = format!(
        "{} records over {categories} categories, task TV {:.4}",
        records.len(),
        total_variation(&freqs, &plan.task_probs)
    );
    let mut check = Check::from_violations("task_mix", records.len(), found, detail);
    check.checked = categories;
    check
}
