//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use polyglot_pretrain::config::PipelineConfig;
use polyglot_pretrain::corpus::{CorpusManifest, Dictionary};
use polyglot_pretrain::noising::{dictionary_noise, span_mask, DictNoiseConfig, NoiseConfig};
use polyglot_pretrain::par::Exec;
use polyglot_pretrain::pipeline::{emit, hash_dir, EmissionManifest, Prepared};
use polyglot_pretrain::records::TrainingRecord;
use polyglot_pretrain::rng::Rng;
use polyglot_pretrain::sampler::{build_mix_plan, empirical_mix, SamplerConfig, Task};
use polyglot_pretrain::tokenizer::{TokenSeq, Vocab};
use polyglot_pretrain::verify::{verify_dir, Status};
use polyglot_pretrain::{Direction, LanguageId};

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn lang(code: &str) -> LanguageId {
    code.parse().unwrap()
}

fn toy_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy/toy.toml")
}

fn replacement_fidelity() -> Outcome {
    let start = Instant::now();
    let targets = ["fr", "es", "de", "it"].map(lang);
    let vocab: Vec<String> = (0..1000).map(|i| format!("w{i}")).collect();
    let src = lang("xx");
    let mut dict = Dictionary::new();
    for t in &targets {
        let dir = Direction::new(src.clone(), t.clone()).unwrap();
        for w in &vocab {
            dict.insert(dir.clone(), w, &format!("{w}_{t}"));
        }
    }
    let cfg = DictNoiseConfig {
        p_r: 0.4,
        languages: targets.to_vec(),
    };
    let n = 100_000;
    let words: Vec<String> = (0..n).map(|i| vocab[i % vocab.len()].clone()).collect();
    let out = dictionary_noise(&words, &src, &dict, &cfg, &mut Rng::from_seed(2024));
    let mut per_lang: BTreeMap<&LanguageId, u64> = targets.iter().map(|t| (t, 0)).collect();
    for r in &out.replacements {
        *per_lang.get_mut(&r.lang).unwrap() += 1;
    }
    let total = out.replacements.len() as f64;
    let frac = total / n as f64;
    let expected = total / targets.len() as f64;
    let chi2: f64 = per_lang.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((targets.len() - 1) as f64).unwrap().cdf(chi2);
    let elapsed = start.elapsed();
    outcome(
        (frac - 0.4).abs() <= 0.005 && p > 0.01 && elapsed < Duration::from_secs(10),
        format!("fraction {frac:.4} (0.4 +- 0.005), chi-square {chi2:.2} p = {p:.3}, {elapsed:.2?}"),
    )
}

fn random_manifest(rng: &mut ChaCha8Rng, langs: usize, max_size: u64) -> CorpusManifest {
    let codes: Vec<LanguageId> = (0..langs)
        .map(|i| lang(&format!("{}{}", (b'a' + (i / 26) as u8) as char, (b'a' + (i % 26) as u8) as char)))
        .map(|l| if l.as_str() == "en" { lang("zz") } else { l })
        .collect();
    let en = lang("en");
    let mut m = CorpusManifest::default();
    m.mono_sizes.insert(en.clone(), rng.random_range(1..=max_size));
    for l in &codes {
        m.mono_sizes.insert(l.clone(), rng.random_range(1..=max_size));
        if rng.random_bool(0.5) {
            m.bitext_sizes.insert(Direction::new(en.clone(), l.clone()).unwrap(), rng.random_range(1..=max_size));
        }
        if rng.random_bool(0.5) {
            m.bitext_sizes.insert(Direction::new(l.clone(), en.clone()).unwrap(), rng.random_range(1..=max_size));
        }
        if rng.random_bool(0.7) {
            m.dict_coverage.insert(l.clone(), rng.random_range(1..=1000));
        }
    }
    m
}

fn sampling_fidelity() -> Outcome {
    let start = Instant::now();
    let mut m = CorpusManifest::default();
    m.mono_sizes.insert(lang("en"), 1000);
    for d in ["en-fr", "fr-en", "en-de", "de-en"] {
        m.bitext_sizes.insert(d.parse().unwrap(), 1000);
    }
    let cfg = SamplerConfig {
        tasks: vec![Task::Bitext, Task::Mono],
        ..SamplerConfig::default()
    };
    let plan = build_mix_plan(&m, &cfg).unwrap();
    let analytic = plan.bitext_probs.clone().unwrap();
    let want = |d: &str| analytic[&d.parse::<Direction>().unwrap()];
    let exact = (want("en-fr") - 1.0 / 3.0).abs() < 1e-12 && (want("fr-en") - 1.0 / 6.0).abs() < 1e-12;
    let emp = empirical_mix(&plan, &m, Rng::from_seed(1), 100_000).unwrap();
    let tv4 = emp.tv["bitext"];
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for i in 0..3 {
        let m = random_manifest(&mut rng, 19, 20_000);
        let plan = build_mix_plan(&m, &SamplerConfig::default()).unwrap();
        let emp = empirical_mix(&plan, &m, Rng::from_seed(100 + i), 100_000).unwrap();
        worst = emp.tv.values().fold(worst, |a, &b| a.max(b));
    }
    let elapsed = start.elapsed();
    outcome(
        exact && tv4 < 0.01 && worst < 0.01 && elapsed < Duration::from_secs(30),
        format!("4-direction TV {tv4:.4} vs {{1/3, 1/6, 1/3, 1/6}}; 20-language manifests max TV {worst:.4}; {elapsed:.2?}"),
    )
}

fn scale_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..100 {
        let langs = rng.random_range(1..20);
        let m = random_manifest(&mut rng, langs, 1_000_000);
        let k = rng.random_range(2..10_000);
        let a = build_mix_plan(&m, &SamplerConfig::default()).unwrap().to_json();
        let b = build_mix_plan(&m.scaled(k), &SamplerConfig::default()).unwrap().to_json();
        if a != b {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} of 100 scaled manifests changed the plan bytes"))
}

fn mask_ratio_fidelity() -> Outcome {
    let cfg = NoiseConfig::default();
    let words: Vec<String> = (0..100).map(|i| format!("w{i}")).collect();
    let mut masked = 0usize;
    let mut overlaps = 0usize;
    for seed in 0..10_000u64 {
        let m = span_mask(&words, &cfg, &mut Rng::from_seed(seed));
        masked += m.masked;
        let mut covered = [false; 100];
        for s in &m.spans {
            for c in &mut covered[s.start..s.end()] {
                overlaps += usize::from(*c);
                *c = true;
            }
        }
    }
    let mean = masked as f64 / (10_000.0 * 100.0);
    outcome(
        (mean - 0.35).abs() <= 0.01 && overlaps == 0,
        format!("mean masked fraction {mean:.4} (0.35 +- 0.01), {overlaps} overlapping positions"),
    )
}

fn toy(seed: u64, records: usize, trace: bool) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(&toy_config()).unwrap();
    cfg.seed = seed;
    cfg.records = records;
    cfg.trace = trace;
    cfg
}

fn reconstruction_and_purity(tmp: &Path) -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for seed in [11u64, 23, 37, 41, 59] {
        let p = Prepared::load(toy(seed, 10_000, true), Exec::Parallel).unwrap();
        let dir = tmp.join(format!("recon-{seed}"));
        emit(&p, &dir, Exec::Parallel).unwrap();
        let report = verify_dir(&dir, Exec::Parallel).unwrap();
        let get = |n: &str| report.checks.iter().find(|c| c.name == n).unwrap();
        let (r, b) = (get("reconstruction"), get("bitext_purity"));
        let ok = r.status == Status::Pass && b.status == Status::Pass && report.passed;
        pass &= ok;
        details.push(format!("seed {seed}: {}+{} violations", r.violations, b.violations));
        if !ok {
            eprint!("{}", report.render());
        }
    }
    outcome(pass, format!("10^4 records x 5 seeds; {}", details.join(", ")))
}

fn end_to_end_determinism(tmp: &Path) -> Outcome {
    let bin = env!("CARGO_BIN_EXE_polyglot-pretrain");
    let cfg = toy_config();
    let mut hashes = Vec::new();
    for (name, jobs) in [("det-a", "0"), ("det-b", "0"), ("det-seq", "1")] {
        let dir = tmp.join(name);
        let status = Command::new(bin)
            .args(["--config", cfg.to_str().unwrap(), "--jobs", jobs, "--trace", "emit", "--records", "2000", "--out"])
            .arg(&dir)
            .stderr(Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        hashes.push(hash_dir(&dir).unwrap());
    }
    let same = hashes.iter().all(|h| *h == hashes[0]);
    outcome(
        same,
        format!("two emits plus a single-thread emit hash to {}", if same { &hashes[0][..16] } else { "different digests" }),
    )
}

fn read_records(dir: &Path) -> Vec<TrainingRecord> {
    let m = EmissionManifest::read(dir).unwrap();
    m.batches
        .iter()
        .flat_map(|b| {
            let text = std::fs::read_to_string(dir.join(&b.file)).unwrap();
            text.lines().map(|l| serde_json::from_str(l).unwrap()).collect::<Vec<_>>()
        })
        .collect()
}

fn packing(tmp: &Path) -> Outcome {
    let cfg = toy(5, 10_000, true);
    let max_len = cfg.max_len;
    let p = Prepared::load(cfg, Exec::Parallel).unwrap();
    let dir = tmp.join("packing");
    emit(&p, &dir, Exec::Parallel).unwrap();
    let vocab: Vocab = Vocab::from_json(&std::fs::read_to_string(dir.join("vocab.json")).unwrap()).unwrap();
    let mut bitext = 0;
    let mut multi = 0;
    let mut bad = Vec::new();
    for (i, r) in read_records(&dir).iter().enumerate() {
        if r.task != Task::Bitext {
            continue;
        }
        bitext += 1;
        let n = r.provenance.items.len();
        multi += usize::from(n > 1);
        let segs = vocab
            .decode_segments(&TokenSeq {
                ids: r.target_ids.clone(),
                lang: r.tgt_lang.clone(),
            })
            .unwrap()
            .len();
        let trace = r.trace.as_ref().unwrap();
        let unique: BTreeSet<_> = r.provenance.items.iter().collect();
        if r.source_ids.len() > max_len || r.target_ids.len() > max_len || segs != n || trace.order.len() != n || unique.len() != n {
            bad.push(i);
        }
    }
    let report = verify_dir(&dir, Exec::Parallel).unwrap();
    let packing = report.checks.iter().find(|c| c.name == "packing").unwrap();
    outcome(
        bad.is_empty() && bitext > 0 && packing.status == Status::Pass,
        format!(
            "{bitext} bitext records ({multi} with several pairs): {} violations, verify packing {}",
            bad.len(),
            packing.status.as_str()
        ),
    )
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let criteria: Vec<Criterion<'_>> = vec![
        ("replacement-rate fidelity", Box::new(replacement_fidelity)),
        ("sampling fidelity", Box::new(sampling_fidelity)),
        ("scale invariance", Box::new(scale_invariance)),
        ("mask-ratio fidelity", Box::new(mask_ratio_fidelity)),
        ("reconstruction & purity", Box::new(|| reconstruction_and_purity(tmp.path()))),
        ("end-to-end determinism", Box::new(|| end_to_end_determinism(tmp.path()))),
        ("packing", Box::new(|| packing(tmp.path()))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let o = check();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
