//! The per-seed pipeline with artifact caching. Every stage writes its
//! outputs under `<out>/seed-<s>/` and records a key in `manifest.json`: a
//! hash of the configuration it reads, chained through its upstream keys.
//! A stage reruns when its key changes, when one of its outputs is missing,
//! or when an upstream stage reran in the same invocation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use super::config::{RunConfig, Variant};
use super::report::{EvalReport, SeedResult};
use super::stages::{self, history_csv, BoxError};
use crate::encoder::SemanticEncoder;
use crate::miner::mine_pairs;
use crate::policy::PolicyModel;
use crate::records::{read_all, write_records, Candidate, PreferencePair, Record, TranslationTask, TripletRecord};
use crate::reward::annotate_pairs;

/// Fixed per-seed stages, in execution order. Each variant adds
/// `pref-<variant>` (except SFT) and `eval-<variant>`.
pub const STAGES: [&str; 8] = [
    "corpus", "sft", "sample", "compile", "mine", "triplets", "encoder", "annotate",
];

#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed for seed {seed} (artifacts so far in {}): {message}", dir.display())]
pub struct StageError {
    pub stage: String,
    pub seed: u64,
    pub dir: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: EvalReport,
    /// `seed-<s>/<stage>` for every stage that ran instead of being reused.
    pub recomputed: Vec<String>,
}

fn fnv_hex(text: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

fn toml_of<T: serde::Serialize>(value: &T) -> String {
    toml::to_string(value).unwrap_or_default()
}

struct SeedRun<'a> {
    seed: u64,
    dir: PathBuf,
    manifest: BTreeMap<String, String>,
    keys: BTreeMap<String, String>,
    dirty: BTreeSet<String>,
    recomputed: &'a mut Vec<String>,
}

impl SeedRun<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn fail(&self, stage: &str, message: impl ToString) -> StageError {
        StageError {
            stage: stage.to_string(),
            seed: self.seed,
            dir: self.dir.clone(),
            message: message.to_string(),
        }
    }

    fn stage<F>(&mut self, name: &str, deps: &[&str], material: String, outputs: &[&str], compute: F) -> Result<(), StageError>
    where
        F: FnOnce(&Self) -> Result<(), BoxError>,
    {
        let mut chain = format!("{name}\n{}\n{material}", self.seed);
        for d in deps {
            chain.push('\n');
            chain.push_str(self.keys.get(*d).map(String::as_str).unwrap_or("?"));
        }
        let key = fnv_hex(&chain);
        let stale = deps.iter().any(|d| self.dirty.contains(*d))
            || outputs.iter().any(|o| !self.path(o).exists())
            || self.manifest.get(name) != Some(&key);
        if stale {
            compute(self).map_err(|e| self.fail(name, e))?;
            self.manifest.insert(name.to_string(), key.clone());
            let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serialises");
            std::fs::write(self.path("manifest.json"), json + "\n").map_err(|e| self.fail(name, e))?;
            self.dirty.insert(name.to_string());
            self.recomputed.push(format!("seed-{}/{name}", self.seed));
        }
        self.keys.insert(name.to_string(), key);
        Ok(())
    }

    fn read<T: Record>(&self, file: &str) -> Result<Vec<T>, BoxError> {
        Ok(read_all(self.path(file))?)
    }

    fn write<T: Record>(&self, file: &str, records: &[T]) -> Result<(), BoxError> {
        write_records(self.path(file), records.iter())?;
        Ok(())
    }

    fn write_text(&self, file: &str, text: String) -> Result<(), BoxError> {
        Ok(std::fs::write(self.path(file), text)?)
    }
}

fn run_seed(cfg: &RunConfig, out: &Path, seed: u64, recomputed: &mut Vec<String>) -> Result<Vec<SeedResult>, StageError> {
    let dir = out.join(format!("seed-{seed}"));
    let manifest = std::fs::read_to_string(dir.join("manifest.json"))
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok())
        .unwrap_or_default();
    let mut run = SeedRun {
        seed,
        dir,
        manifest,
        keys: BTreeMap::new(),
        dirty: BTreeSet::new(),
        recomputed,
    };
    std::fs::create_dir_all(&run.dir).map_err(|e| run.fail("setup", e))?;

    run.stage("corpus", &[], toml_of(&cfg.corpus), &["train.jsonl", "heldout.jsonl"], |r| {
        let (train, heldout) = stages::corpus(cfg, seed);
        r.write("train.jsonl", &train)?;
        r.write("heldout.jsonl", &heldout)
    })?;

    let sft_material = format!("{}\n{}", toml_of(&cfg.policy), toml_of(&cfg.sft));
    run.stage("sft", &["corpus"], sft_material, &["sft.ckpt", "sft_loss.csv"], |r| {
        let train: Vec<TranslationTask> = r.read("train.jsonl")?;
        let (model, history) = stages::sft(cfg, &train, seed)?;
        model.save(r.path("sft.ckpt"))?;
        r.write_text("sft_loss.csv", history_csv(&history))
    })?;

    run.stage("sample", &["sft"], toml_of(&cfg.sampling), &["samples.jsonl"], |r| {
        let train: Vec<TranslationTask> = r.read("train.jsonl")?;
        let model = PolicyModel::load(r.path("sft.ckpt"))?;
        r.write("samples.jsonl", &stages::sample(cfg, &model, &train, seed))
    })?;

    run.stage("compile", &["sample"], toml_of(&cfg.oracle), &["candidates.jsonl"], |r| {
        let train: Vec<TranslationTask> = r.read("train.jsonl")?;
        let samples: Vec<Candidate> = r.read("samples.jsonl")?;
        r.write("candidates.jsonl", &stages::compile_check(cfg, &train, samples)?)
    })?;

    run.stage(
        "mine",
        &["compile"],
        cfg.max_pairs_per_task.to_string(),
        &["pairs.jsonl", "mine_summary.txt"],
        |r| {
            let candidates: Vec<Candidate> = r.read("candidates.jsonl")?;
            let (pairs, summary) = mine_pairs(&candidates, cfg.max_pairs_per_task);
            r.write("pairs.jsonl", &pairs)?;
            r.write_text("mine_summary.txt", format!("{summary}\n"))
        },
    )?;

    run.stage("triplets", &["corpus"], cfg.encoder.negatives.to_string(), &["triplets.jsonl"], |r| {
        let train: Vec<TranslationTask> = r.read("train.jsonl")?;
        r.write("triplets.jsonl", &stages::triplets(cfg, &train, seed))
    })?;

    run.stage(
        "encoder",
        &["triplets"],
        toml_of(&cfg.encoder),
        &["encoder.ckpt", "encoder_loss.csv"],
        |r| {
            let triplets: Vec<TripletRecord> = r.read("triplets.jsonl")?;
            let (enc, history) = stages::train_encoder(cfg, &triplets, seed)?;
            enc.save(r.path("encoder.ckpt"))?;
            r.write_text("encoder_loss.csv", history_csv(&history))
        },
    )?;

    run.stage(
        "annotate",
        &["compile", "mine", "encoder"],
        String::new(),
        &["pairs_annotated.jsonl", "pairs_wo_syntax.jsonl"],
        |r| {
            let train: Vec<TranslationTask> = r.read("train.jsonl")?;
            let candidates: Vec<Candidate> = r.read("candidates.jsonl")?;
            let pairs: Vec<PreferencePair> = r.read("pairs.jsonl")?;
            let enc = SemanticEncoder::load(r.path("encoder.ckpt"))?;
            r.write("pairs_annotated.jsonl", &annotate_pairs(&enc, &train, &candidates, &pairs)?)?;
            r.write("pairs_wo_syntax.jsonl", &stages::wo_syntax_pairs(&enc, &train, &candidates))
        },
    )?;

    let mut results = Vec::new();
    for &variant in &cfg.variants {
        let (policy_stage, ckpt) = if variant == Variant::Sft {
            ("sft".to_string(), "sft.ckpt".to_string())
        } else {
            let stage = format!("pref-{variant}");
            let ckpt = format!("policy-{variant}.ckpt");
            let loss_csv = format!("pref_loss-{variant}.csv");
            let material = format!("{variant}\n{}\n{}", toml_of(&cfg.loss), toml_of(&cfg.pref));
            run.stage(&stage, &["sft", "annotate"], material, &[&ckpt, &loss_csv], |r| {
                let train: Vec<TranslationTask> = r.read("train.jsonl")?;
                let file = if variant == Variant::WoSyntax {
                    "pairs_wo_syntax.jsonl"
                } else {
                    "pairs_annotated.jsonl"
                };
                let pairs: Vec<PreferencePair> = r.read(file)?;
                let reference = PolicyModel::load(r.path("sft.ckpt"))?;
                let examples = stages::preference_examples(&train, &pairs, variant);
                let (model, history) = stages::pref(cfg, &reference, &examples, variant, seed)?;
                model.save(r.path(&ckpt))?;
                r.write_text(&loss_csv, history_csv(&history))
            })?;
            (stage, ckpt)
        };
        let eval_file = format!("eval-{variant}.json");
        run.stage(
            &format!("eval-{variant}"),
            &["corpus", &policy_stage],
            toml_of(&cfg.eval),
            &[&eval_file],
            |r| {
                let heldout: Vec<TranslationTask> = r.read("heldout.jsonl")?;
                let model = PolicyModel::load(r.path(&ckpt))?;
                let result = stages::evaluate(cfg, &model, &heldout, seed, variant)?;
                r.write_text(&eval_file, serde_json::to_string_pretty(&result)? + "\n")
            },
        )?;
        let text = std::fs::read_to_string(run.path(&eval_file)).map_err(|e| run.fail("report", e))?;
        results.push(serde_json::from_str(&text).map_err(|e| run.fail("report", e))?);
    }
    Ok(results)
}

/// Runs every seed, writes `report.{csv,txt,json}` under `out`, and returns
/// the report with the list of stages that actually executed.
pub fn run_experiment(cfg: &RunConfig, out: &Path) -> Result<ExperimentOutcome, StageError> {
    let top = |stage: &str, message: String| StageError {
        stage: stage.into(),
        seed: 0,
        dir: out.to_path_buf(),
        message,
    };
    cfg.validate().map_err(|e| top("config", e.to_string()))?;
    let mut recomputed = Vec::new();
    let mut results = Vec::new();
    for &seed in &cfg.seeds {
        results.extend(run_seed(cfg, out, seed, &mut recomputed)?);
    }
    let report = EvalReport::from_results(cfg.eval.k, results);
    report.write(out).map_err(|e| top("report", e.to_string()))?;
    Ok(ExperimentOutcome { report, recomputed })
}
