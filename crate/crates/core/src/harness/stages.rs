//! One function per pipeline stage. The experiment runner chains them with
//! artifact caching; the CLI calls them one at a time on explicit files.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::config::{RunConfig, Variant};
use super::report::SeedResult;
use super::{ca_at_k, comparator_metrics, run_tests, TestRunner};
use crate::encoder::{self, build_triplet, triplet_seed, SemanticEncoder, TrainConfig};
use crate::microlang::{generate_corpus_with, Language, MutationKind};
use crate::miner::{diff_distance, group_by_task, normalized_lines};
use crate::oracle::{self, OracleBackend};
use crate::policy::{pref_train, sft_train, PolicyModel, PrefExample, PrefTrainConfig, SftConfig, Vocab};
use crate::records::{Candidate, PreferencePair, TranslationTask, TripletRecord};
use crate::reward::semantic_rewards;

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

/// SplitMix64 of `(seed, stream, index)`; spreads nearby seeds apart.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Training and held-out tasks for one run seed.
pub fn corpus(cfg: &RunConfig, seed: u64) -> (Vec<TranslationTask>, Vec<TranslationTask>) {
    let c = &cfg.corpus;
    let train = generate_corpus_with(derive_seed(seed, 1, 0), c.train_tasks, c.tests_per_task, &c.generator);
    let heldout = generate_corpus_with(derive_seed(seed, 2, 0), c.heldout_tasks, c.tests_per_task, &c.generator);
    (train, heldout)
}

/// The policy vocabulary implied by the corpus generator settings.
pub fn vocab(cfg: &RunConfig) -> Vocab {
    let g = &cfg.corpus.generator;
    Vocab::micro(&g.identifiers, g.max_literal + 1)
}

/// A freshly initialised policy finetuned on the training references.
pub fn sft(cfg: &RunConfig, train: &[TranslationTask], seed: u64) -> Result<(PolicyModel, Vec<f64>), BoxError> {
    let mut model = PolicyModel::new(vocab(cfg), cfg.policy.clone(), seed)?;
    let sc = SftConfig {
        epochs: cfg.sft.epochs,
        learning_rate: cfg.sft.learning_rate,
        batch_size: cfg.sft.batch_size,
        seed,
    };
    let history = sft_train(&mut model, train, &sc)?;
    Ok((model, history))
}

/// `n` samples for one task, decoded and deduplicated in draw order.
pub fn sample_candidates(
    model: &PolicyModel,
    task: &TranslationTask,
    temperature: f64,
    seed: u64,
    n: usize,
) -> Vec<Candidate> {
    let src = model.vocab.encode_source(&task.source_code);
    let mut seen = BTreeSet::new();
    model
        .sample(&src, temperature, seed, n)
        .into_iter()
        .map(|ids| model.vocab.decode_target(&ids))
        .filter(|code| seen.insert(code.clone()))
        .map(|code| Candidate::new(task.id.clone(), code))
        .collect()
}

/// Sampled candidates for every task, grouped by task in input order.
pub fn sample(cfg: &RunConfig, model: &PolicyModel, tasks: &[TranslationTask], seed: u64) -> Vec<Candidate> {
    let indexed: Vec<(usize, &TranslationTask)> = tasks.iter().enumerate().collect();
    crate::par_map(&indexed, cfg.worker_count(), |(i, task)| {
        sample_candidates(
            model,
            task,
            cfg.sampling.temperature,
            derive_seed(seed, 3, *i as u64),
            cfg.sampling.candidates,
        )
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Fills compile verdicts using the backend configured for each task's
/// target language. Any oracle error aborts the whole batch.
pub fn compile_check(
    cfg: &RunConfig,
    tasks: &[TranslationTask],
    candidates: Vec<Candidate>,
) -> Result<Vec<Candidate>, BoxError> {
    let lang_of: HashMap<&str, &str> = tasks.iter().map(|t| (t.id.as_str(), t.target_lang.as_str())).collect();
    let mut backends: BTreeMap<String, OracleBackend> = BTreeMap::new();
    for c in &candidates {
        let lang = lang_of
            .get(c.task_id.as_str())
            .ok_or_else(|| format!("candidate refers to unknown task `{}`", c.task_id))?;
        if !backends.contains_key(*lang) {
            backends.insert(lang.to_string(), cfg.oracle.backend(lang)?);
        }
    }
    let outcome = oracle::check_batch_with(candidates, |c| &backends[lang_of[c.task_id.as_str()]], cfg.worker_count());
    if let Some((i, e)) = outcome.errors.into_iter().next() {
        return Err(format!("candidate {i}: {e}").into());
    }
    Ok(outcome.candidates)
}

/// One triplet per training task; tasks whose reference admits fewer than
/// `encoder.negatives` distinct failing mutants are skipped.
pub fn triplets(cfg: &RunConfig, tasks: &[TranslationTask], seed: u64) -> Vec<TripletRecord> {
    let base = derive_seed(seed, 5, 0);
    tasks
        .iter()
        .enumerate()
        .filter_map(|(i, t)| build_triplet(t, &MutationKind::ALL, cfg.encoder.negatives, triplet_seed(base, i)).ok())
        .collect()
}

pub fn train_encoder(
    cfg: &RunConfig,
    triplets: &[TripletRecord],
    seed: u64,
) -> Result<(SemanticEncoder, Vec<f64>), BoxError> {
    let e = &cfg.encoder;
    let mut enc = SemanticEncoder::new(e.buckets, e.dim, e.tau, seed);
    let tc = TrainConfig {
        learning_rate: e.learning_rate,
        epochs: e.epochs,
        batch_size: e.batch_size,
        seed,
        tau: e.tau,
    };
    let history = encoder::train(&mut enc, triplets, &tc)?;
    Ok((enc, history))
}

/// Reference-chosen pairs: per task, the sampled candidate differing from
/// the reference with the largest line diff distance (lowest index on ties).
/// The semantic reward difference is normalised over the candidates plus
/// the reference, which is placed last.
pub fn wo_syntax_pairs(enc: &SemanticEncoder, tasks: &[TranslationTask], candidates: &[Candidate]) -> Vec<PreferencePair> {
    let by_id: HashMap<&str, &TranslationTask> = tasks.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut pairs = Vec::new();
    for (task_id, group) in group_by_task(candidates) {
        let Some(task) = by_id.get(task_id.as_str()) else { continue };
        let Some(reference) = task.reference_code.as_deref() else { continue };
        let ref_lines = normalized_lines(reference);
        let mut best: Option<(usize, usize)> = None;
        for (i, c) in group.iter().enumerate() {
            if normalized_lines(&c.code) == ref_lines {
                continue;
            }
            let d = diff_distance(reference, &c.code).total;
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let Some((i, d)) = best else { continue };
        let mut list: Vec<&str> = group.iter().map(|c| c.code.as_str()).collect();
        list.push(reference);
        let rs = semantic_rewards(enc, &task.source_code, &list);
        pairs.push(PreferencePair {
            task_id: task_id.clone(),
            chosen: reference.to_string(),
            rejected: group[i].code.clone(),
            delta_semantic: Some(rs[rs.len() - 1] - rs[i]),
            diff_distance: d as u64,
            extra: Default::default(),
        });
    }
    pairs
}

/// Training examples for one variant. The DPO ablation drops the semantic
/// difference; every other variant uses the annotated value.
pub fn preference_examples(tasks: &[TranslationTask], pairs: &[PreferencePair], variant: Variant) -> Vec<PrefExample> {
    let source: HashMap<&str, &str> = tasks.iter().map(|t| (t.id.as_str(), t.source_code.as_str())).collect();
    pairs
        .iter()
        .filter_map(|p| {
            Some(PrefExample {
                source: source.get(p.task_id.as_str())?.to_string(),
                chosen: p.chosen.clone(),
                rejected: p.rejected.clone(),
                delta_reward: if variant == Variant::Dpo {
                    0.0
                } else {
                    p.delta_semantic.unwrap_or(0.0)
                },
            })
        })
        .collect()
}

/// Preference-trains a copy of `reference`, which stays frozen.
pub fn pref(
    cfg: &RunConfig,
    reference: &PolicyModel,
    examples: &[PrefExample],
    variant: Variant,
    seed: u64,
) -> Result<(PolicyModel, Vec<f64>), BoxError> {
    let loss = variant
        .loss()
        .ok_or_else(|| format!("variant `{variant}` has no preference stage"))?;
    let mut model = reference.clone();
    let pc = PrefTrainConfig {
        epochs: cfg.pref.epochs,
        learning_rate: cfg.pref.learning_rate,
        batch_size: cfg.pref.batch_size,
        seed,
    };
    let history = pref_train(&mut model, reference, examples, &cfg.loss.params(loss), &pc)?;
    Ok((model, history))
}

/// Held-out evaluation. CA@1 comes from greedy decoding; CA@K ranks the
/// greedy output first, then `k − 1` samples at the evaluation temperature.
/// Comparator metrics are averaged over greedy outputs.
pub fn evaluate(
    cfg: &RunConfig,
    model: &PolicyModel,
    heldout: &[TranslationTask],
    seed: u64,
    variant: Variant,
) -> Result<SeedResult, BoxError> {
    let k = cfg.eval.k;
    let indexed: Vec<(usize, &TranslationTask)> = heldout.iter().enumerate().collect();
    let per_task = crate::par_map(&indexed, cfg.worker_count(), |(i, task)| -> Result<(Vec<bool>, f64, f64), BoxError> {
        let lang = Language::from_tag(&task.target_lang)
            .ok_or_else(|| format!("no test runner for target language `{}`", task.target_lang))?;
        let runner = TestRunner::Builtin(lang);
        let src = model.vocab.encode_source(&task.source_code);
        let mut ranked = vec![model.vocab.decode_target(&model.greedy(&src))];
        if k > 1 {
            let draws = model.sample(&src, cfg.eval.temperature, derive_seed(seed, 4, *i as u64), k - 1);
            ranked.extend(draws.iter().map(|ids| model.vocab.decode_target(ids)));
        }
        let mut passes = Vec::with_capacity(ranked.len());
        for code in &ranked {
            passes.push(run_tests(code, &task.tests, &runner)?.iter().all(|&p| p));
        }
        let cmp = comparator_metrics(&ranked[0], task.reference_code.as_deref().unwrap_or(""));
        Ok((passes, cmp.token_f1, cmp.edit_similarity))
    })
    .into_iter()
    .collect::<Result<Vec<_>, BoxError>>()?;
    let passes: Vec<Vec<bool>> = per_task.iter().map(|(p, _, _)| p.clone()).collect();
    let n = heldout.len().max(1) as f64;
    let bitmap = |k: usize| -> String {
        passes
            .iter()
            .map(|p| if p.iter().take(k).any(|&x| x) { '1' } else { '0' })
            .collect()
    };
    let pair = heldout
        .first()
        .map(|t| format!("{}->{}", t.source_lang, t.target_lang))
        .unwrap_or_default();
    Ok(SeedResult {
        seed,
        variant,
        pair,
        tasks: heldout.len(),
        k,
        ca_at_1: ca_at_k(&passes, 1),
        ca_at_k: ca_at_k(&passes, k),
        token_f1: per_task.iter().map(|(_, f, _)| f).sum::<f64>() / n,
        edit_similarity: per_task.iter().map(|(_, _, e)| e).sum::<f64>() / n,
        greedy_passes: bitmap(1),
        top_k_passes: bitmap(k),
    })
}

/// `epoch,loss` rows.
pub fn history_csv(history: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in history.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    out
}
