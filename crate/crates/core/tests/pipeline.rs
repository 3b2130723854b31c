//! Training, sampling and the cached experiment runner on small configurations.

use std::collections::BTreeSet;
use std::path::Path;

use cto::harness::stages;
use cto::harness::{load_config, run_experiment, RunConfig, Variant};
use cto::policy::{pref_train, softmax, PolicyConfig, PolicyModel, PrefExample, PrefTrainConfig, Vocab};
use cto::prefopt::{LossParams, LossVariant};

fn small_config(extra: &[&str]) -> RunConfig {
    let mut sets: Vec<String> = [
        "seeds=[1]",
        "corpus.train_tasks=60",
        "corpus.heldout_tasks=20",
        "corpus.tests_per_task=5",
        "policy.hidden_dim=12",
        "sft.epochs=3",
        "sampling.candidates=6",
        "encoder.epochs=2",
        "encoder.buckets=512",
        "encoder.dim=16",
        "pref.epochs=1",
        "eval.k=3",
        "workers=2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    sets.extend(extra.iter().map(|s| s.to_string()));
    load_config(None, &sets).unwrap()
}

#[test]
fn sampling_matches_the_model_distribution() {
    let config = PolicyConfig {
        embed_dim: 2,
        hidden_dim: 3,
        window: vec![0],
        max_len: 1,
        init_scale: 1.5,
    };
    let model = PolicyModel::new(Vocab::new(["x", "y"], None), config, 9).unwrap();
    let source = vec![vec![5usize, 6]];
    let base = &model.conditionals(&source, &[5]).unwrap()[0];
    let draws = 100_000;
    for temperature in [1.0, 0.5] {
        let logp: Vec<f64> = base.iter().map(|p| p.ln()).collect();
        let expected = softmax(&logp, temperature);
        let mut counts = vec![0usize; expected.len()];
        for seq in model.sample(&source, temperature, 3, draws) {
            counts[seq.first().copied().unwrap_or(model.vocab.eos())] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(&expected)
            .filter(|(_, p)| **p > 0.0)
            .map(|(&c, &p)| {
                let e = p * draws as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // 7 categories, 6 degrees of freedom: the 0.1% critical value is 22.46
        assert!(chi2 < 22.46, "temperature {temperature}: chi-square {chi2}, counts {counts:?}");
    }
}

#[test]
fn sft_learns_and_preference_training_respects_the_reference() {
    let cfg = small_config(&["corpus.train_tasks=300", "corpus.heldout_tasks=40", "policy.hidden_dim=48", "sft.epochs=4"]);
    let (train, heldout) = stages::corpus(&cfg, 1);
    let (model, history) = stages::sft(&cfg, &train, 1).unwrap();
    assert!(history.last().unwrap() < history.first().unwrap(), "{history:?}");

    let untrained = PolicyModel::new(stages::vocab(&cfg), cfg.policy.clone(), 1).unwrap();
    let before = stages::evaluate(&cfg, &untrained, &heldout, 1, Variant::Sft).unwrap();
    let after = stages::evaluate(&cfg, &model, &heldout, 1, Variant::Sft).unwrap();
    assert!(after.ca_at_1 > before.ca_at_1, "{} vs {}", after.ca_at_1, before.ca_at_1);

    let examples: Vec<PrefExample> = stages::triplets(&cfg, &train, 1)
        .into_iter()
        .take(40)
        .map(|trip| PrefExample {
            source: trip.anchor,
            chosen: trip.positive,
            rejected: trip.negatives[0].code.clone(),
            delta_reward: 0.5,
        })
        .collect();
    let reference = model.clone();
    let mut policy = model.clone();
    let params = LossParams::new(LossVariant::Cto, 0.5, 0.5).unwrap();
    let tc = PrefTrainConfig {
        epochs: 3,
        learning_rate: 0.01,
        batch_size: 8,
        seed: 1,
    };
    pref_train(&mut policy, &reference, &examples, &params, &tc).unwrap();
    assert_eq!(reference, model, "reference must not change");

    let margin = |ex: &PrefExample| {
        let v = &policy.vocab;
        let src = v.encode_source(&ex.source);
        let lp = |m: &PolicyModel, code: &str| m.logprob(&src, &v.encode_target(code)).unwrap();
        (lp(&policy, &ex.chosen) - lp(&reference, &ex.chosen)) - (lp(&policy, &ex.rejected) - lp(&reference, &ex.rejected))
    };
    let mean = examples.iter().map(margin).sum::<f64>() / examples.len() as f64;
    assert!(mean > 0.0, "mean margin {mean}");
}

#[test]
fn sft_only_run_reports_one_row() {
    let cfg = small_config(&["variants=[\"sft\"]"]);
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(outcome.report.rows.len(), 1);
    assert_eq!(outcome.report.rows[0].variant, Variant::Sft);
    for f in ["report.csv", "report.txt", "report.json"] {
        assert!(dir.path().join(f).exists());
    }
}

fn stage_set(recomputed: &[String]) -> BTreeSet<String> {
    recomputed.iter().cloned().collect()
}

#[test]
fn runner_resumes_and_recomputes_only_downstream_stages() {
    let cfg = small_config(&["variants=[\"sft\", \"cto\"]"]);
    let dir = tempfile::tempdir().unwrap();
    let first = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(first.recomputed.len(), 8 + 3);

    let again = run_experiment(&cfg, dir.path()).unwrap();
    assert!(again.recomputed.is_empty(), "{:?}", again.recomputed);
    assert_eq!(again.report, first.report);

    std::fs::remove_file(dir.path().join("seed-1/triplets.jsonl")).unwrap();
    let partial = run_experiment(&cfg, dir.path()).unwrap();
    let expected: BTreeSet<String> = ["triplets", "encoder", "annotate", "pref-cto", "eval-cto"]
        .iter()
        .map(|s| format!("seed-1/{s}"))
        .collect();
    assert_eq!(stage_set(&partial.recomputed), expected);
    assert_eq!(partial.report, first.report);

    let changed = small_config(&["variants=[\"sft\", \"cto\"]", "pref.learning_rate=0.02"]);
    let rerun = run_experiment(&changed, dir.path()).unwrap();
    let expected: BTreeSet<String> = ["pref-cto", "eval-cto"].iter().map(|s| format!("seed-1/{s}")).collect();
    assert_eq!(stage_set(&rerun.recomputed), expected);
}

#[test]
fn stage_failure_names_stage_and_directory() {
    let cfg = small_config(&[
        "variants=[\"sft\", \"cto\"]",
        "oracle.languages.tgtl.command=\"/nonexistent/checker {file}\"",
    ]);
    let dir = tempfile::tempdir().unwrap();
    let err = run_experiment(&cfg, dir.path()).unwrap_err();
    assert_eq!(err.stage, "compile");
    assert_eq!(err.seed, 1);
    assert_eq!(err.dir, dir.path().join("seed-1"));
    let text = err.to_string();
    assert!(text.contains("compile") && text.contains(&dir.path().join("seed-1").display().to_string()), "{text}");
    assert!(Path::new(&err.dir).join("samples.jsonl").exists());
}
