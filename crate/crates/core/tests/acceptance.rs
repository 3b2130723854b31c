//! Acceptance suite. Every test prints one `criterion N ... PASS|FAIL` line
//! and then asserts the same condition at the stated tolerance.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use cto::encoder::{
    build_triplet, infonce_features, ranking_accuracy, triplet_seed, FeatureTriplet, FeatureVector, SemanticEncoder,
};
use cto::harness::stages::{self, derive_seed};
use cto::harness::{load_config, EvalReport, RunConfig, Variant};
use cto::microlang::{generate_corpus_with, parse, passes_tests, Language, MutationKind};
use cto::miner::{closest_pairs, diff_distance, edit_script_len};
use cto::oracle::{check, check_batch, OracleBackend};
use cto::policy::{pref_train, PolicyConfig, PolicyModel, PrefExample, PrefTrainConfig};
use cto::prefopt::{pair_loss, LossGrad, LossParams, LossVariant, PairBatchItem};
use cto::records::{read_all, write_records, Candidate, CompileStatus, TripletRecord};
use cto::reward::rewards_from_cosines;
use cto::seeded_rng;

/// Written straight to the process stdout so the line shows up even when the
/// harness captures test output.
fn verdict(n: u32, title: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n} [{title}]: {status} ({detail})\n");
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn shipped_config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

fn shipped_config() -> RunConfig {
    load_config(Some(&shipped_config_path()), &[]).expect("shipped config loads")
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

// ---------------------------------------------------------------- 1

fn random_item(rng: &mut impl Rng) -> (PairBatchItem, f64, f64) {
    let mut lp = || rng.gen_range(-3.0..-0.1);
    let (pc, pr, rc, rr) = (lp(), lp(), lp(), lp());
    let dr = rng.gen_range(-1.0..1.0);
    let item = PairBatchItem::new((pc, pr), (rc, rr), dr).with_lengths(rng.gen_range(1..40), rng.gen_range(1..40));
    (item, rng.gen_range(0.05..0.5), rng.gen_range(0.3..1.0))
}

fn grad_component(g: &LossGrad, i: usize) -> f64 {
    [g.policy_chosen, g.policy_rejected, g.ref_chosen, g.ref_rejected][i]
}

fn nudge(item: &PairBatchItem, i: usize, h: f64) -> PairBatchItem {
    let mut it = *item;
    match i {
        0 => it.logp_policy_chosen += h,
        1 => it.logp_policy_rejected += h,
        2 => it.logp_ref_chosen += h,
        _ => it.logp_ref_rejected += h,
    }
    it
}

#[test]
fn criterion_1_loss_gradients() {
    let start = Instant::now();
    let h = 1e-5;
    let mut rng = seeded_rng(1, 1);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for _ in 0..1000 {
        let (item, beta, w) = random_item(&mut rng);
        for variant in [LossVariant::Cto, LossVariant::Dpo, LossVariant::Ipo, LossVariant::Simpo] {
            let params = LossParams::new(variant, beta, w).unwrap();
            let analytic = pair_loss(&item, &params).unwrap().grad;
            for i in 0..4 {
                let up = pair_loss(&nudge(&item, i, h), &params).unwrap().loss;
                let down = pair_loss(&nudge(&item, i, -h), &params).unwrap().loss;
                let numeric = (up - down) / (2.0 * h);
                worst = worst.max(rel_err(grad_component(&analytic, i), numeric));
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-6 && elapsed < Duration::from_secs(10);
    verdict(
        1,
        "loss-kernel gradients",
        pass,
        &format!("{checked} partials, worst relative error {worst:.2e}, {elapsed:.2?}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 2

fn tiny_preference_setup() -> (PolicyModel, Vec<PrefExample>) {
    let cfg = RunConfig::default();
    let g = &cfg.corpus.generator;
    let tasks = generate_corpus_with(7, 12, 4, g);
    let mut examples = Vec::new();
    for (i, t) in tasks.iter().enumerate() {
        let Ok(trip) = build_triplet(t, &MutationKind::ALL, 1, i as u64) else {
            continue;
        };
        examples.push(PrefExample {
            source: t.source_code.clone(),
            chosen: trip.positive,
            rejected: trip.negatives[0].code.clone(),
            delta_reward: 0.0,
        });
    }
    let pc = PolicyConfig {
        embed_dim: 4,
        hidden_dim: 6,
        window: vec![0, 1],
        ..PolicyConfig::default()
    };
    (PolicyModel::new(stages::vocab(&cfg), pc, 3).unwrap(), examples)
}

#[test]
fn criterion_2_reduction_identities() {
    let mut rng = seeded_rng(2, 1);
    let mut worst_w1 = 0.0f64;
    let mut worst_dr0 = 0.0f64;
    let diff = |a: &cto::prefopt::LossValue, b: &cto::prefopt::LossValue| {
        (0..4)
            .map(|i| (grad_component(&a.grad, i) - grad_component(&b.grad, i)).abs())
            .fold((a.loss - b.loss).abs(), f64::max)
    };
    for _ in 0..10_000 {
        let (item, beta, w) = random_item(&mut rng);
        let cto_w1 = pair_loss(&item, &LossParams::new(LossVariant::Cto, beta, 1.0).unwrap()).unwrap();
        let dpo = pair_loss(&item, &LossParams::new(LossVariant::Dpo, beta, 1.0).unwrap()).unwrap();
        worst_w1 = worst_w1.max(diff(&cto_w1, &dpo));

        let mut zero = item;
        zero.delta_reward = 0.0;
        let cto_dr0 = pair_loss(&zero, &LossParams::new(LossVariant::Cto, beta, w).unwrap()).unwrap();
        let dpo_scaled = pair_loss(&zero, &LossParams::new(LossVariant::Dpo, beta / w, 1.0).unwrap()).unwrap();
        worst_dr0 = worst_dr0.max(diff(&cto_dr0, &dpo_scaled));
    }

    let (init, examples) = tiny_preference_setup();
    let reference = init.clone();
    let cto_params = LossParams::new(LossVariant::Cto, 0.1, 0.5).unwrap();
    let dpo_params = LossParams::new(LossVariant::Dpo, 0.2, 1.0).unwrap();
    let mut worst_traj = 0.0f64;
    for steps in 1..=50 {
        let tc = PrefTrainConfig {
            epochs: steps,
            learning_rate: 0.05,
            batch_size: examples.len(),
            seed: 11,
        };
        let mut a = init.clone();
        let mut b = init.clone();
        pref_train(&mut a, &reference, &examples, &cto_params, &tc).unwrap();
        pref_train(&mut b, &reference, &examples, &dpo_params, &tc).unwrap();
        let d = a.params.iter().zip(&b.params).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst_traj = worst_traj.max(d);
    }
    let moved = {
        let tc = PrefTrainConfig {
            epochs: 50,
            learning_rate: 0.05,
            batch_size: examples.len(),
            seed: 11,
        };
        let mut a = init.clone();
        pref_train(&mut a, &reference, &examples, &cto_params, &tc).unwrap();
        a.params != init.params
    };
    let pass = worst_w1 <= 1e-12 && worst_dr0 <= 1e-12 && worst_traj <= 1e-12 && moved;
    verdict(
        2,
        "reduction identities",
        pass,
        &format!(
            "w=1 gap {worst_w1:.1e}, delta_reward=0 gap {worst_dr0:.1e}, 50-step trajectory gap {worst_traj:.1e} over {} pairs",
            examples.len()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 3

fn arrangements(pool: &[f64], len: usize, prefix: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
    if prefix.len() == len {
        out.push(prefix.clone());
        return;
    }
    for &v in pool {
        if !prefix.contains(&v) {
            prefix.push(v);
            arrangements(pool, len, prefix, out);
            prefix.pop();
        }
    }
}

#[test]
fn criterion_3_reward_function() {
    let spot = rewards_from_cosines(&[0.9, 0.5, 0.1]);
    let expected = [1.5f64.sqrt(), 0.0, -(1.5f64.sqrt())];
    let spot_err = spot
        .iter()
        .zip(expected)
        .map(|(e, x)| (e.semantic - x).abs())
        .fold(0.0, f64::max);

    let mut rng = seeded_rng(3, 1);
    let mut worst_moment = 0.0f64;
    let mut lists = 0;
    for _ in 0..10_000 {
        let n = rng.gen_range(2..=20);
        let cos: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r: Vec<f64> = rewards_from_cosines(&cos).into_iter().map(|e| e.semantic).collect();
        if r.iter().all(|v| *v == 0.0) {
            continue;
        }
        lists += 1;
        let mean = r.iter().sum::<f64>() / n as f64;
        let std = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        worst_moment = worst_moment.max(mean.abs()).max((std - 1.0).abs());
    }

    let grid = [0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95];
    let mut violations = 0;
    let mut checked = 0;
    for len in 1..=5 {
        let mut all = Vec::new();
        arrangements(&grid, len, &mut Vec::new(), &mut all);
        for list in all {
            checked += 1;
            let r = rewards_from_cosines(&list);
            for i in 0..len {
                for j in 0..len {
                    if list[i] > list[j] && r[i].semantic <= r[j].semantic {
                        violations += 1;
                    }
                }
            }
        }
    }
    let pass = spot_err <= 1e-9 && worst_moment <= 1e-9 && violations == 0;
    verdict(
        3,
        "reward function",
        pass,
        &format!(
            "spot error {spot_err:.1e}, worst moment error {worst_moment:.1e} over {lists} lists, {violations} order violations in {checked} lists"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 4

fn fv(pairs: &[(usize, f64)]) -> FeatureVector {
    FeatureVector::from_map(pairs.iter().copied().collect::<BTreeMap<_, _>>())
}

/// 500 training and 200 held-out triplets built from one run seed's tasks.
fn encoder_triplets(cfg: &RunConfig, seed: u64) -> (Vec<TripletRecord>, Vec<TripletRecord>) {
    let g = &cfg.corpus.generator;
    let k = cfg.encoder.negatives;
    let build = |stream: u64, want: usize| {
        let tasks = generate_corpus_with(derive_seed(seed, stream, 0), 2 * want, cfg.corpus.tests_per_task, g);
        let base = derive_seed(seed, 5, stream);
        let out: Vec<TripletRecord> = tasks
            .iter()
            .enumerate()
            .filter_map(|(i, t)| build_triplet(t, &MutationKind::ALL, k, triplet_seed(base, i)).ok())
            .take(want)
            .collect();
        assert_eq!(out.len(), want, "not enough tasks admit {k} mutants");
        out
    };
    (build(1, 500), build(2, 200))
}

#[test]
fn criterion_4_infonce() {
    let identity = SemanticEncoder::from_projection(2, 2, 1.0, vec![1.0, 0.0, 0.0, 1.0]);
    let orthogonal = FeatureTriplet {
        anchor: fv(&[(0, 1.0)]),
        positive: fv(&[(0, 1.0)]),
        negatives: vec![fv(&[(1, 1.0)])],
    };
    let tied = FeatureTriplet {
        anchor: fv(&[(0, 1.0), (1, 1.0)]),
        positive: fv(&[(0, 1.0)]),
        negatives: vec![fv(&[(1, 1.0)])],
    };
    let (l1, _) = infonce_features(&identity, &orthogonal).unwrap();
    let (l2, _) = infonce_features(&identity, &tied).unwrap();
    let spot_err = (l1 - (1.0 + (-1.0f64).exp()).ln()).abs().max((l2 - 2f64.ln()).abs());

    let mut rng = seeded_rng(4, 1);
    let proj: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut rand_fv = || fv(&[(0, rng.gen_range(0.1..2.0)), (1, rng.gen_range(0.1..2.0)), (2, rng.gen_range(0.1..2.0))]);
    let trip = FeatureTriplet {
        anchor: rand_fv(),
        positive: rand_fv(),
        negatives: vec![rand_fv(), rand_fv(), rand_fv()],
    };
    let tau = 0.5;
    let (_, grad) = infonce_features(&SemanticEncoder::from_projection(3, 2, tau, proj.clone()), &trip).unwrap();
    let h = 1e-5;
    let mut grad_err = 0.0f64;
    for idx in 0..6 {
        let at = |delta: f64| {
            let mut p = proj.clone();
            p[idx] += delta;
            infonce_features(&SemanticEncoder::from_projection(3, 2, tau, p), &trip).unwrap().0
        };
        let numeric = (at(h) - at(-h)) / (2.0 * h);
        grad_err = grad_err.max(rel_err(grad.get(idx / 2, idx % 2), numeric));
    }

    let cfg = shipped_config();
    let mut accs = Vec::new();
    let mut slowest = Duration::ZERO;
    for seed in 1..=5u64 {
        let (train, heldout) = encoder_triplets(&cfg, seed);
        let start = Instant::now();
        let (enc, _) = stages::train_encoder(&cfg, &train, seed).unwrap();
        slowest = slowest.max(start.elapsed());
        accs.push(ranking_accuracy(&enc, &heldout));
    }
    let seeds_ok = accs.iter().filter(|a| **a >= 0.95).count();
    let pass = spot_err <= 1e-9 && grad_err <= 1e-6 && seeds_ok >= 4 && slowest < Duration::from_secs(60);
    let shown: Vec<String> = accs.iter().map(|a| format!("{:.1}%", 100.0 * a)).collect();
    verdict(
        4,
        "InfoNCE encoder",
        pass,
        &format!(
            "spot error {spot_err:.1e}, gradient error {grad_err:.1e}, held-out accuracy {} ({seeds_ok}/5 seeds at 95%), slowest seed {slowest:.2?}",
            shown.join(" ")
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 5

fn lcs_distance(a: &[&str], b: &[&str]) -> usize {
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            dp[i][j] = if a[i - 1] == b[j - 1] {
                dp[i - 1][j - 1] + 1
            } else {
                dp[i - 1][j].max(dp[i][j - 1])
            };
        }
    }
    a.len() + b.len() - 2 * dp[a.len()][b.len()]
}

fn random_lines(rng: &mut impl Rng, max_len: usize) -> Vec<&'static str> {
    const ALPHABET: [&str; 5] = ["let a = 1;", "emit a;", "let b = a + 2;", "emit b;", "read c;"];
    (0..rng.gen_range(0..=max_len)).map(|_| *ALPHABET.choose(rng).unwrap()).collect()
}

#[test]
fn criterion_5_pair_miner() {
    let mut rng = seeded_rng(5, 1);
    let mut miner_mismatch = 0;
    let mut sets = 0;
    for s in 0..3000 {
        let n_pass = rng.gen_range(1..=10);
        let n_fail = rng.gen_range(1..=10);
        let mut cands: Vec<Candidate> = (0..n_pass + n_fail)
            .map(|i| {
                let mut c = Candidate::new(format!("t{s}"), random_lines(&mut rng, 6).join("\n"));
                c.compile = if i < n_pass { CompileStatus::Pass } else { CompileStatus::Fail };
                c
            })
            .collect();
        cands.shuffle(&mut rng);
        let refs: Vec<&Candidate> = cands.iter().collect();
        let lines = |c: &Candidate| c.code.lines().map(str::to_owned).collect::<Vec<_>>();
        let mut best: Option<usize> = None;
        for p in refs.iter().filter(|c| c.compile == CompileStatus::Pass) {
            for f in refs.iter().filter(|c| c.compile == CompileStatus::Fail) {
                let (lp, lf) = (lines(p), lines(f));
                let lp: Vec<&str> = lp.iter().map(String::as_str).collect();
                let lf: Vec<&str> = lf.iter().map(String::as_str).collect();
                let d = lcs_distance(&lp, &lf);
                if d > 0 {
                    best = Some(best.map_or(d, |b: usize| b.min(d)));
                }
            }
        }
        let mined = closest_pairs(&format!("t{s}"), &refs, 1);
        let got = mined.first().map(|p| p.diff_distance as usize);
        let consistent = match (got, best, mined.first()) {
            (Some(g), Some(b), Some(p)) => {
                g == b
                    && refs.iter().any(|c| c.compile == CompileStatus::Pass && c.code == p.chosen)
                    && refs.iter().any(|c| c.compile == CompileStatus::Fail && c.code == p.rejected)
            }
            (None, None, None) => true,
            _ => false,
        };
        if !consistent {
            miner_mismatch += 1;
        }
        sets += 1;
    }

    let mut diff_mismatch = 0;
    for _ in 0..10_000 {
        let a = random_lines(&mut rng, 20);
        let b = random_lines(&mut rng, 20);
        let oracle = lcs_distance(&a, &b);
        if edit_script_len(&a, &b) != oracle || diff_distance(&a.join("\n"), &b.join("\n")).total != oracle {
            diff_mismatch += 1;
        }
    }
    let pass = miner_mismatch == 0 && diff_mismatch == 0;
    verdict(
        5,
        "pair miner",
        pass,
        &format!("{miner_mismatch}/{sets} candidate sets disagree with exhaustive search, {diff_mismatch}/10000 diffs disagree with LCS"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 6

#[test]
fn criterion_6_microlang_soundness() {
    let cfg = shipped_config();
    let dir = tempfile::tempdir().unwrap();
    let mut refs = 0;
    let mut ref_failures = 0;
    let mut mutants = 0;
    let mut bad_mutants = 0;
    for seed in cfg.seeds.clone() {
        let (train, heldout) = stages::corpus(&cfg, seed);
        for t in train.iter().chain(&heldout) {
            refs += 1;
            let src_ok = parse(&t.source_code, Language::Srcl).is_ok_and(|p| passes_tests(&p, &t.tests));
            let ref_ok = t
                .reference_code
                .as_deref()
                .and_then(|r| parse(r, Language::Tgtl).ok())
                .is_some_and(|p| passes_tests(&p, &t.tests));
            if !(src_ok && ref_ok) {
                ref_failures += 1;
            }
        }
        let path = dir.path().join(format!("triplets-{seed}.jsonl"));
        write_records(&path, &stages::triplets(&cfg, &train, seed)).unwrap();
        let persisted: Vec<TripletRecord> = read_all(&path).unwrap();
        let tests_of: BTreeMap<&str, &Vec<cto::records::TestCase>> = train
            .iter()
            .filter_map(|t| t.reference_code.as_deref().map(|r| (r, &t.tests)))
            .collect();
        for trip in &persisted {
            let tests = tests_of[trip.positive.as_str()];
            for neg in &trip.negatives {
                mutants += 1;
                let fails = parse(&neg.code, Language::Tgtl).is_ok_and(|p| !passes_tests(&p, tests));
                if !fails {
                    bad_mutants += 1;
                }
            }
        }
    }
    let pass = ref_failures == 0 && bad_mutants == 0 && mutants > 0;
    verdict(
        6,
        "micro-language soundness",
        pass,
        &format!("{ref_failures}/{refs} tasks fail their own tests, {bad_mutants}/{mutants} persisted mutants parse-fail or pass"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 7 and 9

struct ExperimentRun {
    report: Vec<u8>,
    elapsed: Duration,
}

fn run_cli_experiment(out: &Path) -> ExperimentRun {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_cto"))
        .arg("--config")
        .arg(shipped_config_path())
        .arg("experiment")
        .arg("--out")
        .arg(out)
        .output()
        .expect("cto binary runs");
    assert!(
        status.status.success(),
        "experiment failed: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    let mut report = Vec::new();
    for name in ["report.csv", "report.txt", "report.json"] {
        report.extend(std::fs::read(out.join(name)).unwrap());
    }
    ExperimentRun {
        report,
        elapsed: start.elapsed(),
    }
}

static FIRST_RUN: OnceLock<(tempfile::TempDir, ExperimentRun)> = OnceLock::new();

fn first_run() -> &'static (tempfile::TempDir, ExperimentRun) {
    FIRST_RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let run = run_cli_experiment(dir.path());
        (dir, run)
    })
}

#[test]
fn criterion_7_trend_replication() {
    let (dir, run) = first_run();
    let report: EvalReport = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let ca = |v: Variant| report.row(v).expect("variant in report").ca_at_1;
    let (sft, dpo, wo, cto) = (ca(Variant::Sft), ca(Variant::Dpo), ca(Variant::WoSyntax), ca(Variant::Cto));
    let cfg = shipped_config();
    let shape_ok = cfg.corpus.train_tasks == 500
        && cfg.corpus.heldout_tasks == 100
        && cfg.sampling.candidates == 10
        && cfg.sampling.temperature == 0.9
        && cfg.loss.w == 0.5
        && cfg.seeds.len() == 5;
    let checks = [
        ("CTO >= DPO", cto >= dpo),
        ("CTO - SFT >= 2pts", cto - sft >= 0.02),
        ("CTO >= w/o syntax", cto >= wo),
        ("under 30 min", run.elapsed < Duration::from_secs(30 * 60)),
        ("shipped shape", shape_ok),
    ];
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    let pass = failed.is_empty();
    verdict(
        7,
        "trend replication",
        pass,
        &format!(
            "CA@1 SFT {:.1} DPO {:.1} w/o-syntax {:.1} CTO {:.1}, {:.0?}{}",
            100.0 * sft,
            100.0 * dpo,
            100.0 * wo,
            100.0 * cto,
            run.elapsed,
            if pass { String::new() } else { format!(", failing: {}", failed.join(", ")) }
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_9_determinism() {
    let (_, first) = first_run();
    let dir = tempfile::tempdir().unwrap();
    let second = run_cli_experiment(dir.path());
    let pass = first.report == second.report && !first.report.is_empty();
    verdict(
        9,
        "determinism",
        pass,
        &format!("two full runs, {} report bytes, identical: {pass}", first.report.len()),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 8

fn tool_present(program: &str, flag: &str) -> bool {
    Command::new(program)
        .arg(flag)
        .output()
        .is_ok_and(|o| o.status.success())
}

#[test]
fn criterion_8_compiler_oracles() {
    let fixtures: [(&str, &str, &str, &str, &str); 3] = [
        (
            "cpp",
            "g++",
            "--version",
            "#include <cstdio>\nint main() { int a = 2; std::printf(\"%d\\n\", a + 1); return 0; }\n",
            "int main() { int a = ; return 0 }\n",
        ),
        (
            "java",
            "javac",
            "-version",
            "public class Main { public static void main(String[] args) { int a = 2; System.out.println(a + 1); } }\n",
            "public class Main { public static void main(String[] args) { int a = 2 System.out.println(a); }\n",
        ),
        (
            "python",
            "python3",
            "--version",
            "a = 2\nprint(a + 1)\n",
            "def f(:\n    return 1\n",
        ),
    ];
    let mut notes = Vec::new();
    let mut pass = true;
    let mut backends = vec![("tgtl".to_string(), OracleBackend::builtin(Language::Tgtl), "a := 1 ;\nemit a ;".to_string(), "a := ;".to_string())];
    for (lang, tool, flag, good, bad) in fixtures {
        if !tool_present(tool, flag) {
            notes.push(format!("{lang} skipped ({tool} absent)"));
            continue;
        }
        backends.push((lang.to_string(), OracleBackend::for_language(lang).unwrap(), good.to_string(), bad.to_string()));
    }
    for (lang, backend, good, bad) in &backends {
        let g = check(good, backend).map(|v| v.pass);
        let b = check(bad, backend).map(|v| v.pass);
        let ok = matches!((&g, &b), (Ok(true), Ok(false)));
        pass &= ok;
        notes.push(format!("{lang} {}", if ok { "ok" } else { "wrong" }));

        let batch: Vec<Candidate> = (0..6)
            .map(|i| Candidate::new(format!("t{i}"), if i % 2 == 0 { good.clone() } else { bad.clone() }))
            .collect();
        let serial = check_batch(batch.clone(), backend, 1);
        let parallel = check_batch(batch, backend, 4);
        let verdicts = |o: &cto::oracle::BatchOutcome| o.candidates.iter().map(|c| c.compile).collect::<Vec<_>>();
        let same = serial.errors.is_empty() && parallel.errors.is_empty() && verdicts(&serial) == verdicts(&parallel);
        pass &= same;
        if !same {
            notes.push(format!("{lang} serial/parallel differ"));
        }
    }
    verdict(8, "compiler oracles", pass, &notes.join(", "));
    assert!(pass);
}
