use proptest::prelude::*;

use cto::harness::ca_at_k;
use cto::microlang::{generate_program, parse, CorpusConfig, Language};
use cto::miner::{diff_distance, edit_script_len};
use cto::policy::{PolicyConfig, PolicyModel, Vocab};
use cto::records::{read_all, write_records, Candidate, CompileStatus};
use cto::reward::rewards_from_cosines;
use cto::seeded_rng;

fn lcs_distance(a: &[u8], b: &[u8]) -> usize {
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

fn toy_policy(seed: u64) -> PolicyModel {
    let config = PolicyConfig {
        embed_dim: 1,
        hidden_dim: 1,
        window: vec![0],
        max_len: 8,
        init_scale: 0.8,
    };
    PolicyModel::new(Vocab::new(["x"], None), config, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_programs_round_trip(seed in any::<u64>(), tgtl in any::<bool>()) {
        let mut rng = seeded_rng(seed, 0);
        let program = generate_program(&mut rng, &CorpusConfig::default());
        let program = if tgtl { program.translated(Language::Tgtl) } else { program };
        let back = parse(&program.render(), program.language).unwrap();
        prop_assert_eq!(back, program);
    }

    #[test]
    fn candidates_survive_jsonl(
        codes in prop::collection::vec("[ -~\n\t\u{e9}\u{4e2d}]{0,40}", 1..8),
        reward in prop::option::of(-1e6f64..1e6),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let cands: Vec<Candidate> = codes
            .iter()
            .enumerate()
            .map(|(i, code)| {
                let mut c = Candidate::new(format!("t{i}"), code.clone());
                c.compile = if i % 2 == 0 { CompileStatus::Pass } else { CompileStatus::Fail };
                c.semantic_reward = reward;
                c
            })
            .collect();
        write_records(&path, &cands).unwrap();
        let back: Vec<Candidate> = read_all(&path).unwrap();
        prop_assert_eq!(back, cands);
    }

    #[test]
    fn diff_is_a_symmetric_lcs_distance(
        a in prop::collection::vec(0u8..4, 0..16),
        b in prop::collection::vec(0u8..4, 0..16),
    ) {
        let d = edit_script_len(&a, &b);
        prop_assert_eq!(d, lcs_distance(&a, &b));
        prop_assert_eq!(d, edit_script_len(&b, &a));
        let text = |v: &[u8]| v.iter().map(|x| format!("line {x}")).collect::<Vec<_>>().join("\n");
        let dd = diff_distance(&text(&a), &text(&b));
        prop_assert_eq!(dd.total, d);
        prop_assert_eq!(dd.added + dd.deleted, d);
        prop_assert_eq!(diff_distance(&text(&a), &text(&a)).total, 0);
    }

    #[test]
    fn rewards_are_standardised_and_order_preserving(cos in prop::collection::vec(-1.0f64..1.0, 1..12)) {
        let r = rewards_from_cosines(&cos);
        prop_assert_eq!(r.len(), cos.len());
        let s: Vec<f64> = r.iter().map(|e| e.semantic).collect();
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        if s.iter().any(|v| *v != 0.0) {
            let std = (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!((std - 1.0).abs() < 1e-9);
        }
        for i in 0..cos.len() {
            for j in 0..cos.len() {
                if r[i].cosine > r[j].cosine {
                    prop_assert!(s[i] > s[j]);
                }
            }
        }
    }

    #[test]
    fn ca_at_k_is_monotone_in_k(passes in prop::collection::vec(prop::collection::vec(any::<bool>(), 0..6), 1..20)) {
        let mut prev = 0.0;
        for k in 1..=6 {
            let v = ca_at_k(&passes, k);
            prop_assert!(v >= prev);
            prop_assert!((0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn toy_policy_gradient_matches_finite_differences(
        seed in 0u64..1000,
        target in prop::collection::vec(prop_oneof![Just(2usize), Just(5usize)], 0..5),
    ) {
        let model = toy_policy(seed);
        prop_assert_eq!(model.num_params(), 21);
        let source = vec![vec![5usize], vec![5, 5]];
        let mut target = target;
        target.push(model.vocab.eos());
        let (_, grad) = model.seq_logprob(&source, &target).unwrap();
        let h = 1e-5;
        for i in 0..model.num_params() {
            let mut up = model.clone();
            up.params[i] += h;
            let mut down = model.clone();
            down.params[i] -= h;
            let numeric = (up.logprob(&source, &target).unwrap() - down.logprob(&source, &target).unwrap()) / (2.0 * h);
            let scale = grad[i].abs().max(numeric.abs());
            let err = if scale == 0.0 { 0.0 } else { (grad[i] - numeric).abs() / scale };
            prop_assert!(err < 1e-5 || (grad[i] - numeric).abs() < 1e-10, "param {} analytic {} numeric {}", i, grad[i], numeric);
        }
    }
}
