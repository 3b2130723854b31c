//! One seed of the preference stage by hand: sample, compile-check, mine,
//! train the encoder, annotate, then preference-train CTO and its DPO
//! ablation from the same SFT reference.
//!
//! cargo run --release --example pref_training

use cto::harness::stages;
use cto::harness::{RunConfig, Variant};
use cto::miner::mine_pairs;
use cto::reward::annotate_pairs;

fn main() {
    let mut cfg = RunConfig::default();
    cfg.corpus.train_tasks = 200;
    cfg.corpus.heldout_tasks = 50;
    let seed = 3;
    let (train, heldout) = stages::corpus(&cfg, seed);
    let (reference, _) = stages::sft(&cfg, &train, seed).unwrap();
    let candidates = stages::compile_check(&cfg, &train, stages::sample(&cfg, &reference, &train, seed)).unwrap();
    let (pairs, summary) = mine_pairs(&candidates, cfg.max_pairs_per_task);
    println!("{summary}");
    let triplets = stages::triplets(&cfg, &train, seed);
    let (enc, _) = stages::train_encoder(&cfg, &triplets, seed).unwrap();
    let annotated = annotate_pairs(&enc, &train, &candidates, &pairs).unwrap();

    for variant in [Variant::Sft, Variant::Dpo, Variant::Cto] {
        let model = if variant == Variant::Sft {
            reference.clone()
        } else {
            let examples = stages::preference_examples(&train, &annotated, variant);
            let (m, history) = stages::pref(&cfg, &reference, &examples, variant, seed).unwrap();
            println!("{} loss per epoch {history:.4?}", variant.label());
            m
        };
        let result = stages::evaluate(&cfg, &model, &heldout, seed, variant).unwrap();
        println!("{:<20} CA@1 {:.2}  CA@{} {:.2}", variant.label(), result.ca_at_1, result.k, result.ca_at_k);
    }
}
