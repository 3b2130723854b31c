//! Finetune the windowed translation policy on references, then compare
//! greedy held-out accuracy before and after and draw a few samples.
//!
//! cargo run --release --example policy_sft

use cto::harness::{passes_all, TestRunner};
use cto::microlang::{generate_corpus, Language};
use cto::policy::{sft_train, PolicyConfig, PolicyModel, SftConfig, Vocab};
use cto::records::TranslationTask;

fn greedy_accuracy(model: &PolicyModel, tasks: &[TranslationTask]) -> f64 {
    let runner = TestRunner::Builtin(Language::Tgtl);
    let hits = tasks
        .iter()
        .filter(|t| passes_all(&model.translate(&t.source_code), &t.tests, &runner).unwrap())
        .count();
    hits as f64 / tasks.len() as f64
}

fn main() {
    let train = generate_corpus(1, 300, 10);
    let heldout = generate_corpus(2, 50, 10);
    let ids: Vec<String> = "abcdefgh".chars().map(String::from).collect();
    let mut model = PolicyModel::new(Vocab::micro(&ids, 10), PolicyConfig::default(), 1).unwrap();
    println!("{} parameters", model.num_params());
    println!("untrained CA@1 {:.2}", greedy_accuracy(&model, &heldout));
    let cfg = SftConfig { epochs: 6, ..SftConfig::default() };
    let history = sft_train(&mut model, &train, &cfg).unwrap();
    println!("SFT loss per epoch: {history:.3?}");
    println!("post-SFT CA@1 {:.2}", greedy_accuracy(&model, &heldout));

    let task = &heldout[0];
    println!("source:\n{}", task.source_code);
    let src = model.vocab.encode_source(&task.source_code);
    for (i, ids) in model.sample(&src, 0.9, 42, 3).iter().enumerate() {
        println!("sample {i}:\n{}", model.vocab.decode_target(ids));
    }
}
