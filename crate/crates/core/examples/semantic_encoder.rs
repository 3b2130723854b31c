//! Train the hashed n-gram dual encoder with InfoNCE on source-anchored
//! triplets, report held-out ranking accuracy and dump embeddings.
//!
//! cargo run --release --example semantic_encoder

use cto::encoder::{build_triplets, dump_embeddings, ranking_accuracy, train, SemanticEncoder, TrainConfig};
use cto::microlang::{generate_corpus, MutationKind};

fn main() {
    let tasks = generate_corpus(1, 700, 10);
    let triplets: Vec<_> = tasks
        .iter()
        .enumerate()
        .filter_map(|(i, t)| cto::encoder::build_triplet(t, &MutationKind::ALL, 4, cto::encoder::triplet_seed(1, i)).ok())
        .collect();
    let (train_set, heldout) = triplets.split_at(500.min(triplets.len()));
    let mut enc = SemanticEncoder::new(4096, 64, 0.07, 1);
    println!("untrained held-out accuracy {:.3}", ranking_accuracy(&enc, heldout));
    let history = train(&mut enc, train_set, &TrainConfig::default()).unwrap();
    println!("loss {:.4} -> {:.4}", history[0], history[history.len() - 1]);
    println!("trained held-out accuracy {:.3}", ranking_accuracy(&enc, heldout));

    let few = build_triplets(&tasks[..3], &MutationKind::ALL, 2, 5).unwrap();
    for t in &few {
        println!("cos(anchor, positive) = {:.3}", enc.cosine(&t.anchor, &t.positive));
        for n in &t.negatives {
            println!("cos(anchor, {:<16}) = {:.3}", n.label, enc.cosine(&t.anchor, &n.code));
        }
    }
    let path = std::env::temp_dir().join("cto-embeddings.csv");
    let rows = dump_embeddings(&enc, &tasks[..10], &[], &path).unwrap();
    println!("{rows} embedding rows in {}", path.display());
}
