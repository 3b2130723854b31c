//! The rule-based negative generator: labelled mutants of one reference,
//! each guaranteed to fail at least one test.
//!
//! cargo run --example mutants

use cto::microlang::{generate_corpus, mutate, parse, Language, MutationKind};

fn main() {
    let task = &generate_corpus(11, 1, 10)[0];
    let reference = task.reference_code.as_deref().unwrap();
    println!("reference:\n{reference}\n");
    let program = parse(reference, Language::Tgtl).unwrap();
    for kind in MutationKind::ALL {
        match mutate(&program, &[kind], 1, 3, &task.tests) {
            Ok(mutants) => println!("[{}]\n{}\n", kind.label(), mutants[0].0),
            Err(e) => println!("[{}] not applicable: {e}\n", kind.label()),
        }
    }
}
