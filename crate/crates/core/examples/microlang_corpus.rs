//! Generate a few paired SRCL/TGTL tasks, parse both sides and run the
//! reference against its tests.
//!
//! cargo run --example microlang_corpus

use cto::microlang::{generate_corpus, interpret, parse, Language};

fn main() {
    let tasks = generate_corpus(7, 3, 4);
    for task in &tasks {
        println!("== {} ({} -> {})", task.id, task.source_lang, task.target_lang);
        println!("-- source\n{}", task.source_code);
        let reference = task.reference_code.as_deref().expect("generated tasks carry references");
        println!("-- reference\n{reference}");
        let src = parse(&task.source_code, Language::Srcl).expect("generated source parses");
        let tgt = parse(reference, Language::Tgtl).expect("generated reference parses");
        for test in &task.tests {
            let a = interpret(&src, &test.input_values).expect("source runs");
            let b = interpret(&tgt, &test.input_values).expect("reference runs");
            assert_eq!(a, test.expected_output);
            assert_eq!(b, test.expected_output);
            println!("   in {:?} -> out {:?}", test.input_values, b);
        }
    }
}
