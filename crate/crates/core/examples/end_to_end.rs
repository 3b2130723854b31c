//! The full cached pipeline on a reduced configuration. Running it twice
//! reuses every artifact.
//!
//! cargo run --release --example end_to_end [OUT_DIR]

use cto::harness::{load_config, run_experiment};

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("cto-end-to-end"));
    let overrides: Vec<String> = ["seeds=[1, 2]", "corpus.train_tasks=200", "corpus.heldout_tasks=50"]
        .map(String::from)
        .to_vec();
    let cfg = load_config(None, &overrides).unwrap();
    let first = run_experiment(&cfg, &out).unwrap();
    print!("{}", first.report.to_text());
    println!("{} stages ran", first.recomputed.len());
    let second = run_experiment(&cfg, &out).unwrap();
    println!("second run: {} stages ran, identical report: {}", second.recomputed.len(), first.report == second.report);
}
