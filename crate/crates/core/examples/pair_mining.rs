//! Line diff distance and closest pass/fail pair mining.
//!
//! cargo run --example pair_mining

use cto::miner::{diff_distance, mine_pairs};
use cto::records::{Candidate, CompileStatus};

fn candidate(code: &str, pass: bool) -> Candidate {
    let mut c = Candidate::new("task-0", code);
    c.compile = if pass { CompileStatus::Pass } else { CompileStatus::Fail };
    c.syntactic_reward = Some(if pass { 1.0 } else { 0.0 });
    c
}

fn main() {
    let a = "read a ;\nb := a plus 1 ;\nemit b ;";
    let b = "read a ;\nb := a plus ;\nemit b ;";
    println!("diff({a:?}, {b:?}) = {:?}", diff_distance(a, b));

    let candidates = vec![
        candidate("read a ;\nemit a ;", true),
        candidate(a, true),
        candidate(b, false),
        candidate("read ;\nemit ;\nemit ;", false),
    ];
    let (pairs, summary) = mine_pairs(&candidates, 1);
    println!("{summary}");
    for p in pairs {
        println!("chosen:\n{}\nrejected:\n{}\ndistance {}", p.chosen, p.rejected, p.diff_distance);
    }
}
