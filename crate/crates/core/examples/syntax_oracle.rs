//! Compile-check candidates with the built-in grammar backend, and with a
//! real compiler when one is installed.
//!
//! cargo run --example syntax_oracle

use std::time::Duration;

use cto::microlang::Language;
use cto::oracle::{check, check_batch, OracleBackend};
use cto::records::Candidate;

fn main() {
    let builtin = OracleBackend::builtin(Language::Tgtl);
    for code in ["read a ;\nemit a plus 1 ;", "read a ;\nemit a plus ;"] {
        let v = check(code, &builtin).unwrap();
        println!("{:<28} pass={} {}", code.replace('\n', " "), v.pass, v.diagnostics);
    }

    let batch: Vec<Candidate> = (0..6)
        .map(|i| Candidate::new("t0", if i % 2 == 0 { "x := 1 ;" } else { "x := ;" }))
        .collect();
    let outcome = check_batch(batch, &builtin, 3);
    let verdicts: Vec<_> = outcome.candidates.iter().map(|c| c.compile).collect();
    println!("batch verdicts: {verdicts:?}");

    match OracleBackend::external("cpp", "g++ -fsyntax-only {file}", Duration::from_secs(30)) {
        Ok(gpp) => {
            for code in ["int main() { return 0; }", "int main() { return 0 }"] {
                match check(code, &gpp) {
                    Ok(v) => println!("g++ {:<28} pass={}", code, v.pass),
                    Err(e) => println!("g++ unavailable: {e}"),
                }
            }
        }
        Err(e) => println!("external backend rejected: {e}"),
    }
}
