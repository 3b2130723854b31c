//! Test execution, CA@K, reference-based comparators and the end-to-end
//! experiment runner.

mod config;
mod experiment;
mod report;
pub mod stages;

use std::collections::HashMap;
use std::time::Duration;

use crate::microlang::{self, Language};
use crate::miner::{edit_script_len, normalized_lines};
use crate::oracle::{self, OracleError};
use crate::records::TestCase;

pub use config::{apply_override, load_config, ConfigError, RunConfig, Variant};
pub use experiment::{run_experiment, ExperimentOutcome, StageError, STAGES};
pub use report::{EvalReport, ReportRow, SeedResult};

/// How a candidate program is executed against its tests.
#[derive(Debug, Clone, PartialEq)]
pub enum TestRunner {
    /// The micro-language interpreter.
    Builtin(Language),
    /// A command template run once per test. Inputs arrive on stdin one per
    /// line; stdout is read as whitespace-separated integers.
    External {
        command: String,
        file_name: String,
        timeout: Duration,
    },
}

/// Per-test verdicts. A candidate that does not parse (builtin) or a command
/// that exits non-zero or times out (external) fails the test; a missing
/// tool is an error.
pub fn run_tests(code: &str, tests: &[TestCase], runner: &TestRunner) -> Result<Vec<bool>, OracleError> {
    match runner {
        TestRunner::Builtin(lang) => {
            let Ok(program) = microlang::parse(code, *lang) else {
                return Ok(vec![false; tests.len()]);
            };
            Ok(tests
                .iter()
                .map(|t| microlang::interpret(&program, &t.input_values).is_ok_and(|out| out == t.expected_output))
                .collect())
        }
        TestRunner::External {
            command,
            file_name,
            timeout,
        } => {
            let dir = tempfile::tempdir()?;
            let file = dir.path().join(file_name);
            std::fs::write(&file, code)?;
            let mut verdicts = Vec::with_capacity(tests.len());
            for t in tests {
                let stdin: String = t.input_values.iter().map(|v| format!("{v}\n")).collect();
                let run = oracle::run_in(dir.path(), &file, command, *timeout, Some(&stdin))?;
                let output: Option<Vec<i64>> = run.stdout.split_whitespace().map(|w| w.parse().ok()).collect();
                verdicts.push(run.success && output.as_deref() == Some(t.expected_output.as_slice()));
            }
            dir.close()?;
            Ok(verdicts)
        }
    }
}

/// True iff every test passes.
pub fn passes_all(code: &str, tests: &[TestCase], runner: &TestRunner) -> Result<bool, OracleError> {
    Ok(run_tests(code, tests, runner)?.into_iter().all(|p| p))
}

/// Fraction of tasks with a fully passing candidate among the first `k`
/// of its ranked list. `passes[t][i]` is whether candidate `i` of task `t`
/// passes all tests.
pub fn ca_at_k(passes: &[Vec<bool>], k: usize) -> f64 {
    if passes.is_empty() {
        return 0.0;
    }
    let hits = passes.iter().filter(|ranked| ranked.iter().take(k).any(|&p| p)).count();
    hits as f64 / passes.len() as f64
}

/// Surface similarity to a reference. These are evaluation comparators only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparator {
    /// F1 of the candidate token multiset against the reference's.
    pub token_f1: f64,
    /// `1 − line_edit / (|a| + |b|)` over whitespace-trimmed lines.
    pub edit_similarity: f64,
}

fn lexemes(code: &str) -> Vec<String> {
    match microlang::tokenize(code, Language::Tgtl) {
        Ok(toks) => toks.into_iter().map(|(t, _)| t).collect(),
        Err(_) => code.split_whitespace().map(str::to_string).collect(),
    }
}

pub fn comparator_metrics(candidate: &str, reference: &str) -> Comparator {
    let (c, r) = (lexemes(candidate), lexemes(reference));
    let token_f1 = if c.is_empty() && r.is_empty() {
        1.0
    } else {
        let mut counts: HashMap<&str, i64> = HashMap::new();
        for t in &r {
            *counts.entry(t).or_default() += 1;
        }
        let mut overlap = 0usize;
        for t in &c {
            if let Some(n) = counts.get_mut(t.as_str()) {
                if *n > 0 {
                    *n -= 1;
                    overlap += 1;
                }
            }
        }
        if overlap == 0 {
            0.0
        } else {
            let p = overlap as f64 / c.len() as f64;
            let q = overlap as f64 / r.len() as f64;
            2.0 * p * q / (p + q)
        }
    };
    let (a, b) = (normalized_lines(candidate), normalized_lines(reference));
    let total = a.len() + b.len();
    let edit_similarity = if total == 0 {
        1.0
    } else {
        1.0 - edit_script_len(&a, &b) as f64 / total as f64
    };
    Comparator {
        token_f1,
        edit_similarity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microlang::{generate_corpus, parse};

    #[test]
    fn references_pass_and_op_swaps_fail() {
        let tasks = generate_corpus(3, 20, 10);
        let runner = TestRunner::Builtin(Language::Tgtl);
        for t in &tasks {
            let reference = t.reference_code.as_deref().unwrap();
            assert!(passes_all(reference, &t.tests, &runner).unwrap());
            let program = parse(reference, Language::Tgtl).unwrap();
            if let Ok(m) = microlang::mutate(&program, &[microlang::MutationKind::OpSwap], 1, 0, &t.tests) {
                assert!(!passes_all(&m[0].0, &t.tests, &runner).unwrap());
            }
        }
    }

    #[test]
    fn unparsable_fails_every_test() {
        let tests = vec![TestCase {
            input_values: vec![],
            expected_output: vec![],
        }];
        assert_eq!(run_tests("emit", &tests, &TestRunner::Builtin(Language::Tgtl)).unwrap(), vec![false]);
    }

    #[test]
    fn external_echo_runner() {
        let runner = TestRunner::External {
            command: "sh {file}".into(),
            file_name: "prog.sh".into(),
            timeout: Duration::from_secs(10),
        };
        let tests = vec![
            TestCase {
                input_values: vec![3, -4],
                expected_output: vec![3, -4],
            },
            TestCase {
                input_values: vec![1],
                expected_output: vec![2],
            },
        ];
        let verdicts = run_tests("while read x; do echo $x; done", &tests, &runner).unwrap();
        assert_eq!(verdicts, vec![true, false]);
    }

    #[test]
    fn external_timeout_is_a_failure() {
        let runner = TestRunner::External {
            command: "sh {file}".into(),
            file_name: "prog.sh".into(),
            timeout: Duration::from_millis(200),
        };
        let tests = vec![TestCase {
            input_values: vec![],
            expected_output: vec![],
        }];
        assert_eq!(run_tests("sleep 5", &tests, &runner).unwrap(), vec![false]);
    }

    #[test]
    fn missing_runner_is_an_error() {
        let runner = TestRunner::External {
            command: "definitely-not-a-tool-xyz {file}".into(),
            file_name: "p".into(),
            timeout: Duration::from_secs(1),
        };
        let tests = vec![TestCase {
            input_values: vec![],
            expected_output: vec![],
        }];
        assert!(matches!(run_tests("", &tests, &runner), Err(OracleError::ToolNotFound { .. })));
    }

    #[test]
    fn ca_counts() {
        let passes = vec![vec![true], vec![true, false], vec![false, true], vec![true]];
        assert_eq!(ca_at_k(&passes, 1), 0.75);
        assert_eq!(ca_at_k(&passes, 2), 1.0);
        assert_eq!(ca_at_k(&passes, 50), 1.0);
        assert_eq!(ca_at_k(&[], 1), 0.0);
    }

    #[test]
    fn comparators() {
        let r = "read a ;\nb := a ;\nemit b ;";
        let same = comparator_metrics(r, r);
        assert_eq!((same.token_f1, same.edit_similarity), (1.0, 1.0));
        assert_eq!(comparator_metrics("x y z", "p q").token_f1, 0.0);
        let one_changed = comparator_metrics("read a ;\nb := a plus 1 ;\nemit b ;", r);
        assert!((one_changed.edit_similarity - (1.0 - 2.0 / 6.0)).abs() < 1e-12);
    }
}
