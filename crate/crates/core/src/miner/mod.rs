//! Preference-pair mining: split each task's candidates by compile verdict
//! and keep the closest (pass, fail) combination(s) by line diff distance.

mod diff;

use std::collections::HashMap;
use std::fmt;

pub use diff::{diff_distance, edit_script_len, normalized_lines, DiffDistance};

use crate::records::{Candidate, CompileStatus, Extra, PreferencePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MineSummary {
    pub tasks_total: usize,
    pub paired: usize,
    pub skipped_all_pass: usize,
    pub skipped_all_fail: usize,
    /// Tasks whose candidates all lacked a verdict.
    pub skipped_unresolved: usize,
}

impl fmt::Display for MineSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tasks {} / paired {} / skipped-all-pass {} / skipped-all-fail {}",
            self.tasks_total, self.paired, self.skipped_all_pass, self.skipped_all_fail
        )?;
        if self.skipped_unresolved > 0 {
            write!(f, " / unresolved {}", self.skipped_unresolved)?;
        }
        Ok(())
    }
}

/// Groups candidates by `task_id`, keeping first-appearance order of tasks
/// and input order within each task.
pub fn group_by_task(candidates: &[Candidate]) -> Vec<(String, Vec<&Candidate>)> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<(String, Vec<&Candidate>)> = Vec::new();
    for c in candidates {
        let slot = *index.entry(c.task_id.as_str()).or_insert_with(|| {
            groups.push((c.task_id.clone(), Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(c);
    }
    groups
}

/// Closest pass/fail pairs of one task, ascending by distance and then by
/// (chosen index, rejected index). Pairs with zero distance are never emitted.
pub fn closest_pairs(task_id: &str, candidates: &[&Candidate], max_pairs: usize) -> Vec<PreferencePair> {
    let pass: Vec<(usize, &Candidate)> = candidates
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, c)| c.compile == CompileStatus::Pass)
        .collect();
    let fail: Vec<(usize, &Candidate)> = candidates
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, c)| c.compile == CompileStatus::Fail)
        .collect();
    let mut scored: Vec<(usize, usize, usize, &str, &str)> = Vec::with_capacity(pass.len() * fail.len());
    for (pi, p) in &pass {
        for (fi, f) in &fail {
            let d = diff_distance(&p.code, &f.code).total;
            if d > 0 {
                scored.push((d, *pi, *fi, &p.code, &f.code));
            }
        }
    }
    scored.sort_by_key(|&(d, pi, fi, _, _)| (d, pi, fi));
    scored
        .into_iter()
        .take(max_pairs)
        .map(|(d, _, _, chosen, rejected)| PreferencePair {
            task_id: task_id.to_string(),
            chosen: chosen.to_string(),
            rejected: rejected.to_string(),
            delta_semantic: None,
            diff_distance: d as u64,
            extra: Extra::new(),
        })
        .collect()
}

/// Mines pairs for every task, in task order.
pub fn mine_pairs(candidates: &[Candidate], max_pairs_per_task: usize) -> (Vec<PreferencePair>, MineSummary) {
    let mut summary = MineSummary::default();
    let mut pairs = Vec::new();
    for (task_id, group) in group_by_task(candidates) {
        summary.tasks_total += 1;
        let has = |s| group.iter().any(|c| c.compile == s);
        match (has(CompileStatus::Pass), has(CompileStatus::Fail)) {
            (true, true) => {
                let mined = closest_pairs(&task_id, &group, max_pairs_per_task);
                if !mined.is_empty() {
                    summary.paired += 1;
                }
                pairs.extend(mined);
            }
            (true, false) => summary.skipped_all_pass += 1,
            (false, true) => summary.skipped_all_fail += 1,
            (false, false) => summary.skipped_unresolved += 1,
        }
    }
    (pairs, summary)
}
