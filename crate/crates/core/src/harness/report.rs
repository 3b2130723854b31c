use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Variant;

/// Held-out evaluation of one variant under one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub variant: Variant,
    /// `source->target` language tags.
    pub pair: String,
    pub tasks: usize,
    pub k: usize,
    pub ca_at_1: f64,
    pub ca_at_k: f64,
    pub token_f1: f64,
    pub edit_similarity: f64,
    /// One character per task: `1` when the greedy output passes every test.
    pub greedy_passes: String,
    /// One character per task: `1` when any of the top K passes.
    pub top_k_passes: String,
}

/// A report row: one variant on one language pair, averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub variant: Variant,
    pub pair: String,
    pub seeds: Vec<u64>,
    pub tasks_per_seed: usize,
    pub ca_at_1: f64,
    pub ca_at_1_per_seed: Vec<f64>,
    pub ca_at_k: f64,
    pub token_f1: f64,
    pub edit_similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub rows: Vec<ReportRow>,
    pub results: Vec<SeedResult>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl EvalReport {
    /// Rows in the order variants first appear, pairs sorted within a variant.
    pub fn from_results(k: usize, results: Vec<SeedResult>) -> Self {
        let mut keys: Vec<(Variant, String)> = Vec::new();
        for r in &results {
            let key = (r.variant, r.pair.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let rows = keys
            .into_iter()
            .map(|(variant, pair)| {
                let rs: Vec<&SeedResult> = results
                    .iter()
                    .filter(|r| r.variant == variant && r.pair == pair)
                    .collect();
                ReportRow {
                    variant,
                    pair,
                    seeds: rs.iter().map(|r| r.seed).collect(),
                    tasks_per_seed: rs.first().map_or(0, |r| r.tasks),
                    ca_at_1: mean(rs.iter().map(|r| r.ca_at_1)),
                    ca_at_1_per_seed: rs.iter().map(|r| r.ca_at_1).collect(),
                    ca_at_k: mean(rs.iter().map(|r| r.ca_at_k)),
                    token_f1: mean(rs.iter().map(|r| r.token_f1)),
                    edit_similarity: mean(rs.iter().map(|r| r.edit_similarity)),
                }
            })
            .collect();
        Self { k, rows, results }
    }

    pub fn row(&self, variant: Variant) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "variant,pair,seeds,tasks_per_seed,ca_at_1,ca_at_{k},token_f1,edit_similarity,ca_at_1_per_seed\n",
            k = self.k
        );
        for r in &self.rows {
            let per_seed: Vec<String> = r.ca_at_1_per_seed.iter().map(|v| format!("{v:.4}")).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{:.4},{:.4},{:.4},{:.4},{}",
                r.variant.key(),
                r.pair,
                r.seeds.len(),
                r.tasks_per_seed,
                r.ca_at_1,
                r.ca_at_k,
                r.token_f1,
                r.edit_similarity,
                per_seed.join(";")
            );
        }
        out
    }

    /// Aligned table with CA values in percent.
    pub fn to_text(&self) -> String {
        let header = [
            "Method".to_string(),
            "Pair".to_string(),
            "CA@1".to_string(),
            format!("CA@{}", self.k),
            "TokF1".to_string(),
            "EditSim".to_string(),
            "Seeds".to_string(),
        ];
        let body: Vec<[String; 7]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.variant.label().to_string(),
                    r.pair.clone(),
                    format!("{:.2}", 100.0 * r.ca_at_1),
                    format!("{:.2}", 100.0 * r.ca_at_k),
                    format!("{:.3}", r.token_f1),
                    format!("{:.3}", r.edit_similarity),
                    r.seeds.len().to_string(),
                ]
            })
            .collect();
        let mut widths = header.clone().map(|h| h.chars().count());
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String; 7]| -> String {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| {
                    if i < 2 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            format!("| {} |", parts.join(" | "))
        };
        let rule: String = format!(
            "|{}|",
            widths.iter().map(|w| "-".repeat(w + 2)).collect::<Vec<_>>().join("|")
        );
        let mut out = String::new();
        let _ = writeln!(out, "{}", line(&header));
        let _ = writeln!(out, "{rule}");
        for row in &body {
            let _ = writeln!(out, "{}", line(row));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }

    /// Writes `report.csv`, `report.txt` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.csv"), self.to_csv())?;
        std::fs::write(dir.join("report.txt"), self.to_text())?;
        std::fs::write(dir.join("report.json"), self.to_json())
    }
}
