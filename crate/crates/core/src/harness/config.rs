use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::microlang::CorpusConfig;
use crate::oracle::OracleConfig;
use crate::policy::PolicyConfig;
use crate::prefopt::{LossParams, LossVariant};

/// One row family of the ablation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// The supervised model, no preference stage.
    Sft,
    /// CTO loss with the semantic reward difference forced to 0.
    Dpo,
    /// Reference as chosen against a sampled mismatch, CTO loss.
    WoSyntax,
    Cto,
    Ipo,
    Simpo,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Sft,
        Variant::Dpo,
        Variant::WoSyntax,
        Variant::Cto,
        Variant::Ipo,
        Variant::Simpo,
    ];

    /// Identifier used in file names and config lists.
    pub fn key(self) -> &'static str {
        match self {
            Variant::Sft => "sft",
            Variant::Dpo => "dpo",
            Variant::WoSyntax => "wo_syntax",
            Variant::Cto => "cto",
            Variant::Ipo => "ipo",
            Variant::Simpo => "simpo",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Variant::ALL.into_iter().find(|v| v.key() == key)
    }

    /// Row label in the report.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Sft => "SFT",
            Variant::Dpo => "DPO (w/o semantic)",
            Variant::WoSyntax => "CTO w/o syntax",
            Variant::Cto => "CTO",
            Variant::Ipo => "IPO",
            Variant::Simpo => "SimPO",
        }
    }

    /// Loss used by the preference stage, `None` for SFT.
    pub fn loss(self) -> Option<LossVariant> {
        match self {
            Variant::Sft => None,
            Variant::Dpo | Variant::WoSyntax | Variant::Cto => Some(LossVariant::Cto),
            Variant::Ipo => Some(LossVariant::Ipo),
            Variant::Simpo => Some(LossVariant::Simpo),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub train_tasks: usize,
    pub heldout_tasks: usize,
    pub tests_per_task: usize,
    pub generator: CorpusConfig,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            train_tasks: 500,
            heldout_tasks: 100,
            tests_per_task: 10,
            generator: CorpusConfig::default(),
        }
    }
}

/// Optimiser settings shared by the training stages. The shuffle seed is
/// the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub candidates: usize,
    pub temperature: f64,
}

impl Default for SamplingSection {
    fn default() -> Self {
        Self {
            candidates: 10,
            temperature: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    pub buckets: usize,
    pub dim: usize,
    pub tau: f64,
    pub negatives: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for EncoderSection {
    fn default() -> Self {
        let t = crate::encoder::TrainConfig::default();
        Self {
            buckets: crate::encoder::DEFAULT_BUCKETS,
            dim: crate::encoder::DEFAULT_DIM,
            tau: crate::encoder::DEFAULT_TAU,
            negatives: 4,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    pub beta: f64,
    pub w: f64,
    pub gamma: f64,
    pub tau_ipo: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        let d = LossParams::default();
        Self {
            beta: d.beta,
            w: d.w,
            gamma: d.gamma,
            tau_ipo: d.tau_ipo,
        }
    }
}

impl LossSection {
    pub fn params(&self, variant: LossVariant) -> LossParams {
        LossParams {
            beta: self.beta,
            w: self.w,
            variant,
            gamma: self.gamma,
            tau_ipo: self.tau_ipo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// CA@K is reported for this K alongside CA@1.
    pub k: usize,
    /// Temperature of the samples ranked after the greedy output.
    pub temperature: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { k: 5, temperature: 0.9 }
    }
}

/// Everything `run_experiment` needs. Serialises to and from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
    /// Worker threads for sampling, compile checks and evaluation; 0 means
    /// the machine's available parallelism.
    pub workers: usize,
    pub corpus: CorpusSection,
    pub policy: PolicyConfig,
    pub sft: TrainSection,
    pub sampling: SamplingSection,
    pub oracle: OracleConfig,
    pub max_pairs_per_task: usize,
    pub encoder: EncoderSection,
    pub loss: LossSection,
    pub pref: TrainSection,
    pub eval: EvalSection,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: 1,
            learning_rate: 0.1,
            batch_size: 16,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3, 4, 5],
            variants: Variant::ALL.to_vec(),
            workers: 0,
            corpus: CorpusSection::default(),
            policy: PolicyConfig::default(),
            sft: TrainSection {
                epochs: 4,
                learning_rate: 0.1,
                batch_size: 16,
            },
            sampling: SamplingSection::default(),
            oracle: OracleConfig::default(),
            max_pairs_per_task: 1,
            encoder: EncoderSection::default(),
            loss: LossSection {
                beta: 1.0,
                ..LossSection::default()
            },
            pref: TrainSection {
                epochs: 4,
                learning_rate: 0.01,
                batch_size: 16,
            },
            eval: EvalSection::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("bad override `{0}`: expected key=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.variants.is_empty() {
            return bad("at least one variant is required");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if !(self.loss.w > 0.0 && self.loss.w <= 1.0) {
            return bad("loss.w must lie in (0, 1]");
        }
        if self.corpus.train_tasks == 0 || self.corpus.heldout_tasks == 0 {
            return bad("corpus task counts must be ≥ 1");
        }
        if self.sampling.candidates == 0 || !(self.sampling.temperature > 0.0) {
            return bad("sampling needs ≥ 1 candidate and temperature > 0");
        }
        if self.eval.k == 0 || !(self.eval.temperature > 0.0) {
            return bad("eval.k must be ≥ 1 and eval.temperature > 0");
        }
        if self.encoder.negatives == 0 {
            return bad("encoder.negatives must be ≥ 1");
        }
        if self.max_pairs_per_task == 0 {
            return bad("max_pairs_per_task must be ≥ 1");
        }
        for v in &self.variants {
            if let Some(loss) = v.loss() {
                self.loss
                    .params(loss)
                    .validate()
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn worker_count(&self) -> usize {
        if self.workers == 0 {
            crate::default_workers()
        } else {
            self.workers
        }
    }
}

/// Sets a dotted `key=value` in a TOML table. The value is read as a TOML
/// literal when it parses as one and as a bare string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(assignment.to_string()));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cursor = table;
    for part in parents {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override(format!("{assignment} (`{part}` is not a table)")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Defaults, overlaid by the file at `path` (if any), overlaid by `overrides`.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut table: toml::Table = toml::from_str(&RunConfig::default().to_toml()).expect("defaults parse");
    let file: toml::Table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.display().to_string(),
                source,
            })?;
            toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?
        }
        None => toml::Table::new(),
    };
    merge(&mut table, file);
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
