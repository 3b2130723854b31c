//! Canonical records shared by every pipeline stage, and their line-delimited
//! JSON persistence.
//!
//! Each file holds one record per line. Code bodies are plain JSON strings, so
//! embedded newlines are escaped and a record never spans lines. Fields this
//! crate does not know about are kept in `extra` and written back unchanged.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Fields carried through round-trips without interpretation.
pub type Extra = serde_json::Map<String, serde_json::Value>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub input_values: Vec<i64>,
    pub expected_output: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationTask {
    pub id: String,
    pub source_lang: String,
    pub target_lang: String,
    pub source_code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_code: Option<String>,
    #[serde(default)]
    pub tests: Vec<TestCase>,
    #[serde(flatten)]
    pub extra: Extra,
}

/// Compile verdict of a candidate. `Unknown` until the syntax oracle has run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompileStatus {
    #[default]
    Unknown,
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub task_id: String,
    pub code: String,
    #[serde(default)]
    pub compile: CompileStatus,
    #[serde(default)]
    pub diagnostics: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_reward: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub syntactic_reward: Option<f64>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Candidate {
    pub fn new(task_id: impl Into<String>, code: impl Into<String>) -> Self {
        Self {
            task_id: task_id.into(),
            code: code.into(),
            compile: CompileStatus::Unknown,
            diagnostics: String::new(),
            semantic_reward: None,
            syntactic_reward: None,
            extra: Extra::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub task_id: String,
    pub chosen: String,
    pub rejected: String,
    /// `r_s(chosen) - r_s(rejected)`; unset until the reward stage annotates it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_semantic: Option<f64>,
    pub diff_distance: u64,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledNegative {
    pub code: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletRecord {
    pub anchor: String,
    pub positive: String,
    pub negatives: Vec<LabeledNegative>,
    #[serde(flatten)]
    pub extra: Extra,
}

/// The four persisted record kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Task,
    Candidate,
    Pair,
    Triplet,
}

impl RecordKind {
    /// Conventional file name for this kind; any path is accepted.
    pub fn file_name(self) -> &'static str {
        match self {
            RecordKind::Task => "tasks.jsonl",
            RecordKind::Candidate => "candidates.jsonl",
            RecordKind::Pair => "pairs.jsonl",
            RecordKind::Triplet => "triplets.jsonl",
        }
    }
}

/// A field-level invariant violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub trait Record: Serialize + DeserializeOwned {
    const KIND: RecordKind;

    fn validate(&self) -> Result<(), Violation>;
}

impl Record for TranslationTask {
    const KIND: RecordKind = RecordKind::Task;

    fn validate(&self) -> Result<(), Violation> {
        if self.id.is_empty() {
            return Err(Violation::new("id", "must be non-empty"));
        }
        if self.source_lang == self.target_lang {
            return Err(Violation::new(
                "target_lang",
                "must differ from source_lang",
            ));
        }
        if self.source_code.is_empty() {
            return Err(Violation::new("source_code", "must be non-empty"));
        }
        Ok(())
    }
}

impl Record for Candidate {
    const KIND: RecordKind = RecordKind::Candidate;

    fn validate(&self) -> Result<(), Violation> {
        if let Some(r) = self.syntactic_reward {
            let expected = match self.compile {
                CompileStatus::Unknown => {
                    return Err(Violation::new(
                        "syntactic_reward",
                        "set while compile is unknown",
                    ))
                }
                CompileStatus::Pass => 1.0,
                CompileStatus::Fail => 0.0,
            };
            if r != expected {
                return Err(Violation::new(
                    "syntactic_reward",
                    format!("{r} disagrees with compile verdict"),
                ));
            }
        }
        if let Some(r) = self.semantic_reward {
            if !r.is_finite() {
                return Err(Violation::new("semantic_reward", "must be finite"));
            }
        }
        Ok(())
    }
}

impl Record for PreferencePair {
    const KIND: RecordKind = RecordKind::Pair;

    fn validate(&self) -> Result<(), Violation> {
        if self.chosen == self.rejected {
            return Err(Violation::new("rejected", "identical to chosen"));
        }
        if self.diff_distance == 0 {
            return Err(Violation::new(
                "diff_distance",
                "must be at least 1 for distinct texts",
            ));
        }
        if let Some(d) = self.delta_semantic {
            if !d.is_finite() {
                return Err(Violation::new("delta_semantic", "must be finite"));
            }
        }
        Ok(())
    }
}

impl Record for TripletRecord {
    const KIND: RecordKind = RecordKind::Triplet;

    fn validate(&self) -> Result<(), Violation> {
        if self.negatives.is_empty() {
            return Err(Violation::new("negatives", "must be non-empty"));
        }
        for neg in &self.negatives {
            if crate::microlang::MutationKind::from_label(&neg.label).is_none() {
                return Err(Violation::new(
                    "negatives.label",
                    format!("unknown mutation label `{}`", neg.label),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("cannot open {}: {source}", path.display())]
    Open { path: PathBuf, source: io::Error },
    #[error("I/O error on {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: field `{field}`: {message}", path.display())]
    Schema {
        path: PathBuf,
        line: usize,
        field: String,
        message: String,
    },
}

/// Streaming reader over one record file. Yields records in file order.
pub struct RecordReader<T> {
    path: PathBuf,
    lines: io::Lines<BufReader<File>>,
    line_no: usize,
    _kind: PhantomData<T>,
}

impl<T: Record> Iterator for RecordReader<T> {
    type Item = Result<T, RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(source) => {
                    return Some(Err(RecordError::Io {
                        path: self.path.clone(),
                        source,
                    }))
                }
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(parse_line(&line).map_err(|v| RecordError::Schema {
                path: self.path.clone(),
                line: self.line_no,
                field: v.field,
                message: v.message,
            }));
        }
    }
}

fn parse_line<T: Record>(line: &str) -> Result<T, Violation> {
    let de = &mut serde_json::Deserializer::from_str(line);
    let record: T = serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let message = err.inner().to_string();
        let field = missing_field_name(&message).unwrap_or(path);
        Violation { field, message }
    })?;
    record.validate()?;
    Ok(record)
}

fn missing_field_name(message: &str) -> Option<String> {
    let rest = message.strip_prefix("missing field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

pub fn read_records<T: Record>(path: impl AsRef<Path>) -> Result<RecordReader<T>, RecordError> {
    let path = path.as_ref().to_path_buf();
    let file = File::open(&path).map_err(|source| RecordError::Open {
        path: path.clone(),
        source,
    })?;
    Ok(RecordReader {
        path,
        lines: BufReader::new(file).lines(),
        line_no: 0,
        _kind: PhantomData,
    })
}

/// Reads a whole file, stopping at the first bad line.
pub fn read_all<T: Record>(path: impl AsRef<Path>) -> Result<Vec<T>, RecordError> {
    read_records(path)?.collect()
}

/// Writes records in iteration order, validating each. Returns the count written.
pub fn write_records<'a, T, I>(path: impl AsRef<Path>, records: I) -> Result<usize, RecordError>
where
    T: Record + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let path = path.as_ref();
    let io_err = |source| RecordError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(|source| RecordError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = BufWriter::new(file);
    let mut count = 0;
    for record in records {
        record.validate().map_err(|v| RecordError::Schema {
            path: path.to_path_buf(),
            line: count + 1,
            field: v.field,
            message: v.message,
        })?;
        let line = serde_json::to_string(record)
            .map_err(|e| io_err(io::Error::new(io::ErrorKind::InvalidData, e)))?;
        out.write_all(line.as_bytes()).map_err(io_err)?;
        out.write_all(b"\n").map_err(io_err)?;
        count += 1;
    }
    out.flush().map_err(io_err)?;
    Ok(count)
}
