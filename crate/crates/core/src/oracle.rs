//! Binary syntactic verdicts from a grammar checker or an external compiler.
//!
//! External checks run in a fresh temporary directory: the candidate is
//! written there, `{file}` (and `{dir}`) in the command template are
//! substituted, and the verdict is the exit status. The directory is removed
//! when the check returns, whatever the outcome.

use std::collections::BTreeMap;
use std::fs::File;
use std::io;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::microlang::{self, Language};
use crate::records::{Candidate, CompileStatus};

/// Directory prepended to `PATH` for external tools when set.
pub const TOOLCHAIN_DIR_ENV: &str = "CTO_TOOLCHAIN_DIR";

pub const DEFAULT_DIAG_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendMode {
    BuiltinGrammar,
    ExternalCommand { command: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleBackend {
    pub language: String,
    pub mode: BackendMode,
    pub timeout: Duration,
    /// Name the candidate is written under inside the temp dir.
    pub file_name: String,
    pub diag_cap: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("backend misconfigured: {0}")]
    Misconfigured(String),
    #[error("tool not found: {program}")]
    ToolNotFound { program: String },
    #[error("I/O error during check: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntaxVerdict {
    pub pass: bool,
    pub diagnostics: String,
    pub duration: Duration,
}

fn default_file_name(language: &str) -> String {
    match language {
        "cpp" | "c++" => "main.cpp".into(),
        "java" => "Main.java".into(),
        "python" | "py" => "main.py".into(),
        other => format!("candidate.{other}"),
    }
}

/// Default command templates for the three real languages.
pub fn default_command(language: &str) -> Option<&'static str> {
    match language {
        "cpp" | "c++" => Some("g++ -fsyntax-only -x c++ {file}"),
        "java" => Some("javac -d {dir} {file}"),
        "python" | "py" => Some("python3 -m py_compile {file}"),
        _ => None,
    }
}

impl OracleBackend {
    pub fn builtin(language: Language) -> Self {
        Self {
            language: language.tag().to_string(),
            mode: BackendMode::BuiltinGrammar,
            timeout: Duration::from_secs(10),
            file_name: default_file_name(language.tag()),
            diag_cap: DEFAULT_DIAG_CAP,
        }
    }

    pub fn external(language: &str, command: &str, timeout: Duration) -> Result<Self, OracleError> {
        let backend = Self {
            language: language.to_string(),
            mode: BackendMode::ExternalCommand {
                command: command.to_string(),
            },
            timeout,
            file_name: default_file_name(language),
            diag_cap: DEFAULT_DIAG_CAP,
        };
        backend.validate()?;
        Ok(backend)
    }

    /// Builtin grammar for the micro-languages, default compiler otherwise.
    pub fn for_language(language: &str) -> Result<Self, OracleError> {
        if let Some(lang) = Language::from_tag(language) {
            return Ok(Self::builtin(lang));
        }
        let command = default_command(language)
            .ok_or_else(|| OracleError::Misconfigured(format!("no default command for `{language}`")))?;
        Self::external(language, command, Duration::from_secs(30))
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if self.timeout.is_zero() {
            return Err(OracleError::Misconfigured("timeout must be positive".into()));
        }
        match &self.mode {
            BackendMode::BuiltinGrammar => {
                if Language::from_tag(&self.language).is_none() {
                    return Err(OracleError::Misconfigured(format!(
                        "no builtin grammar for `{}`",
                        self.language
                    )));
                }
            }
            BackendMode::ExternalCommand { command } => {
                if !command.contains("{file}") {
                    return Err(OracleError::Misconfigured(
                        "command template lacks `{file}`".into(),
                    ));
                }
                if command.split_whitespace().next().is_none() {
                    return Err(OracleError::Misconfigured("empty command".into()));
                }
            }
        }
        Ok(())
    }
}

/// Per-language oracle settings as they appear in a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LanguageOracleConfig {
    pub command: Option<String>,
    pub timeout_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub diag_cap: usize,
    pub languages: BTreeMap<String, LanguageOracleConfig>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            diag_cap: DEFAULT_DIAG_CAP,
            languages: BTreeMap::new(),
        }
    }
}

impl OracleConfig {
    pub fn backend(&self, language: &str) -> Result<OracleBackend, OracleError> {
        let mut backend = OracleBackend::for_language(language);
        if let Some(lc) = self.languages.get(language) {
            let timeout = lc
                .timeout_secs
                .map(|s| {
                    if s.is_finite() && s > 0.0 {
                        Ok(Duration::from_secs_f64(s))
                    } else {
                        Err(OracleError::Misconfigured(format!("timeout_secs {s} for `{language}`")))
                    }
                })
                .transpose()?;
            if let Some(cmd) = &lc.command {
                backend = OracleBackend::external(language, cmd, timeout.unwrap_or(Duration::from_secs(30)));
            } else if let (Ok(b), Some(t)) = (backend.as_mut(), timeout) {
                b.timeout = t;
            }
        }
        let mut backend = backend?;
        backend.diag_cap = self.diag_cap;
        backend.validate()?;
        Ok(backend)
    }
}

fn truncate(mut s: String, cap: usize) -> String {
    if s.len() > cap {
        let mut cut = cap;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        s.truncate(cut);
    }
    s
}

fn search_path() -> Option<std::ffi::OsString> {
    let extra = std::env::var_os(TOOLCHAIN_DIR_ENV)?;
    let mut parts = vec![std::path::PathBuf::from(extra)];
    if let Some(path) = std::env::var_os("PATH") {
        parts.extend(std::env::split_paths(&path));
    }
    std::env::join_paths(parts).ok()
}

fn run_external(code: &str, backend: &OracleBackend, command: &str) -> Result<(bool, String), OracleError> {
    let dir = tempfile::tempdir()?;
    let file = dir.path().join(&backend.file_name);
    std::fs::write(&file, code)?;
    let run = run_in(dir.path(), &file, command, backend.timeout, None)?;
    dir.close()?;
    Ok((run.success, run.stdout + &run.stderr))
}

/// Exit status and captured streams of one templated command.
pub(crate) struct RunOutput {
    pub success: bool,
    pub stdout: String,
    pub stderr: String,
}

/// Runs a templated command inside `dir`. A timeout is reported as a
/// failure with `stderr = "timeout"`.
pub(crate) fn run_in(
    dir: &Path,
    file: &Path,
    template: &str,
    timeout: Duration,
    stdin_data: Option<&str>,
) -> Result<RunOutput, OracleError> {
    let file_s = file.to_string_lossy();
    let dir_s = dir.to_string_lossy();
    let argv: Vec<String> = template
        .split_whitespace()
        .map(|a| a.replace("{file}", &file_s).replace("{dir}", &dir_s))
        .collect();
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| OracleError::Misconfigured("empty command".into()))?;
    let out_path = dir.join(".oracle-stdout");
    let err_path = dir.join(".oracle-stderr");
    let in_path = dir.join(".oracle-stdin");
    std::fs::write(&in_path, stdin_data.unwrap_or(""))?;
    let mut cmd = Command::new(program);
    cmd.args(args)
        .current_dir(dir)
        .stdin(Stdio::from(File::open(&in_path)?))
        .stdout(Stdio::from(File::create(&out_path)?))
        .stderr(Stdio::from(File::create(&err_path)?));
    if let Some(path) = search_path() {
        cmd.env("PATH", path);
    }
    let mut child = cmd.spawn().map_err(|e| match e.kind() {
        io::ErrorKind::NotFound | io::ErrorKind::PermissionDenied => OracleError::ToolNotFound {
            program: program.clone(),
        },
        _ => OracleError::Io(e),
    })?;
    let status = match child.wait_timeout(timeout)? {
        Some(status) => status,
        None => {
            child.kill().ok();
            child.wait()?;
            return Ok(RunOutput {
                success: false,
                stdout: String::new(),
                stderr: "timeout".into(),
            });
        }
    };
    Ok(RunOutput {
        success: status.success(),
        stdout: std::fs::read_to_string(&out_path).unwrap_or_default(),
        stderr: std::fs::read_to_string(&err_path).unwrap_or_default(),
    })
}

/// Judges one piece of code. Exit status 0 (or a clean parse) is a pass.
pub fn check(code: &str, backend: &OracleBackend) -> Result<SyntaxVerdict, OracleError> {
    backend.validate()?;
    let start = Instant::now();
    let (pass, diagnostics) = match &backend.mode {
        BackendMode::BuiltinGrammar => {
            let lang = Language::from_tag(&backend.language)
                .ok_or_else(|| OracleError::Misconfigured(backend.language.clone()))?;
            match microlang::parse(code, lang) {
                Ok(_) => (true, String::new()),
                Err(e) => (false, e.to_string()),
            }
        }
        BackendMode::ExternalCommand { command } => run_external(code, backend, command)?,
    };
    Ok(SyntaxVerdict {
        pass,
        diagnostics: truncate(diagnostics, backend.diag_cap),
        duration: start.elapsed(),
    })
}

/// Candidates with verdicts filled in, plus the ones whose check errored.
/// Errored candidates keep `compile = unknown` and carry the error text.
#[derive(Debug)]
pub struct BatchOutcome {
    pub candidates: Vec<Candidate>,
    pub errors: Vec<(usize, OracleError)>,
}

pub fn check_batch(candidates: Vec<Candidate>, backend: &OracleBackend, parallelism: usize) -> BatchOutcome {
    check_batch_with(candidates, |_| backend, parallelism)
}

/// Checks every candidate on a pool of `parallelism` workers, choosing a
/// backend per candidate. Output order equals input order.
pub fn check_batch_with<'b, F>(candidates: Vec<Candidate>, backend_for: F, parallelism: usize) -> BatchOutcome
where
    F: Fn(&Candidate) -> &'b OracleBackend + Sync,
{
    let results = crate::par_map(&candidates, parallelism, |cand| check(&cand.code, backend_for(cand)));
    let mut errors = Vec::new();
    let candidates = candidates
        .into_iter()
        .zip(results)
        .enumerate()
        .map(|(i, (mut cand, result))| {
            match result {
                Ok(v) => {
                    cand.compile = if v.pass { CompileStatus::Pass } else { CompileStatus::Fail };
                    cand.syntactic_reward = Some(if v.pass { 1.0 } else { 0.0 });
                    cand.diagnostics = v.diagnostics;
                }
                Err(e) => {
                    cand.compile = CompileStatus::Unknown;
                    cand.syntactic_reward = None;
                    cand.diagnostics = e.to_string();
                    errors.push((i, e));
                }
            }
            cand
        })
        .collect();
    BatchOutcome { candidates, errors }
}
