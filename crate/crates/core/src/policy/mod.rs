//! A small windowed sequence-to-sequence translator with exact gradients.
//!
//! Target tokens are predicted one at a time from the previous target token
//! and a fixed window of source tokens around an aligned position. The
//! alignment is monotonic and line-synchronous: after the decoder has emitted
//! `k` statement terminators it reads source line `k`, at the same offset
//! within the line as the current target offset within its statement.
//!
//! ```text
//! a_t = Σ_s M_s · emb(token_s) + b      (s ranges over window slots + previous token)
//! h_t = tanh(a_t)
//! p_t = softmax(W · h_t + c)
//! ```
//!
//! All parameters live in one flat vector so gradients are plain `Vec<f64>`.

mod train;

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::microlang::{self, Language};
use crate::seeded_rng;

pub use train::{pref_train, sft_train, PrefExample, PrefTrainConfig, SftConfig};

pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";
/// Window slot before the start of a source line.
pub const PAD: &str = "<pad>";
/// Window slot past the end of a source line.
pub const EOL: &str = "<eol>";

/// Hard cap on model size.
pub const MAX_PARAMETERS: usize = 200_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("token id {id} outside vocabulary of size {size}")]
    OutOfVocabulary { id: usize, size: usize },
    #[error("sequence of length {len} exceeds max length {max}")]
    TooLong { len: usize, max: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("task `{0}` has no reference translation")]
    MissingReference(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Loss(#[from] crate::prefopt::PrefOptError),
}

/// Dense token ↔ id map shared by both languages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
    /// Statement terminator that advances the source line.
    terminator: Option<usize>,
}

impl Vocab {
    /// Builds a vocabulary from special tokens followed by `tokens` (duplicates dropped).
    pub fn new<I, S>(tokens: I, terminator: Option<&str>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocab {
            tokens: Vec::new(),
            ids: HashMap::new(),
            terminator: None,
        };
        for t in [BOS, EOS, UNK, PAD, EOL].into_iter().map(String::from).chain(tokens.into_iter().map(Into::into)) {
            if !v.ids.contains_key(&t) {
                v.ids.insert(t.clone(), v.tokens.len());
                v.tokens.push(t);
            }
        }
        v.terminator = terminator.and_then(|t| v.ids.get(t).copied());
        v
    }

    /// SRCL and TGTL keywords and symbols plus the given identifiers and
    /// literals `0..=max_literal`.
    pub fn micro(identifiers: &[String], max_literal: i64) -> Self {
        let fixed = ["let", "out", "in", "=", "+", "-", "*", "(", ")", ":=", ";", "emit", "read", "plus", "minus", "times"];
        let toks = fixed
            .iter()
            .map(|s| s.to_string())
            .chain(identifiers.iter().cloned())
            .chain((0..=max_literal).map(|v| v.to_string()));
        Vocab::new(toks, Some(";"))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(self.unk())
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn bos(&self) -> usize {
        0
    }
    pub fn eos(&self) -> usize {
        1
    }
    pub fn unk(&self) -> usize {
        2
    }
    pub fn pad(&self) -> usize {
        3
    }
    pub fn eol(&self) -> usize {
        4
    }

    pub fn terminator(&self) -> Option<usize> {
        self.terminator
    }

    /// FNV-1a over the token list; identifies the vocabulary in checkpoints.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in &self.tokens {
            for b in t.bytes().chain([0u8]) {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    /// Source text as token ids, one vector per line. Lines that do not lex
    /// as SRCL fall back to whitespace splitting.
    pub fn encode_source(&self, text: &str) -> Vec<Vec<usize>> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|line| match microlang::tokenize(line, Language::Srcl) {
                Ok(toks) => toks.iter().map(|(t, _)| self.id(t)).collect(),
                Err(_) => line.split_whitespace().map(|t| self.id(t)).collect(),
            })
            .collect()
    }

    /// Target text as token ids followed by EOS.
    pub fn encode_target(&self, text: &str) -> Vec<usize> {
        let mut ids: Vec<usize> = match microlang::tokenize(text, Language::Tgtl) {
            Ok(toks) => toks.iter().map(|(t, _)| self.id(t)).collect(),
            Err(_) => text.split_whitespace().map(|t| self.id(t)).collect(),
        };
        ids.push(self.eos());
        ids
    }

    /// Joins tokens with spaces, breaking the line after each terminator.
    /// Stops at the first EOS.
    pub fn decode_target(&self, ids: &[usize]) -> String {
        let mut out = String::new();
        for &id in ids {
            if id == self.eos() {
                break;
            }
            if !out.is_empty() && !out.ends_with('\n') {
                out.push(' ');
            }
            out.push_str(self.token(id).unwrap_or(UNK));
            if Some(id) == self.terminator {
                out.push('\n');
            }
        }
        out.trim_end().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Source offsets read around the aligned position.
    pub window: Vec<i32>,
    pub max_len: usize,
    pub init_scale: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            embed_dim: 16,
            hidden_dim: 48,
            window: vec![-1, 0, 1, 2],
            max_len: 96,
            init_scale: 0.1,
        }
    }
}

/// Offsets of each parameter block inside the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    vocab: usize,
    dim: usize,
    hidden: usize,
    slots: usize,
    emb: usize,
    mix: usize,
    bias_h: usize,
    out: usize,
    bias_out: usize,
    total: usize,
}

impl Layout {
    fn new(vocab: usize, dim: usize, hidden: usize, slots: usize) -> Self {
        let emb = 0;
        let mix = emb + vocab * dim;
        let bias_h = mix + slots * hidden * dim;
        let out = bias_h + hidden;
        let bias_out = out + vocab * hidden;
        let total = bias_out + vocab;
        Self {
            vocab,
            dim,
            hidden,
            slots,
            emb,
            mix,
            bias_h,
            out,
            bias_out,
            total,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyModel {
    pub vocab: Vocab,
    pub config: PolicyConfig,
    pub params: Vec<f64>,
    /// Seeds of the stages that produced these parameters, e.g. `init=1,sft=1`.
    pub lineage: String,
    layout: Layout,
}

/// Forward cache of one decoding step.
struct Step {
    inputs: Vec<usize>,
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

/// Decoder position: source line and offset within the current statement.
#[derive(Debug, Clone, Copy, Default)]
struct Cursor {
    line: usize,
    offset: usize,
    prev: Option<usize>,
}

impl PolicyModel {
    fn with_params(vocab: Vocab, config: PolicyConfig, params: Vec<f64>, lineage: String) -> Result<Self, PolicyError> {
        if config.embed_dim == 0 || config.hidden_dim == 0 || config.window.is_empty() || config.max_len == 0 {
            return Err(PolicyError::Config("dimensions, window and max_len must be non-empty".into()));
        }
        let layout = Layout::new(vocab.len(), config.embed_dim, config.hidden_dim, config.window.len() + 1);
        if layout.total > MAX_PARAMETERS {
            return Err(PolicyError::Config(format!("{} parameters exceed {MAX_PARAMETERS}", layout.total)));
        }
        if params.len() != layout.total {
            return Err(PolicyError::Config(format!("expected {} parameters, got {}", layout.total, params.len())));
        }
        Ok(Self {
            vocab,
            config,
            params,
            lineage,
            layout,
        })
    }

    /// Seeded uniform initialisation in `[-init_scale, init_scale)`.
    pub fn new(vocab: Vocab, config: PolicyConfig, seed: u64) -> Result<Self, PolicyError> {
        let layout = Layout::new(vocab.len(), config.embed_dim, config.hidden_dim, config.window.len() + 1);
        let mut rng = seeded_rng(seed, 0x706f_6c69);
        let s = config.init_scale;
        let params = (0..layout.total).map(|_| rng.gen_range(-s..s)).collect();
        Self::with_params(vocab, config, params, format!("init={seed}"))
    }

    /// All-zero parameters: every conditional is uniform over the vocabulary.
    pub fn uniform(vocab: Vocab, config: PolicyConfig) -> Result<Self, PolicyError> {
        let layout = Layout::new(vocab.len(), config.embed_dim, config.hidden_dim, config.window.len() + 1);
        Self::with_params(vocab, config, vec![0.0; layout.total], "uniform".into())
    }

    pub fn num_params(&self) -> usize {
        self.layout.total
    }

    fn window_inputs(&self, source: &[Vec<usize>], cur: &Cursor) -> Vec<usize> {
        let v = &self.vocab;
        let mut inputs: Vec<usize> = self
            .config
            .window
            .iter()
            .map(|&o| match source.get(cur.line) {
                None => v.eos(),
                Some(line) => {
                    let pos = cur.offset as i64 + i64::from(o);
                    if pos < 0 {
                        v.pad()
                    } else {
                        line.get(pos as usize).copied().unwrap_or(v.eol())
                    }
                }
            })
            .collect();
        inputs.push(cur.prev.unwrap_or(v.bos()));
        inputs
    }

    fn advance(&self, cur: &mut Cursor, token: usize) {
        if Some(token) == self.vocab.terminator() {
            cur.line += 1;
            cur.offset = 0;
        } else {
            cur.offset += 1;
        }
        cur.prev = Some(token);
    }

    fn step(&self, inputs: Vec<usize>) -> Step {
        let l = &self.layout;
        let p = &self.params;
        let mut act: Vec<f64> = p[l.bias_h..l.bias_h + l.hidden].to_vec();
        for (s, &tok) in inputs.iter().enumerate() {
            let e = &p[l.emb + tok * l.dim..l.emb + (tok + 1) * l.dim];
            let m = &p[l.mix + s * l.hidden * l.dim..l.mix + (s + 1) * l.hidden * l.dim];
            for (k, a) in act.iter_mut().enumerate() {
                let row = &m[k * l.dim..(k + 1) * l.dim];
                *a += row.iter().zip(e).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        let hidden: Vec<f64> = act.iter().map(|a| a.tanh()).collect();
        let mut logits: Vec<f64> = p[l.bias_out..l.bias_out + l.vocab].to_vec();
        for (v, z) in logits.iter_mut().enumerate() {
            let row = &p[l.out + v * l.hidden..l.out + (v + 1) * l.hidden];
            *z += row.iter().zip(&hidden).map(|(x, y)| x * y).sum::<f64>();
        }
        let probs = softmax(&logits, 1.0);
        Step { inputs, hidden, probs }
    }

    /// Adds `scale · ∂ log p(target)/∂θ` of one step into `grad`.
    fn backward(&self, step: &Step, target: usize, scale: f64, grad: &mut [f64]) {
        let l = &self.layout;
        let p = &self.params;
        // ∂ log p_target / ∂ logits = onehot − p
        let g: Vec<f64> = step
            .probs
            .iter()
            .enumerate()
            .map(|(v, pv)| scale * (f64::from(u8::from(v == target)) - pv))
            .collect();
        let mut d_hidden = vec![0.0; l.hidden];
        for (v, gv) in g.iter().enumerate() {
            if *gv == 0.0 {
                continue;
            }
            grad[l.bias_out + v] += gv;
            let row = l.out + v * l.hidden;
            for k in 0..l.hidden {
                grad[row + k] += gv * step.hidden[k];
                d_hidden[k] += gv * p[row + k];
            }
        }
        let d_act: Vec<f64> = d_hidden
            .iter()
            .zip(&step.hidden)
            .map(|(d, h)| d * (1.0 - h * h))
            .collect();
        for k in 0..l.hidden {
            grad[l.bias_h + k] += d_act[k];
        }
        for (s, &tok) in step.inputs.iter().enumerate() {
            let e_off = l.emb + tok * l.dim;
            let m_off = l.mix + s * l.hidden * l.dim;
            for (k, dk) in d_act.iter().enumerate() {
                if *dk == 0.0 {
                    continue;
                }
                let row = m_off + k * l.dim;
                for j in 0..l.dim {
                    grad[row + j] += dk * p[e_off + j];
                    grad[e_off + j] += dk * p[row + j];
                }
            }
        }
    }

    fn check_ids(&self, ids: &[usize]) -> Result<(), PolicyError> {
        let size = self.vocab.len();
        match ids.iter().find(|&&id| id >= size) {
            Some(&id) => Err(PolicyError::OutOfVocabulary { id, size }),
            None => Ok(()),
        }
    }

    /// Conditional distribution of every position of `target` given its prefix.
    pub fn conditionals(&self, source: &[Vec<usize>], target: &[usize]) -> Result<Vec<Vec<f64>>, PolicyError> {
        source.iter().try_for_each(|l| self.check_ids(l))?;
        self.check_ids(target)?;
        let mut cur = Cursor::default();
        let mut out = Vec::with_capacity(target.len());
        for &tok in target {
            out.push(self.step(self.window_inputs(source, &cur)).probs);
            self.advance(&mut cur, tok);
        }
        Ok(out)
    }

    fn validate_pair(&self, source: &[Vec<usize>], target: &[usize]) -> Result<(), PolicyError> {
        source.iter().try_for_each(|l| self.check_ids(l))?;
        self.check_ids(target)?;
        if target.len() > self.config.max_len {
            return Err(PolicyError::TooLong {
                len: target.len(),
                max: self.config.max_len,
            });
        }
        Ok(())
    }

    /// `log π(target | source)`, summed over every position including EOS.
    pub fn logprob(&self, source: &[Vec<usize>], target: &[usize]) -> Result<f64, PolicyError> {
        self.validate_pair(source, target)?;
        let mut cur = Cursor::default();
        let mut total = 0.0;
        for &tok in target {
            let step = self.step(self.window_inputs(source, &cur));
            total += step.probs[tok].ln();
            self.advance(&mut cur, tok);
        }
        Ok(total)
    }

    /// Log-probability and `scale · ∂/∂θ` accumulated into `grad`.
    pub fn logprob_grad_into(
        &self,
        source: &[Vec<usize>],
        target: &[usize],
        scale: f64,
        grad: &mut [f64],
    ) -> Result<f64, PolicyError> {
        self.validate_pair(source, target)?;
        let mut cur = Cursor::default();
        let mut total = 0.0;
        for &tok in target {
            let step = self.step(self.window_inputs(source, &cur));
            total += step.probs[tok].ln();
            if scale != 0.0 {
                self.backward(&step, tok, scale, grad);
            }
            self.advance(&mut cur, tok);
        }
        Ok(total)
    }

    /// `(log π(y|x), ∂ log π(y|x) / ∂θ)`.
    pub fn seq_logprob(&self, source: &[Vec<usize>], target: &[usize]) -> Result<(f64, Vec<f64>), PolicyError> {
        let mut grad = vec![0.0; self.num_params()];
        let lp = self.logprob_grad_into(source, target, 1.0, &mut grad)?;
        Ok((lp, grad))
    }

    /// Ancestral sampling with logits divided by `temperature`; below 1e-6
    /// the argmax is taken. Generated ids exclude the final EOS.
    pub fn generate(&self, source: &[Vec<usize>], temperature: f64, rng: &mut impl Rng) -> Vec<usize> {
        let mut cur = Cursor::default();
        let mut out = Vec::new();
        while out.len() < self.config.max_len {
            let step = self.step(self.window_inputs(source, &cur));
            let tok = if temperature < 1e-6 {
                argmax(&step.probs)
            } else {
                let logp: Vec<f64> = step.probs.iter().map(|p| p.ln()).collect();
                let probs = softmax(&logp, temperature);
                sample_index(&probs, rng.gen())
            };
            if tok == self.vocab.eos() {
                break;
            }
            out.push(tok);
            self.advance(&mut cur, tok);
        }
        out
    }

    pub fn greedy(&self, source: &[Vec<usize>]) -> Vec<usize> {
        let mut rng = seeded_rng(0, 0);
        self.generate(source, 0.0, &mut rng)
    }

    /// `n` sampled token sequences; pure in `seed`.
    pub fn sample(&self, source: &[Vec<usize>], temperature: f64, seed: u64, n: usize) -> Vec<Vec<usize>> {
        let mut rng = seeded_rng(seed, 0x7361_6d70);
        (0..n).map(|_| self.generate(source, temperature, &mut rng)).collect()
    }

    /// Greedy translation of source text.
    pub fn translate(&self, source: &str) -> String {
        self.vocab.decode_target(&self.greedy(&self.vocab.encode_source(source)))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        let c = &self.config;
        let window: Vec<String> = c.window.iter().map(i32::to_string).collect();
        writeln!(
            out,
            "cto-policy v1 vocab={:016x} embed={} hidden={} window={} max_len={} lineage={}",
            self.vocab.fingerprint(),
            c.embed_dim,
            c.hidden_dim,
            window.join(","),
            c.max_len,
            self.lineage
        )?;
        writeln!(out, "{}", self.vocab.tokens[5..].join(" "))?;
        for chunk in self.params.chunks(16) {
            let row: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        out.flush()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PolicyError> {
        let bad = |m: String| PolicyError::Checkpoint(m);
        let file = File::open(path.as_ref()).map_err(|e| bad(e.to_string()))?;
        let mut lines = BufReader::new(file).lines();
        let mut next = || -> Result<String, PolicyError> {
            lines
                .next()
                .ok_or_else(|| bad("truncated checkpoint".into()))?
                .map_err(|e| bad(e.to_string()))
        };
        let header = next()?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("cto-policy") || fields.next() != Some("v1") {
            return Err(bad(format!("bad header {header:?}")));
        }
        let kv: HashMap<&str, &str> = fields.filter_map(|f| f.split_once('=')).collect();
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| bad(format!("missing `{k}`")));
        let num = |k: &str| -> Result<usize, PolicyError> { get(k)?.parse().map_err(|_| bad(format!("bad `{k}`"))) };
        let window = get("window")?
            .split(',')
            .map(|s| s.parse::<i32>().map_err(|_| bad("bad window".into())))
            .collect::<Result<Vec<_>, _>>()?;
        let config = PolicyConfig {
            embed_dim: num("embed")?,
            hidden_dim: num("hidden")?,
            window,
            max_len: num("max_len")?,
            init_scale: 0.0,
        };
        let tokens_line = next()?;
        let vocab = Vocab::new(tokens_line.split_whitespace(), Some(";"));
        let fp = format!("{:016x}", vocab.fingerprint());
        if fp != get("vocab")? {
            return Err(bad(format!("vocabulary fingerprint mismatch: {fp}")));
        }
        let lineage = get("lineage")?.to_string();
        let mut params = Vec::new();
        while let Ok(line) = next() {
            for v in line.split_whitespace() {
                params.push(v.parse::<f64>().map_err(|e| bad(format!("{v:?}: {e}")))?);
            }
        }
        Self::with_params(vocab, config, params, lineage)
    }
}

/// Softmax of `logits / temperature`.
pub fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| ((z - max) / temperature).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
