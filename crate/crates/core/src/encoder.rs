//! Cross-lingual semantic encoder: hashed token n-gram features followed by
//! one shared linear projection and L2 normalisation.
//!
//! Source and target code go through the same parameters, so the cosine of
//! two embeddings is comparable across languages. Training minimises the
//! InfoNCE loss of each (anchor, positive, negatives) triplet.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::microlang::{self, Language, MutationKind};
use crate::records::{Candidate, LabeledNegative, TranslationTask, TripletRecord};
use crate::seeded_rng;

pub const DEFAULT_BUCKETS: usize = 4096;
pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_TAU: f64 = 0.07;

/// Sparse hashed n-gram counts, sorted by bucket.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    pub entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    pub fn from_map(map: BTreeMap<usize, f64>) -> Self {
        Self {
            entries: map.into_iter().filter(|(_, v)| *v > 0.0).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, bucket: usize) -> f64 {
        self.entries
            .binary_search_by_key(&bucket, |(i, _)| *i)
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }
}

fn fnv1a(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            h ^= 0x1f;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        for b in part.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Language-agnostic lexemes: word runs, digit runs, operator runs and
/// brackets. Statement separators (`;`, `,`) and whitespace are dropped.
pub fn code_tokens(code: &str) -> Vec<&str> {
    let bytes = code.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let class = |b: u8| -> u8 {
        match b {
            b'a'..=b'z' | b'A'..=b'Z' | b'0'..=b'9' | b'_' => 0,
            b'(' | b')' | b'[' | b']' | b'{' | b'}' => 1,
            b';' | b',' => 2,
            _ if b.is_ascii_whitespace() => 3,
            _ => 4,
        }
    };
    while i < bytes.len() {
        let c = class(bytes[i]);
        let start = i;
        i += 1;
        match c {
            0 | 4 => {
                while i < bytes.len() && class(bytes[i]) == c {
                    i += 1;
                }
                if c == 4 {
                    // keep multibyte UTF-8 sequences whole
                    while i < bytes.len() && !code.is_char_boundary(i) {
                        i += 1;
                    }
                }
                out.push(&code[start..i]);
            }
            1 => out.push(&code[start..i]),
            _ => {}
        }
    }
    out
}

/// Unigram and bigram counts hashed into `buckets` bins.
pub fn featurize(code: &str, buckets: usize) -> FeatureVector {
    let toks = code_tokens(code);
    let mut map: BTreeMap<usize, f64> = BTreeMap::new();
    let b = buckets as u64;
    for t in &toks {
        *map.entry((fnv1a(&["u", t]) % b) as usize).or_default() += 1.0;
    }
    for w in toks.windows(2) {
        *map.entry((fnv1a(&["b", w[0], w[1]]) % b) as usize).or_default() += 1.0;
    }
    FeatureVector::from_map(map)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EncoderError {
    #[error("degenerate (zero) embedding for snippet {snippet:?}")]
    Degenerate { snippet: String },
    #[error("triplet has no negatives")]
    EmptyNegatives,
    #[error("no triplets to train on")]
    EmptyTrainingSet,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticEncoder {
    pub buckets: usize,
    pub dim: usize,
    pub tau: f64,
    pub seed: u64,
    /// Row-major `buckets × dim`.
    pub projection: Vec<f64>,
}

impl SemanticEncoder {
    /// Uniform initialisation in `[-1, 1) / √buckets`.
    pub fn new(buckets: usize, dim: usize, tau: f64, seed: u64) -> Self {
        let mut rng = seeded_rng(seed, 0x656e_636f);
        let scale = 1.0 / (buckets as f64).sqrt();
        let projection = (0..buckets * dim).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
        Self {
            buckets,
            dim,
            tau,
            seed,
            projection,
        }
    }

    pub fn from_projection(buckets: usize, dim: usize, tau: f64, projection: Vec<f64>) -> Self {
        assert_eq!(projection.len(), buckets * dim);
        Self {
            buckets,
            dim,
            tau,
            seed: 0,
            projection,
        }
    }

    pub fn featurize(&self, code: &str) -> FeatureVector {
        featurize(code, self.buckets)
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.projection[r * self.dim..(r + 1) * self.dim]
    }

    fn raw(&self, fv: &FeatureVector) -> Vec<f64> {
        let mut e = vec![0.0; self.dim];
        for &(r, c) in &fv.entries {
            for (acc, p) in e.iter_mut().zip(self.row(r)) {
                *acc += c * p;
            }
        }
        e
    }

    /// Unit embedding of a feature vector, plus the pre-normalisation norm.
    fn unit(&self, fv: &FeatureVector) -> Option<(Vec<f64>, f64)> {
        let mut e = self.raw(fv);
        let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-300) || !norm.is_finite() {
            return None;
        }
        e.iter_mut().for_each(|v| *v /= norm);
        Some((e, norm))
    }

    pub fn embed_features(&self, fv: &FeatureVector) -> Option<Vec<f64>> {
        self.unit(fv).map(|(u, _)| u)
    }

    pub fn embed(&self, code: &str) -> Result<Vec<f64>, EncoderError> {
        self.embed_features(&self.featurize(code))
            .ok_or_else(|| EncoderError::Degenerate {
                snippet: code.chars().take(80).collect(),
            })
    }

    /// Cosine similarity; degenerate embeddings compare as 0.
    pub fn cosine(&self, a: &str, b: &str) -> f64 {
        match (self.embed(a), self.embed(b)) {
            (Ok(x), Ok(y)) => dot(&x, &y),
            _ => 0.0,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "cto-encoder v1 {} {} {} {}", self.buckets, self.dim, self.tau, self.seed)?;
        for r in 0..self.buckets {
            let row: Vec<String> = self.row(r).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        out.flush()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EncoderError> {
        let bad = |m: String| EncoderError::Checkpoint(m);
        let file = File::open(path.as_ref()).map_err(|e| bad(e.to_string()))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty file".into()))?
            .map_err(|e| bad(e.to_string()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "cto-encoder" || fields[1] != "v1" {
            return Err(bad(format!("bad header {header:?}")));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
        let buckets: usize = fields[2].parse().map_err(|_| bad("buckets".into()))?;
        let dim: usize = fields[3].parse().map_err(|_| bad("dim".into()))?;
        let tau = parse(fields[4])?;
        let seed: u64 = fields[5].parse().map_err(|_| bad("seed".into()))?;
        let mut projection = Vec::with_capacity(buckets * dim);
        for line in lines {
            let line = line.map_err(|e| bad(e.to_string()))?;
            for v in line.split_whitespace() {
                projection.push(parse(v)?);
            }
        }
        if projection.len() != buckets * dim {
            return Err(bad(format!("expected {} values, found {}", buckets * dim, projection.len())));
        }
        Ok(Self {
            buckets,
            dim,
            tau,
            seed,
            projection,
        })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sparse gradient with respect to the projection, keyed by row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProjectionGrad {
    pub rows: BTreeMap<usize, Vec<f64>>,
}

impl ProjectionGrad {
    fn add_outer(&mut self, fv: &FeatureVector, g: &[f64], dim: usize) {
        for &(r, c) in &fv.entries {
            let row = self.rows.entry(r).or_insert_with(|| vec![0.0; dim]);
            for (acc, gv) in row.iter_mut().zip(g) {
                *acc += c * gv;
            }
        }
    }

    /// Dense value at (row, col).
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.rows.get(&row).map_or(0.0, |r| r[col])
    }

    fn accumulate(&mut self, other: &ProjectionGrad, scale: f64) {
        for (r, g) in &other.rows {
            let row = self.rows.entry(*r).or_insert_with(|| vec![0.0; g.len()]);
            for (acc, v) in row.iter_mut().zip(g) {
                *acc += scale * v;
            }
        }
    }
}

/// Featurised triplet, ready for repeated loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTriplet {
    pub anchor: FeatureVector,
    pub positive: FeatureVector,
    pub negatives: Vec<FeatureVector>,
}

impl FeatureTriplet {
    pub fn from_record(encoder: &SemanticEncoder, t: &TripletRecord) -> Self {
        Self {
            anchor: encoder.featurize(&t.anchor),
            positive: encoder.featurize(&t.positive),
            negatives: t.negatives.iter().map(|n| encoder.featurize(&n.code)).collect(),
        }
    }
}

/// `tangent(g) = (g − (u·g) u) / ‖e‖`: pulls a gradient in `u = e/‖e‖` back to `e`.
fn through_normalisation(u: &[f64], norm: f64, g: &[f64]) -> Vec<f64> {
    let proj = dot(u, g);
    u.iter().zip(g).map(|(ui, gi)| (gi - proj * ui) / norm).collect()
}

/// InfoNCE of one featurised triplet and its exact gradient.
pub fn infonce_features(
    encoder: &SemanticEncoder,
    t: &FeatureTriplet,
) -> Result<(f64, ProjectionGrad), EncoderError> {
    if t.negatives.is_empty() {
        return Err(EncoderError::EmptyNegatives);
    }
    let degenerate = |what: &str| EncoderError::Degenerate {
        snippet: what.to_string(),
    };
    let (ua, na) = encoder.unit(&t.anchor).ok_or_else(|| degenerate("anchor"))?;
    let targets: Vec<&FeatureVector> = std::iter::once(&t.positive).chain(&t.negatives).collect();
    let mut units = Vec::with_capacity(targets.len());
    for (j, fv) in targets.iter().enumerate() {
        let what = if j == 0 { "positive".to_string() } else { format!("negative {}", j - 1) };
        units.push(encoder.unit(fv).ok_or_else(|| degenerate(&what))?);
    }
    let logits: Vec<f64> = units.iter().map(|(u, _)| dot(&ua, u) / encoder.tau).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    let lse = max + sum_exp.ln();
    let loss = lse - logits[0];

    let mut grad = ProjectionGrad::default();
    let mut d_ua = vec![0.0; encoder.dim];
    for (j, (u, norm)) in units.iter().enumerate() {
        let p = (logits[j] - lse).exp();
        let g = (p - if j == 0 { 1.0 } else { 0.0 }) / encoder.tau;
        for (acc, v) in d_ua.iter_mut().zip(u) {
            *acc += g * v;
        }
        let d_u: Vec<f64> = ua.iter().map(|v| g * v).collect();
        grad.add_outer(targets[j], &through_normalisation(u, *norm, &d_u), encoder.dim);
    }
    grad.add_outer(&t.anchor, &through_normalisation(&ua, na, &d_ua), encoder.dim);
    Ok((loss, grad))
}

pub fn infonce_loss(encoder: &SemanticEncoder, triplet: &TripletRecord) -> Result<(f64, ProjectionGrad), EncoderError> {
    if triplet.negatives.is_empty() {
        return Err(EncoderError::EmptyNegatives);
    }
    infonce_features(encoder, &FeatureTriplet::from_record(encoder, triplet))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub tau: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 30,
            batch_size: 16,
            seed: 0,
            tau: DEFAULT_TAU,
        }
    }
}

/// Source-anchored triplet of one task: its reference is the positive and
/// `k` labelled mutants of the reference are the negatives.
pub fn build_triplet(
    task: &TranslationTask,
    kinds: &[MutationKind],
    k: usize,
    seed: u64,
) -> Result<TripletRecord, TripletError> {
    let fail = |reason: String| TripletError {
        task_id: task.id.clone(),
        reason,
    };
    let reference = task
        .reference_code
        .as_deref()
        .ok_or_else(|| fail("no reference translation".into()))?;
    let program = microlang::parse(reference, Language::Tgtl).map_err(|e| fail(e.to_string()))?;
    let negatives = microlang::mutate(&program, kinds, k, seed, &task.tests)
        .map_err(|e| fail(e.to_string()))?
        .into_iter()
        .map(|(code, kind)| LabeledNegative {
            code,
            label: kind.label().to_string(),
        })
        .collect();
    Ok(TripletRecord {
        anchor: task.source_code.clone(),
        positive: reference.to_string(),
        negatives,
        extra: Default::default(),
    })
}

/// Seed used for the `index`-th task of a triplet set.
pub fn triplet_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(index as u64)
}

/// [`build_triplet`] over every task, task `i` using [`triplet_seed`]`(seed, i)`.
pub fn build_triplets(
    tasks: &[TranslationTask],
    kinds: &[MutationKind],
    k: usize,
    seed: u64,
) -> Result<Vec<TripletRecord>, TripletError> {
    tasks
        .iter()
        .enumerate()
        .map(|(i, task)| build_triplet(task, kinds, k, triplet_seed(seed, i)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("cannot build triplet for task `{task_id}`: {reason}")]
pub struct TripletError {
    pub task_id: String,
    pub reason: String,
}

/// Mini-batch gradient descent on mean InfoNCE. Returns the per-epoch mean
/// loss (measured before each batch's update).
pub fn train(
    encoder: &mut SemanticEncoder,
    triplets: &[TripletRecord],
    cfg: &TrainConfig,
) -> Result<Vec<f64>, EncoderError> {
    if triplets.is_empty() {
        return Err(EncoderError::EmptyTrainingSet);
    }
    if !(cfg.tau > 0.0) || cfg.batch_size == 0 {
        return Err(EncoderError::Config("tau must be > 0 and batch_size ≥ 1".into()));
    }
    encoder.tau = cfg.tau;
    let data: Vec<FeatureTriplet> = triplets
        .iter()
        .map(|t| FeatureTriplet::from_record(encoder, t))
        .collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = seeded_rng(cfg.seed, 0x7472_6e65);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut acc = ProjectionGrad::default();
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                let (loss, g) = infonce_features(encoder, &data[i])?;
                batch_loss += loss;
                acc.accumulate(&g, scale);
            }
            if !batch_loss.is_finite() {
                return Err(EncoderError::NonFinite {
                    epoch,
                    batch: batch_idx,
                });
            }
            epoch_loss += batch_loss;
            for (r, g) in &acc.rows {
                let row = &mut encoder.projection[r * encoder.dim..(r + 1) * encoder.dim];
                for (p, gv) in row.iter_mut().zip(g) {
                    *p -= cfg.learning_rate * gv;
                }
            }
        }
        history.push(epoch_loss / data.len() as f64);
    }
    Ok(history)
}

/// Fraction of triplets whose positive is strictly closer to the anchor
/// than every negative.
pub fn ranking_accuracy(encoder: &SemanticEncoder, triplets: &[TripletRecord]) -> f64 {
    if triplets.is_empty() {
        return 0.0;
    }
    let hits = triplets
        .iter()
        .filter(|t| {
            let pos = encoder.cosine(&t.anchor, &t.positive);
            t.negatives.iter().all(|n| encoder.cosine(&t.anchor, &n.code) < pos)
        })
        .count();
    hits as f64 / triplets.len() as f64
}

/// Writes `id,role,z0..` rows: one per task source, then one per candidate.
/// Candidate ids are `<task_id>/<k>` with `k` counting within the task.
/// Code without any features (an empty candidate, say) has no embedding and
/// gets no row; the returned count says how many rows were written.
pub fn dump_embeddings(
    encoder: &SemanticEncoder,
    tasks: &[TranslationTask],
    candidates: &[Candidate],
    path: impl AsRef<Path>,
) -> Result<usize, Box<dyn std::error::Error + Send + Sync>> {
    let mut out = BufWriter::new(File::create(path)?);
    let header: Vec<String> = ["id".to_string(), "role".to_string()]
        .into_iter()
        .chain((0..encoder.dim).map(|i| format!("z{i}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    let mut rows = 0;
    let mut write_row = |out: &mut BufWriter<File>, id: &str, role: &str, code: &str| -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
        let z = match encoder.embed(code) {
            Ok(z) => z,
            Err(EncoderError::Degenerate { .. }) => return Ok(()),
            Err(e) => return Err(e.into()),
        };
        let coords: Vec<String> = z.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{},{},{}", id.replace(',', "_"), role, coords.join(","))?;
        rows += 1;
        Ok(())
    };
    for t in tasks {
        write_row(&mut out, &t.id, "source", &t.source_code)?;
    }
    let mut counters: BTreeMap<&str, usize> = BTreeMap::new();
    for c in candidates {
        let k = counters.entry(&c.task_id).or_default();
        write_row(&mut out, &format!("{}/{}", c.task_id, k), "target", &c.code)?;
        *k += 1;
    }
    out.flush()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_empty_vector() {
        assert!(featurize("", 64).is_empty());
        assert!(featurize(" ; ;\n", 64).is_empty());
    }

    #[test]
    fn deterministic_features() {
        assert_eq!(featurize("x := 1 ;", 4096), featurize("x := 1 ;", 4096));
    }

    #[test]
    fn tokens_are_language_agnostic() {
        assert_eq!(code_tokens("x := 1 plus 2 ;"), vec!["x", ":=", "1", "plus", "2"]);
        assert_eq!(code_tokens("let x = (a+1)*b"), vec!["let", "x", "=", "(", "a", "+", "1", ")", "*", "b"]);
        assert_eq!(code_tokens("f(a, b);"), vec!["f", "(", "a", "b", ")"]);
    }

    #[test]
    fn operator_change_touches_only_its_ngrams() {
        let d = 1 << 20;
        let a = featurize("x := 1 plus 2 ;", d);
        let b = featurize("x := 1 minus 2 ;", d);
        let bucket = |parts: &[&str]| (fnv1a(parts) % d as u64) as usize;
        let only_a = [bucket(&["u", "plus"]), bucket(&["b", "1", "plus"]), bucket(&["b", "plus", "2"])];
        let only_b = [bucket(&["u", "minus"]), bucket(&["b", "1", "minus"]), bucket(&["b", "minus", "2"])];
        let mut all: Vec<usize> = a.entries.iter().chain(&b.entries).map(|(i, _)| *i).collect();
        all.sort_unstable();
        all.dedup();
        for i in all {
            let differs = a.get(i) != b.get(i);
            let touched = only_a.contains(&i) || only_b.contains(&i);
            assert_eq!(differs, touched, "bucket {i}");
        }
        for i in only_a {
            assert_eq!(a.get(i), 1.0);
        }
    }

    #[test]
    fn embeddings_are_unit() {
        let enc = SemanticEncoder::new(256, 8, 0.07, 3);
        for code in ["in a\nout a", "read a ;\nemit a times 2 ;", "x"] {
            let z = enc.embed(code).unwrap();
            let n: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-9);
            assert!((dot(&z, &z) - 1.0).abs() < 1e-9);
        }
        assert!(matches!(enc.embed(""), Err(EncoderError::Degenerate { .. })));
    }

    #[test]
    fn hand_computed_cosine() {
        // identity projection on 2 buckets: features (3, 4) and (4, 3)
        let enc = SemanticEncoder::from_projection(2, 2, 1.0, vec![1.0, 0.0, 0.0, 1.0]);
        let a = FeatureVector { entries: vec![(0, 3.0), (1, 4.0)] };
        let b = FeatureVector { entries: vec![(0, 4.0), (1, 3.0)] };
        let za = enc.embed_features(&a).unwrap();
        let zb = enc.embed_features(&b).unwrap();
        assert!((dot(&za, &zb) - 24.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn empty_negatives_rejected() {
        let enc = SemanticEncoder::new(64, 4, 0.07, 1);
        let t = TripletRecord {
            anchor: "in a".into(),
            positive: "read a ;".into(),
            negatives: vec![],
            extra: Default::default(),
        };
        assert_eq!(infonce_loss(&enc, &t).unwrap_err(), EncoderError::EmptyNegatives);
    }

    #[test]
    fn zero_epochs_is_identity() {
        let mut enc = SemanticEncoder::new(64, 4, 0.07, 1);
        let before = enc.clone();
        let t = TripletRecord {
            anchor: "in a\nout a".into(),
            positive: "read a ;\nemit a ;".into(),
            negatives: vec![crate::records::LabeledNegative { code: "read a ;\nemit b ;".into(), label: "identifier_swap".into() }],
            extra: Default::default(),
        };
        let cfg = TrainConfig { epochs: 0, tau: 0.07, ..TrainConfig::default() };
        assert!(train(&mut enc, &[t], &cfg).unwrap().is_empty());
        assert_eq!(enc, before);
    }

    #[test]
    fn checkpoint_round_trip() {
        let enc = SemanticEncoder::new(32, 3, 0.07, 9);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("enc.ckpt");
        enc.save(&path).unwrap();
        assert_eq!(SemanticEncoder::load(&path).unwrap(), enc);
    }
}
