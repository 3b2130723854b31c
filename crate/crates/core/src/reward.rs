//! Listwise semantic reward, the weighted oracle reward, and pair annotation.

use std::collections::HashMap;

use crate::encoder::SemanticEncoder;
use crate::records::{Candidate, PreferencePair, TranslationTask};

/// Cosines are clamped to `[EPS, 1 − EPS]` before the logit.
pub const COSINE_EPS: f64 = 1e-6;
/// Below this population standard deviation every reward is 0.
pub const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RewardError {
    #[error("weight w = {0} outside [0, 1]")]
    WeightOutOfRange(f64),
    #[error("pair references unknown task `{0}`")]
    UnknownTask(String),
    #[error("pair for task `{task_id}` references a {role} absent from the candidate list")]
    CandidateMissing { task_id: String, role: &'static str },
}

/// Scores of one candidate within its list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardEntry {
    /// Clamped cosine to the source.
    pub cosine: f64,
    pub logit: f64,
    /// z-scored logit.
    pub semantic: f64,
}

/// z-scores of the clamped logits of `cosines` (population statistics).
pub fn rewards_from_cosines(cosines: &[f64]) -> Vec<RewardEntry> {
    if cosines.is_empty() {
        return Vec::new();
    }
    let clamped: Vec<f64> = cosines
        .iter()
        .map(|&c| if c.is_nan() { COSINE_EPS } else { c.clamp(COSINE_EPS, 1.0 - COSINE_EPS) })
        .collect();
    let logits: Vec<f64> = clamped.iter().map(|c| (c / (1.0 - c)).ln()).collect();
    let n = logits.len() as f64;
    let mean = logits.iter().sum::<f64>() / n;
    let var = logits.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    clamped
        .iter()
        .zip(&logits)
        .map(|(&cosine, &logit)| RewardEntry {
            cosine,
            logit,
            semantic: if std < DEGENERATE_STD { 0.0 } else { (logit - mean) / std },
        })
        .collect()
}

/// Per-candidate semantic reward of translations of `source`.
pub fn semantic_rewards<S: AsRef<str>>(encoder: &SemanticEncoder, source: &str, candidates: &[S]) -> Vec<f64> {
    let anchor = encoder.embed(source).ok();
    let cosines: Vec<f64> = candidates
        .iter()
        .map(|c| match (&anchor, encoder.embed(c.as_ref())) {
            (Some(a), Ok(z)) => crate::encoder::dot(a, &z),
            _ => 0.0,
        })
        .collect();
    rewards_from_cosines(&cosines).into_iter().map(|e| e.semantic).collect()
}

/// `w·r_g + (1−w)·r_s`.
pub fn combined_reward(r_g: f64, r_s: f64, w: f64) -> Result<f64, RewardError> {
    if !(0.0..=1.0).contains(&w) {
        return Err(RewardError::WeightOutOfRange(w));
    }
    if w == 1.0 {
        return Ok(r_g);
    }
    if w == 0.0 {
        return Ok(r_s);
    }
    Ok(w * r_g + (1.0 - w) * r_s)
}

/// Fills `semantic_reward` on every candidate, normalising within each task's list.
pub fn score_candidates(
    encoder: &SemanticEncoder,
    tasks: &[TranslationTask],
    candidates: &mut [Candidate],
) -> Result<(), RewardError> {
    let sources: HashMap<&str, &str> = tasks.iter().map(|t| (t.id.as_str(), t.source_code.as_str())).collect();
    let mut groups: HashMap<String, Vec<usize>> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        groups
            .entry(c.task_id.clone())
            .or_insert_with(|| {
                order.push(c.task_id.clone());
                Vec::new()
            })
            .push(i);
    }
    for task_id in order {
        let idx = &groups[&task_id];
        let source = sources
            .get(task_id.as_str())
            .ok_or_else(|| RewardError::UnknownTask(task_id.clone()))?;
        let texts: Vec<&str> = idx.iter().map(|&i| candidates[i].code.as_str()).collect();
        let rs = semantic_rewards(encoder, source, &texts);
        for (&i, r) in idx.iter().zip(rs) {
            candidates[i].semantic_reward = Some(r);
        }
    }
    Ok(())
}

/// Sets `delta_semantic = r_s(chosen) − r_s(rejected)`, both normalised over
/// the task's candidate list in `candidates`.
pub fn annotate_pairs(
    encoder: &SemanticEncoder,
    tasks: &[TranslationTask],
    candidates: &[Candidate],
    pairs: &[PreferencePair],
) -> Result<Vec<PreferencePair>, RewardError> {
    let sources: HashMap<&str, &str> = tasks.iter().map(|t| (t.id.as_str(), t.source_code.as_str())).collect();
    let mut lists: HashMap<&str, Vec<&str>> = HashMap::new();
    for c in candidates {
        lists.entry(c.task_id.as_str()).or_default().push(c.code.as_str());
    }
    let mut cache: HashMap<&str, HashMap<&str, f64>> = HashMap::new();
    pairs
        .iter()
        .map(|pair| {
            let task_id = pair.task_id.as_str();
            let source = sources
                .get(task_id)
                .ok_or_else(|| RewardError::UnknownTask(pair.task_id.clone()))?;
            let list = lists.get(task_id).map(Vec::as_slice).unwrap_or(&[]);
            let scores = cache.entry(task_id).or_insert_with(|| {
                let rs = semantic_rewards(encoder, source, list);
                list.iter().copied().zip(rs).collect()
            });
            let missing = |role| RewardError::CandidateMissing {
                task_id: pair.task_id.clone(),
                role,
            };
            let rw = *scores.get(pair.chosen.as_str()).ok_or_else(|| missing("chosen"))?;
            let rl = *scores.get(pair.rejected.as_str()).ok_or_else(|| missing("rejected"))?;
            let mut out = pair.clone();
            out.delta_semantic = Some(rw - rl);
            Ok(out)
        })
        .collect()
}
