use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{PolicyError, PolicyModel};
use crate::prefopt::{batch_loss, LossParams, PairBatchItem};
use crate::records::TranslationTask;
use crate::seeded_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SftConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SftConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 0.1,
            batch_size: 16,
            seed: 0,
        }
    }
}

fn apply(params: &mut [f64], grad: &[f64], lr: f64) {
    for (p, g) in params.iter_mut().zip(grad) {
        *p += lr * g;
    }
}

/// Mini-batch gradient descent on mean negative log-likelihood of the
/// reference translations. Returns the per-epoch mean NLL (per sequence).
pub fn sft_train(model: &mut PolicyModel, tasks: &[TranslationTask], cfg: &SftConfig) -> Result<Vec<f64>, PolicyError> {
    if cfg.batch_size == 0 {
        return Err(PolicyError::Config("batch_size must be ≥ 1".into()));
    }
    let data = tasks
        .iter()
        .map(|t| {
            let reference = t
                .reference_code
                .as_deref()
                .ok_or_else(|| PolicyError::MissingReference(t.id.clone()))?;
            Ok((model.vocab.encode_source(&t.source_code), model.vocab.encode_target(reference)))
        })
        .collect::<Result<Vec<_>, PolicyError>>()?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = seeded_rng(cfg.seed, 0x7366_7400);
    let mut grad = vec![0.0; model.num_params()];
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            let mut batch_nll = 0.0;
            for &i in batch {
                let (src, tgt) = &data[i];
                batch_nll -= model.logprob_grad_into(src, tgt, scale, &mut grad)?;
            }
            if !batch_nll.is_finite() {
                return Err(PolicyError::NonFinite { epoch, batch: batch_idx });
            }
            total += batch_nll;
            // ascend log-likelihood
            apply(&mut model.params, &grad, cfg.learning_rate);
        }
        history.push(total / data.len().max(1) as f64);
    }
    if cfg.epochs > 0 {
        model.lineage = format!("{},sft={}", model.lineage, cfg.seed);
    }
    Ok(history)
}

/// One preference example with its source text and reward difference.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefExample {
    pub source: String,
    pub chosen: String,
    pub rejected: String,
    pub delta_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrefTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for PrefTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 4,
            learning_rate: 0.01,
            batch_size: 16,
            seed: 0,
        }
    }
}

struct Encoded {
    source: Vec<Vec<usize>>,
    chosen: Vec<usize>,
    rejected: Vec<usize>,
    ref_chosen: f64,
    ref_rejected: f64,
    delta: f64,
}

/// Gradient descent on the batch preference loss. Reference log-probabilities
/// come from `reference` once per pair; `reference` is never modified.
/// Returns the per-epoch mean loss.
pub fn pref_train(
    model: &mut PolicyModel,
    reference: &PolicyModel,
    examples: &[PrefExample],
    params: &LossParams,
    cfg: &PrefTrainConfig,
) -> Result<Vec<f64>, PolicyError> {
    params.validate()?;
    if cfg.batch_size == 0 {
        return Err(PolicyError::Config("batch_size must be ≥ 1".into()));
    }
    if model.vocab != reference.vocab {
        return Err(PolicyError::Config("policy and reference vocabularies differ".into()));
    }
    let data = examples
        .iter()
        .map(|ex| {
            let v = &model.vocab;
            let source = v.encode_source(&ex.source);
            let chosen = v.encode_target(&ex.chosen);
            let rejected = v.encode_target(&ex.rejected);
            let ref_chosen = reference.logprob(&source, &chosen)?;
            let ref_rejected = reference.logprob(&source, &rejected)?;
            Ok(Encoded {
                source,
                chosen,
                rejected,
                ref_chosen,
                ref_rejected,
                delta: ex.delta_reward,
            })
        })
        .collect::<Result<Vec<_>, PolicyError>>()?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = seeded_rng(cfg.seed, 0x7072_6566);
    let n_params = model.num_params();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut items = Vec::with_capacity(batch.len());
            let mut grads = Vec::with_capacity(batch.len());
            for &i in batch {
                let d = &data[i];
                let (lp_c, g_c) = model.seq_logprob(&d.source, &d.chosen)?;
                let (lp_r, g_r) = model.seq_logprob(&d.source, &d.rejected)?;
                if !(lp_c.is_finite() && lp_r.is_finite()) {
                    return Err(PolicyError::NonFinite { epoch, batch: batch_idx });
                }
                let lp_c = lp_c.min(0.0);
                let lp_r = lp_r.min(0.0);
                items.push(
                    PairBatchItem::new((lp_c, lp_r), (d.ref_chosen.min(0.0), d.ref_rejected.min(0.0)), d.delta)
                        .with_lengths(d.chosen.len(), d.rejected.len()),
                );
                grads.push((g_c, g_r));
            }
            let loss = batch_loss(&items, params)?;
            if !loss.mean.is_finite() {
                return Err(PolicyError::NonFinite { epoch, batch: batch_idx });
            }
            total += loss.mean * batch.len() as f64;
            let mut step = vec![0.0; n_params];
            for (lg, (g_c, g_r)) in loss.grads.iter().zip(&grads) {
                for k in 0..n_params {
                    step[k] += lg.policy_chosen * g_c[k] + lg.policy_rejected * g_r[k];
                }
            }
            // descend the loss
            apply(&mut model.params, &step, -cfg.learning_rate);
        }
        history.push(total / data.len().max(1) as f64);
    }
    if cfg.epochs > 0 {
        model.lineage = format!("{},pref={}", model.lineage, cfg.seed);
    }
    Ok(history)
}
