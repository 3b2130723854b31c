//! Preference losses over precomputed sequence log-probabilities.
//!
//! Every loss returns its value together with the exact partial derivatives
//! with respect to the four log-probabilities of a pair, so any model that
//! can differentiate `log π(y|x)` can train on them.
//!
//! With `Δ = (log π(y_w) − log π_ref(y_w)) − (log π(y_l) − log π_ref(y_l))`:
//!
//! ```text
//! CTO    −log σ( (β/w)·Δ − ((1−w)/w)·Δr )
//! DPO    −log σ( β·Δ )
//! IPO    ( Δ − 1/(2τ) )²
//! SimPO  −log σ( (β/|y_w|)·log π(y_w) − (β/|y_l|)·log π(y_l) − γ )
//! ```

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossVariant {
    Cto,
    Dpo,
    Ipo,
    Simpo,
}

impl LossVariant {
    pub fn name(self) -> &'static str {
        match self {
            LossVariant::Cto => "cto",
            LossVariant::Dpo => "dpo",
            LossVariant::Ipo => "ipo",
            LossVariant::Simpo => "simpo",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cto" => Some(LossVariant::Cto),
            "dpo" => Some(LossVariant::Dpo),
            "ipo" => Some(LossVariant::Ipo),
            "simpo" => Some(LossVariant::Simpo),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairBatchItem {
    pub logp_policy_chosen: f64,
    pub logp_policy_rejected: f64,
    pub logp_ref_chosen: f64,
    pub logp_ref_rejected: f64,
    /// Reward difference of the complementary objective, `r(y_w) − r(y_l)`.
    pub delta_reward: f64,
    pub len_chosen: Option<usize>,
    pub len_rejected: Option<usize>,
}

impl PairBatchItem {
    pub fn new(policy: (f64, f64), reference: (f64, f64), delta_reward: f64) -> Self {
        Self {
            logp_policy_chosen: policy.0,
            logp_policy_rejected: policy.1,
            logp_ref_chosen: reference.0,
            logp_ref_rejected: reference.1,
            delta_reward,
            len_chosen: None,
            len_rejected: None,
        }
    }

    pub fn with_lengths(mut self, chosen: usize, rejected: usize) -> Self {
        self.len_chosen = Some(chosen);
        self.len_rejected = Some(rejected);
        self
    }

    /// Policy-vs-reference log-ratio margin.
    pub fn margin(&self) -> f64 {
        (self.logp_policy_chosen - self.logp_ref_chosen) - (self.logp_policy_rejected - self.logp_ref_rejected)
    }

    fn validate(&self) -> Result<(), PrefOptError> {
        let lps = [
            self.logp_policy_chosen,
            self.logp_policy_rejected,
            self.logp_ref_chosen,
            self.logp_ref_rejected,
        ];
        if lps.iter().any(|v| !v.is_finite() || *v > 0.0) {
            return Err(PrefOptError::InvalidItem("log-probabilities must be finite and ≤ 0".into()));
        }
        if !self.delta_reward.is_finite() {
            return Err(PrefOptError::InvalidItem("delta_reward must be finite".into()));
        }
        if self.len_chosen == Some(0) || self.len_rejected == Some(0) {
            return Err(PrefOptError::InvalidItem("lengths must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub beta: f64,
    pub w: f64,
    pub variant: LossVariant,
    pub gamma: f64,
    pub tau_ipo: f64,
}

impl LossParams {
    pub fn new(variant: LossVariant, beta: f64, w: f64) -> Result<Self, PrefOptError> {
        let p = Self {
            beta,
            w,
            variant,
            gamma: 0.5,
            tau_ipo: 0.1,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PrefOptError> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(PrefOptError::InvalidParams(format!("beta = {} must be > 0", self.beta)));
        }
        if !(self.w > 0.0 && self.w <= 1.0) {
            return Err(PrefOptError::InvalidParams(format!("w = {} must lie in (0, 1]", self.w)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(PrefOptError::InvalidParams(format!("gamma = {} must be ≥ 0", self.gamma)));
        }
        if !(self.tau_ipo > 0.0 && self.tau_ipo.is_finite()) {
            return Err(PrefOptError::InvalidParams(format!("tau_ipo = {} must be > 0", self.tau_ipo)));
        }
        Ok(())
    }
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            beta: 0.1,
            w: 0.5,
            variant: LossVariant::Cto,
            gamma: 0.5,
            tau_ipo: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PrefOptError {
    #[error("invalid loss parameters: {0}")]
    InvalidParams(String),
    #[error("invalid pair item: {0}")]
    InvalidItem(String),
    #[error("SimPO needs sequence lengths for both responses")]
    MissingLengths,
    #[error("empty batch")]
    EmptyBatch,
}

/// Partial derivatives of a loss with respect to the four log-probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossGrad {
    pub policy_chosen: f64,
    pub policy_rejected: f64,
    pub ref_chosen: f64,
    pub ref_rejected: f64,
}

impl LossGrad {
    fn from_margin(d_margin: f64) -> Self {
        Self {
            policy_chosen: d_margin,
            policy_rejected: -d_margin,
            ref_chosen: -d_margin,
            ref_rejected: d_margin,
        }
    }

    fn scaled(self, s: f64) -> Self {
        Self {
            policy_chosen: self.policy_chosen * s,
            policy_rejected: self.policy_rejected * s,
            ref_chosen: self.ref_chosen * s,
            ref_rejected: self.ref_rejected * s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    pub grad: LossGrad,
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `−log σ(z)` and its derivative in `z`.
fn neg_log_sigmoid(z: f64) -> (f64, f64) {
    (softplus(-z), -sigmoid(-z))
}

pub fn cto_loss(item: &PairBatchItem, params: &LossParams) -> Result<LossValue, PrefOptError> {
    params.validate()?;
    item.validate()?;
    let scale = params.beta / params.w;
    let bias = (1.0 - params.w) / params.w;
    let z = scale * item.margin() - bias * item.delta_reward;
    let (loss, dz) = neg_log_sigmoid(z);
    Ok(LossValue {
        loss,
        grad: LossGrad::from_margin(dz * scale),
    })
}

pub fn dpo_loss(item: &PairBatchItem, params: &LossParams) -> Result<LossValue, PrefOptError> {
    params.validate()?;
    item.validate()?;
    let (loss, dz) = neg_log_sigmoid(params.beta * item.margin());
    Ok(LossValue {
        loss,
        grad: LossGrad::from_margin(dz * params.beta),
    })
}

pub fn ipo_loss(item: &PairBatchItem, params: &LossParams) -> Result<LossValue, PrefOptError> {
    params.validate()?;
    item.validate()?;
    let gap = item.margin() - 1.0 / (2.0 * params.tau_ipo);
    Ok(LossValue {
        loss: gap * gap,
        grad: LossGrad::from_margin(2.0 * gap),
    })
}

pub fn simpo_loss(item: &PairBatchItem, params: &LossParams) -> Result<LossValue, PrefOptError> {
    params.validate()?;
    item.validate()?;
    let (Some(lw), Some(ll)) = (item.len_chosen, item.len_rejected) else {
        return Err(PrefOptError::MissingLengths);
    };
    let cw = params.beta / lw as f64;
    let cl = params.beta / ll as f64;
    let z = cw * item.logp_policy_chosen - cl * item.logp_policy_rejected - params.gamma;
    let (loss, dz) = neg_log_sigmoid(z);
    Ok(LossValue {
        loss,
        grad: LossGrad {
            policy_chosen: dz * cw,
            policy_rejected: -dz * cl,
            ref_chosen: 0.0,
            ref_rejected: 0.0,
        },
    })
}

/// Dispatches on `params.variant`.
pub fn pair_loss(item: &PairBatchItem, params: &LossParams) -> Result<LossValue, PrefOptError> {
    match params.variant {
        LossVariant::Cto => cto_loss(item, params),
        LossVariant::Dpo => dpo_loss(item, params),
        LossVariant::Ipo => ipo_loss(item, params),
        LossVariant::Simpo => simpo_loss(item, params),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub mean: f64,
    /// Per-item gradients, already scaled by `1/n`.
    pub grads: Vec<LossGrad>,
}

/// Mean loss over the batch, summed left to right.
pub fn batch_loss(items: &[PairBatchItem], params: &LossParams) -> Result<BatchLoss, PrefOptError> {
    if items.is_empty() {
        return Err(PrefOptError::EmptyBatch);
    }
    let inv = 1.0 / items.len() as f64;
    let mut sum = 0.0;
    let mut grads = Vec::with_capacity(items.len());
    for item in items {
        let v = pair_loss(item, params)?;
        sum += v.loss;
        grads.push(v.grad.scaled(inv));
    }
    Ok(BatchLoss {
        mean: sum * inv,
        grads,
    })
}
