//! Risk-aware sparse cross-attention: plan queries attend to the active agent
//! tokens with the normalized risk matrix added to the logits as an additive
//! prior, followed by layer norm and a small FFN.
//!
//! Weights are plain inputs (fixture files or test constructions); nothing
//! here is trained. With a zero risk-intensity factor and a full mask the
//! output reduces to standard masked cross-attention.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse_game::SparseGameGraph;

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttentionError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Elementwise nonlinearity of the FFN and adapter modulation paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }
}

/// Affine map `y = x W + b` applied to row vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl AffineMap {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>) -> Result<Self, AttentionError> {
        if weight.ncols() != bias.len() {
            return Err(AttentionError::DimensionMismatch {
                what: "affine bias".into(),
                expected: weight.ncols(),
                got: bias.len(),
            });
        }
        Ok(AffineMap { weight, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        x.dot(&self.weight) + &self.bias
    }
}

/// Projection matrices, FFN, layer-norm parameters, and the risk-intensity
/// factor for one attention block.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    pub ffn_hidden: AffineMap,
    pub ffn_out: AffineMap,
    pub ln_scale: Array1<f64>,
    pub ln_shift: Array1<f64>,
    pub activation: Activation,
    /// Additive weight of the normalized risk prior in the logits.
    pub beta: f64,
}

impl AttentionWeights {
    pub fn input_dim(&self) -> usize {
        self.w_q.nrows()
    }

    pub fn key_dim(&self) -> usize {
        self.w_q.ncols()
    }

    pub fn validate(&self) -> Result<(), AttentionError> {
        let d_in = self.w_q.nrows();
        let d_k = self.w_q.ncols();
        let check = |what: &str, expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(AttentionError::DimensionMismatch {
                    what: what.into(),
                    expected,
                    got,
                })
            }
        };
        check("w_k rows", d_in, self.w_k.nrows())?;
        check("w_k cols", d_k, self.w_k.ncols())?;
        check("w_v rows", d_in, self.w_v.nrows())?;
        check("w_v cols", d_k, self.w_v.ncols())?;
        check("ffn hidden input", d_k, self.ffn_hidden.in_dim())?;
        check("ffn output input", self.ffn_hidden.out_dim(), self.ffn_out.in_dim())?;
        check("ffn output", d_k, self.ffn_out.out_dim())?;
        check("layer-norm scale", d_k, self.ln_scale.len())?;
        check("layer-norm shift", d_k, self.ln_shift.len())?;
        if d_k == 0 {
            return Err(AttentionError::DimensionMismatch {
                what: "key dimension".into(),
                expected: 1,
                got: 0,
            });
        }
        let all_finite = self.w_q.iter().chain(self.w_k.iter()).chain(self.w_v.iter()).all(|v| v.is_finite())
            && self.ffn_hidden.weight.iter().chain(self.ffn_out.weight.iter()).all(|v| v.is_finite())
            && self.ffn_hidden.bias.iter().chain(self.ffn_out.bias.iter()).all(|v| v.is_finite())
            && self.ln_scale.iter().chain(self.ln_shift.iter()).all(|v| v.is_finite())
            && self.beta.is_finite();
        if !all_finite {
            return Err(AttentionError::NonFinite("attention weights"));
        }
        Ok(())
    }
}

/// Plan-query and agent-token embeddings sharing one input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSet {
    pub plan_queries: Array2<f64>,
    pub agent_tokens: Array2<f64>,
}

/// Result of one attention pass, keeping the intermediate distribution and
/// logits inspectable.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    /// Refined plan queries, P x d_k.
    pub refined: Array2<f64>,
    /// Row-stochastic attention over agents (zero rows where fully masked).
    pub attention: Array2<f64>,
    /// Biased logits with `-inf` at masked entries.
    pub logits: Array2<f64>,
}

/// Numerically stable softmax over a logit row; `-inf` marks masked entries,
/// which receive probability exactly 0. A fully masked row yields all zeros.
pub fn softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits
        .iter()
        .cloned()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return vec![0.0; logits.len()];
    }
    let exps: Vec<f64> = logits
        .iter()
        .map(|&v| if v.is_finite() { (v - max).exp() } else { 0.0 })
        .collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn layer_norm(x: ArrayView1<f64>, scale: &Array1<f64>, shift: &Array1<f64>) -> Array1<f64> {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let denom = (var + LAYER_NORM_EPS).sqrt();
    Array1::from_iter(
        x.iter()
            .zip(scale.iter())
            .zip(shift.iter())
            .map(|((&v, &g), &b)| g * (v - mean) / denom + b),
    )
}

/// Risk-biased sparse cross-attention over the active agents of `graph`.
///
/// Per plan row `p`: `logits[p][k] = q_p . k_k / sqrt(d_k) + beta * R[p][k]`
/// for active `k` and `-inf` otherwise; the softmax-weighted value sum is
/// layer-normalized and passed through the FFN. Rows with no active agent
/// aggregate to the zero vector before normalization.
pub fn risk_biased_attention(
    tokens: &TokenSet,
    graph: &SparseGameGraph,
    weights: &AttentionWeights,
) -> Result<AttentionOutput, AttentionError> {
    weights.validate()?;
    let p_n = tokens.plan_queries.nrows();
    let k_n = tokens.agent_tokens.nrows();
    let d_in = weights.input_dim();
    let mismatch = |what: &str, expected: usize, got: usize| AttentionError::DimensionMismatch {
        what: what.into(),
        expected,
        got,
    };
    if tokens.plan_queries.ncols() != d_in {
        return Err(mismatch("plan query width", d_in, tokens.plan_queries.ncols()));
    }
    if k_n > 0 && tokens.agent_tokens.ncols() != d_in {
        return Err(mismatch("agent token width", d_in, tokens.agent_tokens.ncols()));
    }
    if graph.rows() != p_n {
        return Err(mismatch("graph rows", p_n, graph.rows()));
    }
    if graph.cols() != k_n {
        return Err(mismatch("graph cols", k_n, graph.cols()));
    }

    let d_k = weights.key_dim();
    let scale = 1.0 / (d_k as f64).sqrt();
    let q = tokens.plan_queries.dot(&weights.w_q);
    let k = tokens.agent_tokens.dot(&weights.w_k);
    let v = tokens.agent_tokens.dot(&weights.w_v);

    let mut logits = Array2::from_elem((p_n, k_n), f64::NEG_INFINITY);
    for p in 0..p_n {
        for kk in 0..k_n {
            if graph.active[p][kk] {
                logits[[p, kk]] =
                    q.row(p).dot(&k.row(kk)) * scale + weights.beta * graph.normalized[p][kk];
            }
        }
    }

    let mut attention = Array2::zeros((p_n, k_n));
    let mut refined = Array2::zeros((p_n, d_k));
    for p in 0..p_n {
        let row: Vec<f64> = logits.row(p).to_vec();
        let probs = softmax_row(&row);
        let mut alpha = Array1::zeros(d_k);
        for kk in 0..k_n {
            attention[[p, kk]] = probs[kk];
            if probs[kk] != 0.0 {
                alpha = alpha + &v.row(kk) * probs[kk];
            }
        }
        let normed = layer_norm(alpha.view(), &weights.ln_scale, &weights.ln_shift);
        let hidden = weights
            .ffn_hidden
            .apply(normed.view())
            .mapv(|x| weights.activation.apply(x));
        let out = weights.ffn_out.apply(hidden.view());
        refined.row_mut(p).assign(&out);
    }

    Ok(AttentionOutput {
        refined,
        attention,
        logits,
    })
}
