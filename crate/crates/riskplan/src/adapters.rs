//! Perception-side adapters at desk scale: gated unidirectional fusion of
//! map-topology embeddings into detection embeddings, and residual
//! cross-attention refinement of static trajectory templates against a scene
//! context. Both run with externally supplied weight sets.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::attention::{Activation, AffineMap};
use crate::types::{Trajectory, TrajectorySample, Vec2, Velocity2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdapterError {
    #[error("gating is undefined for an empty map embedding set")]
    EmptyMap,
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
}

/// Map-element and detection-instance embeddings sharing one feature width.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub map_embeddings: Array2<f64>,
    pub det_embeddings: Array2<f64>,
}

/// Query/key/value projections for one single-head attention block.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionProj {
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
}

impl AttentionProj {
    fn check_square(&self, what: &str, dim: usize) -> Result<(), AdapterError> {
        for (name, m) in [("w_q", &self.w_q), ("w_k", &self.w_k), ("w_v", &self.w_v)] {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(AdapterError::DimensionMismatch {
                    what: format!("{what} {name}"),
                    expected: dim,
                    got: if m.nrows() != dim { m.nrows() } else { m.ncols() },
                });
            }
        }
        Ok(())
    }
}

fn self_attention(tokens: &Array2<f64>, proj: &AttentionProj) -> Array2<f64> {
    let n = tokens.nrows();
    let d = tokens.ncols();
    let q = tokens.dot(&proj.w_q);
    let k = tokens.dot(&proj.w_k);
    let v = tokens.dot(&proj.w_v);
    let scale = 1.0 / (d as f64).sqrt();
    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        let logits: Vec<f64> = (0..n).map(|j| q.row(i).dot(&k.row(j)) * scale).collect();
        let probs = crate::attention::softmax_row(&logits);
        let mut row = Array1::zeros(d);
        for (j, &p) in probs.iter().enumerate() {
            if p != 0.0 {
                row = row + &v.row(j) * p;
            }
        }
        out.row_mut(i).assign(&row);
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Weights of the gated map-to-detection fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct MapFusionWeights {
    /// Self-attention over the residual-augmented map embeddings.
    pub attn: AttentionProj,
    /// Bias added before the sigmoid gate; strongly negative values close
    /// the gate exactly.
    pub gate_bias: Array1<f64>,
    /// Per-row modulation of the detection embeddings.
    pub delta: AffineMap,
    pub activation: Activation,
}

/// Unidirectional gated fusion: pool the map embeddings into a scene-level
/// gate and modulate the detection embeddings residually.
///
/// `g = sigmoid(pool(selfattn(mean(E_map) + E_map)) + bias)` and the output
/// is `E_det + g * act(affine(E_det))`, row-broadcast. Map embeddings are
/// taken by shared reference and never altered.
pub fn gated_map_fusion(
    emb: &EmbeddingSet,
    weights: &MapFusionWeights,
) -> Result<Array2<f64>, AdapterError> {
    let n_map = emb.map_embeddings.nrows();
    if n_map == 0 {
        return Err(AdapterError::EmptyMap);
    }
    let c = emb.map_embeddings.ncols();
    weights.attn.check_square("fusion attention", c)?;
    if weights.gate_bias.len() != c {
        return Err(AdapterError::DimensionMismatch {
            what: "fusion gate bias".into(),
            expected: c,
            got: weights.gate_bias.len(),
        });
    }
    if emb.det_embeddings.nrows() > 0 && emb.det_embeddings.ncols() != c {
        return Err(AdapterError::DimensionMismatch {
            what: "detection embedding width".into(),
            expected: c,
            got: emb.det_embeddings.ncols(),
        });
    }
    if weights.delta.in_dim() != c || weights.delta.out_dim() != c {
        return Err(AdapterError::DimensionMismatch {
            what: "fusion delta".into(),
            expected: c,
            got: weights.delta.in_dim(),
        });
    }

    let scene = emb.map_embeddings.mean_axis(ndarray::Axis(0)).expect("n_map >= 1");
    let augmented = &emb.map_embeddings + &scene;
    let attended = self_attention(&augmented, &weights.attn);
    let pooled = attended.mean_axis(ndarray::Axis(0)).expect("n_map >= 1");
    let gate = Array1::from_iter(
        pooled
            .iter()
            .zip(weights.gate_bias.iter())
            .map(|(&x, &b)| sigmoid(x + b)),
    );

    let mut out = emb.det_embeddings.clone();
    for mut row in out.rows_mut() {
        let modulation = weights
            .delta
            .apply(row.view())
            .mapv(|x| weights.activation.apply(x));
        for (i, slot) in row.iter_mut().enumerate() {
            *slot += gate[i] * modulation[i];
        }
    }
    Ok(out)
}

/// Scene tokens the templates attend to: ego motion first, then detections,
/// then map instances. Detection and map rows may be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneContext {
    pub ego_token: Array1<f64>,
    pub det_tokens: Array2<f64>,
    pub map_tokens: Array2<f64>,
}

impl SceneContext {
    pub fn width(&self) -> usize {
        self.ego_token.len()
    }

    fn stacked(&self) -> Result<Array2<f64>, AdapterError> {
        let d = self.width();
        for (what, m) in [("detection tokens", &self.det_tokens), ("map tokens", &self.map_tokens)] {
            if m.nrows() > 0 && m.ncols() != d {
                return Err(AdapterError::DimensionMismatch {
                    what: what.into(),
                    expected: d,
                    got: m.ncols(),
                });
            }
        }
        let n = 1 + self.det_tokens.nrows() + self.map_tokens.nrows();
        let mut ctx = Array2::zeros((n, d));
        ctx.row_mut(0).assign(&self.ego_token);
        for (i, row) in self.det_tokens.rows().into_iter().enumerate() {
            ctx.row_mut(1 + i).assign(&row);
        }
        let base = 1 + self.det_tokens.nrows();
        for (i, row) in self.map_tokens.rows().into_iter().enumerate() {
            ctx.row_mut(base + i).assign(&row);
        }
        Ok(ctx)
    }
}

/// Weights of the residual template refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateRefineWeights {
    /// Self-attention mixing the context sequence.
    pub ctx_self: AttentionProj,
    /// Projects a flattened template (2T values) to a D-dim query.
    pub query_proj: AffineMap,
    /// Cross-attention from the template query to the context.
    pub cross: AttentionProj,
    /// Decodes the attended context back to 2T position offsets.
    pub decoder: AffineMap,
}

/// Refine each template by cross-attending to the scene context and adding
/// the decoded offsets residually.
///
/// Position offsets perturb the samples directly; velocities receive the
/// finite-differenced offset so a zero decoder reproduces the templates
/// exactly. Headings are kept from the input templates.
pub fn refine_templates(
    templates: &[Trajectory],
    context: &SceneContext,
    weights: &TemplateRefineWeights,
) -> Result<Vec<Trajectory>, AdapterError> {
    let d = context.width();
    weights.ctx_self.check_square("context self-attention", d)?;
    weights.cross.check_square("template cross-attention", d)?;
    if weights.query_proj.out_dim() != d {
        return Err(AdapterError::DimensionMismatch {
            what: "template query projection output".into(),
            expected: d,
            got: weights.query_proj.out_dim(),
        });
    }
    if weights.decoder.in_dim() != d {
        return Err(AdapterError::DimensionMismatch {
            what: "template decoder input".into(),
            expected: d,
            got: weights.decoder.in_dim(),
        });
    }

    let ctx = context.stacked()?;
    let mixed = self_attention(&ctx, &weights.ctx_self);
    let keys = mixed.dot(&weights.cross.w_k);
    let vals = mixed.dot(&weights.cross.w_v);
    let scale = 1.0 / (d as f64).sqrt();

    let mut refined = Vec::with_capacity(templates.len());
    for (idx, template) in templates.iter().enumerate() {
        let t_len = template.len();
        let flat_len = 2 * t_len;
        if weights.query_proj.in_dim() != flat_len {
            return Err(AdapterError::DimensionMismatch {
                what: format!("template {idx} flattened length"),
                expected: weights.query_proj.in_dim(),
                got: flat_len,
            });
        }
        if weights.decoder.out_dim() != flat_len {
            return Err(AdapterError::DimensionMismatch {
                what: format!("template {idx} decoder output"),
                expected: flat_len,
                got: weights.decoder.out_dim(),
            });
        }
        let mut flat = Array1::zeros(flat_len);
        for (i, s) in template.samples().iter().enumerate() {
            flat[2 * i] = s.pose.x;
            flat[2 * i + 1] = s.pose.y;
        }
        let query = weights.query_proj.apply(flat.view());
        let q = query.dot(&weights.cross.w_q);
        let logits: Vec<f64> = (0..ctx.nrows()).map(|j| q.dot(&keys.row(j)) * scale).collect();
        let probs = crate::attention::softmax_row(&logits);
        let mut attended = Array1::zeros(d);
        for (j, &p) in probs.iter().enumerate() {
            if p != 0.0 {
                attended = attended + &vals.row(j) * p;
            }
        }
        let offsets = weights.decoder.apply(attended.view());

        let dt = template.dt();
        let offset_at = |i: usize| Vec2::new(offsets[2 * i], offsets[2 * i + 1]);
        let d_offset = |i: usize| -> Vec2 {
            if t_len == 1 {
                Vec2::ZERO
            } else if i + 1 < t_len {
                (offset_at(i + 1) - offset_at(i)) * (1.0 / dt)
            } else {
                (offset_at(i) - offset_at(i - 1)) * (1.0 / dt)
            }
        };
        let samples: Vec<TrajectorySample> = template
            .samples()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let dp = offset_at(i);
                let dv = d_offset(i);
                TrajectorySample::new(
                    crate::types::Pose2::new(s.pose.x + dp.x, s.pose.y + dp.y, s.pose.heading),
                    Velocity2::new(s.velocity.vx + dv.x, s.velocity.vy + dv.y),
                )
            })
            .collect();
        refined.push(Trajectory::new(dt, samples).expect("refined template stays valid"));
    }
    Ok(refined)
}
