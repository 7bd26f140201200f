//! Weight fixtures: named arrays with declared shapes, stored as JSON.
//!
//! One file can hold weights for several consumers; names are prefixed by
//! block (`attn_*`, `fusion_*`, `tmpl_*`, `embed_*`). Scalars use an empty
//! shape. Every consumer re-checks the declared shape against what it needs.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::IoError;
use crate::attention::{Activation, AffineMap, AttentionWeights};
use crate::adapters::{AttentionProj, MapFusionWeights, TemplateRefineWeights};
use crate::planner::RefineWeights;
use crate::simulator::TemplateAdapter;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// A named-array container; the declared shapes are validated on load.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightFixture {
    pub arrays: BTreeMap<String, ArrayEntry>,
}

impl WeightFixture {
    pub fn load(path: &Path) -> Result<WeightFixture, IoError> {
        let text = std::fs::read_to_string(path).map_err(|source| IoError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let fixture: WeightFixture = serde_json::from_str(&text).map_err(|e| IoError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        fixture.validate()?;
        Ok(fixture)
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        self.validate()?;
        let mut text = serde_json::to_string_pretty(self).expect("fixture serializes");
        text.push('\n');
        super::write_string(path, &text)
    }

    pub fn validate(&self) -> Result<(), IoError> {
        for (name, entry) in &self.arrays {
            let expected: usize = entry.shape.iter().product();
            if entry.data.len() != expected {
                return Err(IoError::Validation {
                    field: name.clone(),
                    message: format!(
                        "declared shape {:?} holds {expected} values, data has {}",
                        entry.shape,
                        entry.data.len()
                    ),
                });
            }
            if !entry.data.iter().all(|v| v.is_finite()) {
                return Err(IoError::Validation {
                    field: name.clone(),
                    message: "all values must be finite".into(),
                });
            }
        }
        Ok(())
    }

    fn entry(&self, name: &str) -> Result<&ArrayEntry, IoError> {
        self.arrays.get(name).ok_or_else(|| IoError::Validation {
            field: name.to_string(),
            message: "missing array".into(),
        })
    }

    pub fn matrix(&self, name: &str) -> Result<Array2<f64>, IoError> {
        let entry = self.entry(name)?;
        let [rows, cols] = entry.shape[..] else {
            return Err(IoError::Validation {
                field: name.to_string(),
                message: format!("expected a rank-2 shape, got {:?}", entry.shape),
            });
        };
        Array2::from_shape_vec((rows, cols), entry.data.clone()).map_err(|e| IoError::Validation {
            field: name.to_string(),
            message: e.to_string(),
        })
    }

    pub fn vector(&self, name: &str) -> Result<Array1<f64>, IoError> {
        let entry = self.entry(name)?;
        let [len] = entry.shape[..] else {
            return Err(IoError::Validation {
                field: name.to_string(),
                message: format!("expected a rank-1 shape, got {:?}", entry.shape),
            });
        };
        let _ = len;
        Ok(Array1::from_vec(entry.data.clone()))
    }

    pub fn scalar(&self, name: &str) -> Result<f64, IoError> {
        let entry = self.entry(name)?;
        if !entry.shape.is_empty() && entry.shape != [1] {
            return Err(IoError::Validation {
                field: name.to_string(),
                message: format!("expected a scalar shape, got {:?}", entry.shape),
            });
        }
        entry.data.first().copied().ok_or_else(|| IoError::Validation {
            field: name.to_string(),
            message: "scalar entry holds no value".into(),
        })
    }

    pub fn scalar_or(&self, name: &str, default: f64) -> Result<f64, IoError> {
        if self.arrays.contains_key(name) {
            self.scalar(name)
        } else {
            Ok(default)
        }
    }

    pub fn set_matrix(&mut self, name: &str, value: &Array2<f64>) {
        self.arrays.insert(
            name.to_string(),
            ArrayEntry {
                shape: vec![value.nrows(), value.ncols()],
                data: value.iter().copied().collect(),
            },
        );
    }

    pub fn set_vector(&mut self, name: &str, value: &Array1<f64>) {
        self.arrays.insert(
            name.to_string(),
            ArrayEntry {
                shape: vec![value.len()],
                data: value.to_vec(),
            },
        );
    }

    pub fn set_scalar(&mut self, name: &str, value: f64) {
        self.arrays.insert(
            name.to_string(),
            ArrayEntry {
                shape: vec![],
                data: vec![value],
            },
        );
    }
}

fn activation_from_code(name: &str, code: f64) -> Result<Activation, IoError> {
    match code as i64 {
        0 => Ok(Activation::Relu),
        1 => Ok(Activation::Tanh),
        2 => Ok(Activation::Identity),
        other => Err(IoError::Validation {
            field: name.to_string(),
            message: format!("unknown activation code {other} (0=relu, 1=tanh, 2=identity)"),
        }),
    }
}

fn affine(fixture: &WeightFixture, w: &str, b: &str) -> Result<AffineMap, IoError> {
    AffineMap::new(fixture.matrix(w)?, fixture.vector(b)?).map_err(|e| IoError::Validation {
        field: w.to_string(),
        message: e.to_string(),
    })
}

/// Read an `attn_*` block into attention weights.
pub fn attention_weights(fixture: &WeightFixture) -> Result<AttentionWeights, IoError> {
    let weights = AttentionWeights {
        w_q: fixture.matrix("attn_w_q")?,
        w_k: fixture.matrix("attn_w_k")?,
        w_v: fixture.matrix("attn_w_v")?,
        ffn_hidden: affine(fixture, "attn_ffn_w1", "attn_ffn_b1")?,
        ffn_out: affine(fixture, "attn_ffn_w2", "attn_ffn_b2")?,
        ln_scale: fixture.vector("attn_ln_scale")?,
        ln_shift: fixture.vector("attn_ln_shift")?,
        activation: activation_from_code(
            "attn_activation",
            fixture.scalar_or("attn_activation", 0.0)?,
        )?,
        beta: fixture.scalar_or("attn_beta", 2.0)?,
    };
    weights.validate().map_err(|e| IoError::Validation {
        field: "attn".into(),
        message: e.to_string(),
    })?;
    Ok(weights)
}

fn proj(fixture: &WeightFixture, prefix: &str) -> Result<AttentionProj, IoError> {
    Ok(AttentionProj {
        w_q: fixture.matrix(&format!("{prefix}_w_q"))?,
        w_k: fixture.matrix(&format!("{prefix}_w_k"))?,
        w_v: fixture.matrix(&format!("{prefix}_w_v"))?,
    })
}

/// Read a `fusion_*` block into map-fusion weights.
pub fn map_fusion_weights(fixture: &WeightFixture) -> Result<MapFusionWeights, IoError> {
    Ok(MapFusionWeights {
        attn: proj(fixture, "fusion_attn")?,
        gate_bias: fixture.vector("fusion_gate_bias")?,
        delta: affine(fixture, "fusion_delta_w", "fusion_delta_b")?,
        activation: activation_from_code(
            "fusion_activation",
            fixture.scalar_or("fusion_activation", 0.0)?,
        )?,
    })
}

/// Read a `tmpl_*` block into the template adapter used by the simulator.
pub fn template_adapter(fixture: &WeightFixture) -> Result<TemplateAdapter, IoError> {
    Ok(TemplateAdapter {
        refine: TemplateRefineWeights {
            ctx_self: proj(fixture, "tmpl_ctx")?,
            query_proj: affine(fixture, "tmpl_query_w", "tmpl_query_b")?,
            cross: proj(fixture, "tmpl_cross")?,
            decoder: affine(fixture, "tmpl_dec_w", "tmpl_dec_b")?,
        },
        ego_embed: affine(fixture, "tmpl_ego_embed_w", "tmpl_ego_embed_b")?,
        det_embed: affine(fixture, "tmpl_det_embed_w", "tmpl_det_embed_b")?,
    })
}

/// Read `embed_*` plus `attn_*` blocks into the planner's query-refinement
/// weights.
pub fn refine_weights(fixture: &WeightFixture) -> Result<RefineWeights, IoError> {
    Ok(RefineWeights {
        plan_embed: affine(fixture, "embed_plan_w", "embed_plan_b")?,
        agent_embed: affine(fixture, "embed_agent_w", "embed_agent_b")?,
        attention: attention_weights(fixture)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(shape: Vec<usize>, data: Vec<f64>) -> ArrayEntry {
        ArrayEntry { shape, data }
    }

    #[test]
    fn shape_mismatch_names_the_array() {
        let mut fixture = WeightFixture::default();
        fixture
            .arrays
            .insert("attn_w_q".into(), entry(vec![2, 3], vec![0.0; 5]));
        let err = fixture.validate().unwrap_err();
        match err {
            IoError::Validation { field, .. } => assert_eq!(field, "attn_w_q"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn fixture_round_trips() {
        let mut fixture = WeightFixture::default();
        fixture.set_matrix("attn_w_q", &Array2::from_shape_fn((2, 3), |(i, j)| (i * 3 + j) as f64));
        fixture.set_vector("attn_ln_scale", &Array1::from_vec(vec![1.0, 2.0, 3.0]));
        fixture.set_scalar("attn_beta", 2.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        fixture.save(&path).unwrap();
        let loaded = WeightFixture::load(&path).unwrap();
        assert_eq!(loaded, fixture);
    }

    #[test]
    fn missing_array_is_reported_by_name() {
        let fixture = WeightFixture::default();
        let err = fixture.matrix("attn_w_q").unwrap_err();
        match err {
            IoError::Validation { field, message } => {
                assert_eq!(field, "attn_w_q");
                assert!(message.contains("missing"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn scalar_accepts_empty_and_unit_shapes() {
        let mut fixture = WeightFixture::default();
        fixture.arrays.insert("a".into(), entry(vec![], vec![4.0]));
        fixture.arrays.insert("b".into(), entry(vec![1], vec![5.0]));
        assert_eq!(fixture.scalar("a").unwrap(), 4.0);
        assert_eq!(fixture.scalar("b").unwrap(), 5.0);
        assert_eq!(fixture.scalar_or("missing", 7.0).unwrap(), 7.0);
    }
}
