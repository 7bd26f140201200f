//! End-to-end planning step: risk tensor, minimax matrix, sparse game graph,
//! command-gated consistency scores, and an analytic mode cost whose argmin
//! is the selected strategy.
//!
//! The analytic cost (worst-case risk + consistency + goal deviation) stands
//! in for a learned scoring head so the pipeline closes deterministically;
//! the attention refinement of plan queries is exposed separately through
//! [`refine_queries`] for inspection and testing.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{self, AttentionError, AttentionOutput, AttentionWeights, TokenSet};
use crate::risk::{build_risk_tensor, minimax_reduce, RiskError, RiskMatrix, RiskParams};
use crate::sparse_game::{build_graph, NormalizationScope, SparseGameGraph};
use crate::stabilization::{consistency_scores, HistoryBuffer};
use crate::types::{AgentPrediction, Command, Pose2, Trajectory, Vec2, Velocity2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error("candidate set must be non-empty")]
    NoCandidates,
    #[error("command {0} needs a goal point but none was provided")]
    MissingGoal(Command),
    #[error("planner weight {name} must be finite and >= 0, got {value}")]
    BadWeight { name: &'static str, value: f64 },
}

/// Tunable surface of the planner. Defaults follow the best ablation setting:
/// Hausdorff consistency with risk intensity 2.0 over 3 historical frames,
/// with top-M = 4 as the sparse-game width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub risk: RiskParams,
    pub top_m: usize,
    /// Risk-intensity factor injected into the attention logits.
    pub beta: f64,
    /// Number of fused historical frames (history buffer capacity).
    pub history_t: usize,
    pub w_risk: f64,
    pub w_cons: f64,
    pub w_goal: f64,
    pub normalization_scope: NormalizationScope,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            risk: RiskParams::default(),
            top_m: 4,
            beta: 2.0,
            history_t: 3,
            w_risk: 1.0,
            w_cons: 0.5,
            w_goal: 1.0,
            normalization_scope: NormalizationScope::Global,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        self.risk.validate()?;
        for (name, value) in [
            ("w_risk", self.w_risk),
            ("w_cons", self.w_cons),
            ("w_goal", self.w_goal),
            ("beta", self.beta),
        ] {
            if !value.is_finite() || (name != "beta" && value < 0.0) {
                return Err(PlannerError::BadWeight { name, value });
            }
        }
        if self.top_m == 0 {
            return Err(PlannerError::BadWeight {
                name: "top_m",
                value: 0.0,
            });
        }
        Ok(())
    }
}

/// One planning frame: ego state, the world-frame candidate set, predicted
/// agents, the active command, and the command-conditioned goal point.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub ego_pose: Pose2,
    pub ego_velocity: Velocity2,
    pub candidates: Vec<Trajectory>,
    pub agents: Vec<AgentPrediction>,
    pub command: Command,
    pub goal: Vec2,
}

/// Resolve the goal point for a command. Straight-ahead projects the current
/// speed over the horizon along the heading unless overridden; turning
/// commands require a scenario-provided goal point.
pub fn resolve_goal(
    ego_pose: Pose2,
    ego_velocity: Velocity2,
    command: Command,
    horizon_seconds: f64,
    overrides: &BTreeMap<Command, Vec2>,
) -> Result<Vec2, PlannerError> {
    if let Some(&goal) = overrides.get(&command) {
        return Ok(goal);
    }
    match command {
        Command::GoStraight => {
            let reach = ego_velocity.speed() * horizon_seconds;
            let dir = Vec2::new(ego_pose.heading.cos(), ego_pose.heading.sin());
            Ok(ego_pose.position() + dir * reach)
        }
        other => Err(PlannerError::MissingGoal(other)),
    }
}

/// Unweighted cost terms of one candidate plus the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateCost {
    /// Worst case over active agents of the confidence-weighted risk row.
    pub risk_term: f64,
    /// Mean Hausdorff distance to the gated history.
    pub consistency_term: f64,
    /// Endpoint distance to the goal point, meters.
    pub goal_term: f64,
    /// `w_risk * risk + w_cons * consistency + w_goal * goal`.
    pub total: f64,
}

/// Outcome of one planning step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDecision {
    pub selected_index: usize,
    pub costs: Vec<CandidateCost>,
    pub risk_matrix: RiskMatrix,
    pub graph: SparseGameGraph,
    pub consistency_gate_open: bool,
}

/// Run one full decision: risk tensor to minimax matrix to sparse graph,
/// command-gated consistency, analytic cost, argmin selection with
/// lowest-index tie-break, and history push.
///
/// The risk term aggregates the raw confidence-weighted matrix (already in
/// `[0, 1]`) rather than the min-max normalized values: the normalized form
/// exists for the attention prior, while the raw worst case keeps the cost
/// monotone in every tensor entry.
pub fn plan_step(
    scene: &Scene,
    buffer: &mut HistoryBuffer,
    config: &PlannerConfig,
) -> Result<PlanDecision, PlannerError> {
    if scene.candidates.is_empty() {
        return Err(PlannerError::NoCandidates);
    }
    config.validate()?;

    let tensor = build_risk_tensor(&scene.candidates, &scene.agents, &config.risk)?;
    let confidences: Vec<f64> = scene.agents.iter().map(|a| a.confidence).collect();
    let risk_matrix = minimax_reduce(&tensor, &confidences);
    let graph = build_graph(&risk_matrix, config.top_m, config.normalization_scope);

    // Gate protocol: a command change invalidates the stored strategies.
    if buffer
        .newest()
        .is_some_and(|entry| entry.command != scene.command)
    {
        buffer.flush();
    }
    let consistency = consistency_scores(&scene.candidates, buffer, scene.command, scene.ego_pose);

    let costs: Vec<CandidateCost> = scene
        .candidates
        .iter()
        .enumerate()
        .map(|(p, candidate)| {
            let risk_term = graph.active[p]
                .iter()
                .zip(&risk_matrix.values[p])
                .filter_map(|(&on, &v)| on.then_some(v))
                .fold(0.0f64, f64::max);
            let consistency_term = consistency.scores[p];
            let goal_term = candidate.endpoint().distance(scene.goal);
            CandidateCost {
                risk_term,
                consistency_term,
                goal_term,
                total: config.w_risk * risk_term
                    + config.w_cons * consistency_term
                    + config.w_goal * goal_term,
            }
        })
        .collect();

    let mut selected_index = 0;
    for (i, cost) in costs.iter().enumerate() {
        if cost.total < costs[selected_index].total {
            selected_index = i;
        }
    }

    buffer.push(
        scene.candidates[selected_index].clone(),
        scene.command,
        scene.ego_pose,
    );

    Ok(PlanDecision {
        selected_index,
        costs,
        risk_matrix,
        graph,
        consistency_gate_open: consistency.gate_open,
    })
}

/// Width of the kinematic feature vector embedded into tokens.
pub const SCENE_FEATURE_DIM: usize = 6;

/// Fixed affine embeddings plus the attention block used by
/// [`refine_queries`].
#[derive(Debug, Clone, PartialEq)]
pub struct RefineWeights {
    /// Maps 6 plan features to the attention input width.
    pub plan_embed: attention::AffineMap,
    /// Maps 6 agent features to the attention input width.
    pub agent_embed: attention::AffineMap,
    pub attention: AttentionWeights,
}

/// Ego-frame kinematic features of one agent:
/// relative position, relative velocity, separation, confidence.
pub fn agent_features(
    ego_pose: Pose2,
    ego_velocity: Velocity2,
    agent: &AgentPrediction,
) -> [f64; SCENE_FEATURE_DIM] {
    let state = agent
        .modes
        .first()
        .map(|m| m.sample(0))
        .expect("agent prediction carries at least one mode");
    let p_rel = (state.position() - ego_pose.position()).rotated(-ego_pose.heading);
    let v_rel = (state.velocity.vec() - ego_velocity.vec()).rotated(-ego_pose.heading);
    [
        p_rel.x,
        p_rel.y,
        v_rel.x,
        v_rel.y,
        p_rel.norm(),
        agent.confidence,
    ]
}

/// Ego-frame features of one candidate plan: endpoint, mean velocity,
/// path length, bias.
pub fn plan_features(ego_pose: Pose2, candidate: &Trajectory) -> [f64; SCENE_FEATURE_DIM] {
    let end = (candidate.endpoint() - ego_pose.position()).rotated(-ego_pose.heading);
    let n = candidate.len() as f64;
    let mean_v = candidate
        .samples()
        .iter()
        .fold(Vec2::ZERO, |acc, s| acc + s.velocity.vec())
        * (1.0 / n);
    let mean_local = mean_v.rotated(-ego_pose.heading);
    let mut path = 0.0;
    let positions = candidate.positions();
    let mut prev = ego_pose.position();
    for p in &positions {
        path += prev.distance(*p);
        prev = *p;
    }
    [end.x, end.y, mean_local.x, mean_local.y, path, 1.0]
}

/// Build plan/agent tokens from scene kinematics through the fixed embedding
/// maps and run the risk-biased attention over the sparse graph. The refined
/// queries are exposed for inspection; the analytic cost does not consume
/// them. `beta` overrides the weight fixture's stored factor so the planner
/// configuration stays authoritative.
pub fn refine_queries(
    scene: &Scene,
    graph: &SparseGameGraph,
    weights: &RefineWeights,
    beta: f64,
) -> Result<AttentionOutput, PlannerError> {
    let d_in = weights.attention.input_dim();
    let embed = |map: &attention::AffineMap,
                 features: Vec<[f64; SCENE_FEATURE_DIM]>|
     -> Result<Array2<f64>, PlannerError> {
        if map.in_dim() != SCENE_FEATURE_DIM || map.out_dim() != d_in {
            return Err(PlannerError::Attention(AttentionError::DimensionMismatch {
                what: "feature embedding".into(),
                expected: d_in,
                got: map.out_dim(),
            }));
        }
        let mut out = Array2::zeros((features.len(), d_in));
        for (i, f) in features.iter().enumerate() {
            let row = map.apply(ndarray::ArrayView1::from(&f[..]));
            out.row_mut(i).assign(&row);
        }
        Ok(out)
    };

    let plan_rows = scene
        .candidates
        .iter()
        .map(|c| plan_features(scene.ego_pose, c))
        .collect();
    let agent_rows = scene
        .agents
        .iter()
        .map(|a| agent_features(scene.ego_pose, scene.ego_velocity, a))
        .collect();
    let tokens = TokenSet {
        plan_queries: embed(&weights.plan_embed, plan_rows)?,
        agent_tokens: embed(&weights.agent_embed, agent_rows)?,
    };
    let mut attn = weights.attention.clone();
    attn.beta = beta;
    Ok(attention::risk_biased_attention(&tokens, graph, &attn)?)
}
