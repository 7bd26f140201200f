//! Relative kinematics, time-to-collision, and the minimax
//! confidence-weighted risk matrix.
//!
//! The per-timestep risk couples TTC and spatial distance through a joint
//! exponential decay; the worst case over an agent's motion modes and over
//! the prediction horizon gives the plan-vs-agent risk matrix.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{AgentPrediction, Pose2, Trajectory, Vec2, Velocity2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("trajectory horizon mismatch: expected {expected} samples, {what} has {got}")]
    HorizonMismatch {
        expected: usize,
        got: usize,
        what: String,
    },
    #[error("trajectory dt mismatch: expected {expected}, {what} has {got}")]
    DtMismatch {
        expected: f64,
        got: f64,
        what: String,
    },
    #[error("agents must share one mode count: agent 0 has {expected}, agent {agent} has {got}")]
    ModeCountMismatch {
        expected: usize,
        got: usize,
        agent: usize,
    },
    #[error("risk parameter {name} must be strictly positive, got {value}")]
    NonPositiveParam { name: &'static str, value: f64 },
}

/// Parameters of the TTC guard/clamp and the exponential risk decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskParams {
    /// Denominator guard in the TTC quotient, seconds.
    pub epsilon: f64,
    /// Upper clamp on TTC, seconds.
    pub ttc_clamp_sigma: f64,
    /// TTC decay constant of the joint exponential, seconds.
    pub tau_risk: f64,
    /// Distance decay constant of the joint exponential, meters.
    pub sigma_risk: f64,
}

impl Default for RiskParams {
    fn default() -> Self {
        RiskParams {
            epsilon: 1e-3,
            ttc_clamp_sigma: 8.0,
            tau_risk: 2.0,
            sigma_risk: 8.0,
        }
    }
}

impl RiskParams {
    pub fn validate(&self) -> Result<(), RiskError> {
        for (name, value) in [
            ("epsilon", self.epsilon),
            ("ttc_clamp_sigma", self.ttc_clamp_sigma),
            ("tau_risk", self.tau_risk),
            ("sigma_risk", self.sigma_risk),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(RiskError::NonPositiveParam { name, value });
            }
        }
        Ok(())
    }
}

/// Relative state of an agent with respect to the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeKinematics {
    pub p_rel: Vec2,
    pub v_rel: Vec2,
    pub distance: f64,
}

/// `p_rel = p_agent - p_ego`, `v_rel = v_agent - v_ego`, and the Euclidean
/// separation.
pub fn relative_kinematics(
    ego: (Pose2, Velocity2),
    agent: (Pose2, Velocity2),
) -> RelativeKinematics {
    let p_rel = agent.0.position() - ego.0.position();
    let v_rel = agent.1.vec() - ego.1.vec();
    RelativeKinematics {
        p_rel,
        v_rel,
        distance: p_rel.norm(),
    }
}

/// Guarded, clamped time-to-collision:
/// `min(distance / (max(0, -(p_rel . v_rel)/|p_rel|) + epsilon), sigma)`.
///
/// Coincident positions take closing speed 0, so the zero numerator yields
/// TTC = 0 there. The result always lies in `[0, ttc_clamp_sigma]`.
pub fn ttc(p_rel: Vec2, v_rel: Vec2, distance: f64, params: &RiskParams) -> f64 {
    let norm = p_rel.norm();
    let closing = if norm == 0.0 {
        0.0
    } else {
        (-(p_rel.dot(v_rel)) / norm).max(0.0)
    };
    (distance / (closing + params.epsilon)).min(params.ttc_clamp_sigma)
}

/// Joint exponential of TTC and distance: `exp(-ttc/tau) * exp(-d/sigma)`,
/// in `(0, 1]` and strictly decreasing in both arguments.
pub fn instantaneous_risk(ttc: f64, distance: f64, params: &RiskParams) -> f64 {
    (-ttc / params.tau_risk).exp() * (-distance / params.sigma_risk).exp()
}

/// Per-(plan, agent, mode, timestep) risk values, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTensor {
    plans: usize,
    agents: usize,
    modes: usize,
    horizon: usize,
    data: Vec<f64>,
}

impl RiskTensor {
    /// Axis sizes as (P, K, A, T).
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.plans, self.agents, self.modes, self.horizon)
    }

    pub fn get(&self, p: usize, k: usize, a: usize, t: usize) -> f64 {
        debug_assert!(p < self.plans && k < self.agents && a < self.modes && t < self.horizon);
        self.data[((p * self.agents + k) * self.modes + a) * self.horizon + t]
    }

    /// Worst case over motion modes and timesteps for one (plan, agent) pair.
    pub fn worst_case(&self, p: usize, k: usize) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.modes {
            for t in 0..self.horizon {
                worst = worst.max(self.get(p, k, a, t));
            }
        }
        worst
    }
}

/// Plan-vs-agent worst-case risk, optionally scaled by detection confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskMatrix {
    /// Row per planning mode, column per agent; entries in `[0, 1]`.
    pub values: Vec<Vec<f64>>,
    /// Whether detection-confidence weighting has been applied.
    pub confidence_applied: bool,
}

impl RiskMatrix {
    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn cols(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }
}

fn check_horizon(traj: &Trajectory, expected: usize, dt: f64, what: impl Fn() -> String)
    -> Result<(), RiskError>
{
    if traj.len() != expected {
        return Err(RiskError::HorizonMismatch {
            expected,
            got: traj.len(),
            what: what(),
        });
    }
    if traj.dt() != dt {
        return Err(RiskError::DtMismatch {
            expected: dt,
            got: traj.dt(),
            what: what(),
        });
    }
    Ok(())
}

/// Evaluate the instantaneous risk between every planning mode sample and
/// every predicted agent-mode sample.
///
/// The ego state along plan `p` at step `t` is that plan's own sample, so the
/// tensor carries a genuine per-planning-mode risk. All trajectories must
/// share the lead plan's horizon and dt, and all agents must declare the same
/// number of motion modes.
pub fn build_risk_tensor(
    plans: &[Trajectory],
    agents: &[AgentPrediction],
    params: &RiskParams,
) -> Result<RiskTensor, RiskError> {
    let horizon = plans.first().map_or(0, Trajectory::len);
    let dt = plans.first().map_or(0.0, Trajectory::dt);
    for (p, plan) in plans.iter().enumerate() {
        check_horizon(plan, horizon, dt, || format!("plan {p}"))?;
    }
    let modes = agents.first().map_or(0, |a| a.modes.len());
    for (k, agent) in agents.iter().enumerate() {
        if agent.modes.len() != modes {
            return Err(RiskError::ModeCountMismatch {
                expected: modes,
                got: agent.modes.len(),
                agent: k,
            });
        }
        for (a, mode) in agent.modes.iter().enumerate() {
            check_horizon(mode, horizon, dt, || format!("agent {k} mode {a}"))?;
        }
    }

    let plans_n = plans.len();
    let agents_n = agents.len();
    let mut data = vec![0.0; plans_n * agents_n * modes * horizon];
    let mut idx = 0;
    for plan in plans {
        for agent in agents {
            for mode in &agent.modes {
                for t in 0..horizon {
                    let ego = plan.sample(t);
                    let other = mode.sample(t);
                    let rel = relative_kinematics(
                        (ego.pose, ego.velocity),
                        (other.pose, other.velocity),
                    );
                    let time_to_collision = ttc(rel.p_rel, rel.v_rel, rel.distance, params);
                    data[idx] = instantaneous_risk(time_to_collision, rel.distance, params);
                    idx += 1;
                }
            }
        }
    }
    Ok(RiskTensor {
        plans: plans_n,
        agents: agents_n,
        modes,
        horizon,
        data,
    })
}

/// Collapse the tensor to the plan-vs-agent matrix: worst case over motion
/// modes and timesteps, scaled by the clamped detection confidence.
pub fn minimax_reduce(tensor: &RiskTensor, confidences: &[f64]) -> RiskMatrix {
    let (plans, agents, _, _) = tensor.dims();
    assert_eq!(
        confidences.len(),
        agents,
        "one confidence score per agent required"
    );
    let values = (0..plans)
        .map(|p| {
            (0..agents)
                .map(|k| tensor.worst_case(p, k) * confidences[k].clamp(0.0, 1.0))
                .collect()
        })
        .collect();
    RiskMatrix {
        values,
        confidence_applied: true,
    }
}
