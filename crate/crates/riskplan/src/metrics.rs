//! Trajectory evaluation: L2 displacement error, collision rate, planning
//! risk exposure (time-averaged worst-case exponential risk), and
//! trajectory-prediction consistency, plus per-horizon report aggregation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::risk::{self, RiskParams};
use crate::types::{box_overlap, BoxDims, OrientedBox, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("horizon {horizon}s is not reachable with dt={dt} over {len} samples")]
    HorizonMismatch { horizon: f64, dt: f64, len: usize },
    #[error("trajectories share no overlapping future window")]
    NoOverlap,
    #[error("dt mismatch between trajectories: {a} vs {b}")]
    DtMismatch { a: f64, b: f64 },
}

/// Decay parameters of the exposure metric. The defaults mirror the risk
/// module's decay so one definition of "risky" spans the artifact; reports
/// embed the values used so numbers are only compared at fixed parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreParams {
    /// TTC decay, seconds.
    pub tau: f64,
    /// Distance decay, meters.
    pub sigma: f64,
}

impl Default for PreParams {
    fn default() -> Self {
        PreParams {
            tau: 2.0,
            sigma: 8.0,
        }
    }
}

/// Ground-truth motion of one obstacle with its box dimensions. The track is
/// aligned sample-for-sample with the plan under evaluation; an agent is
/// "present" at step `t` while its track still has a sample there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrack {
    pub dims: BoxDims,
    pub motion: Trajectory,
}

/// Map a horizon in seconds onto a 1-based step count on the sample grid.
fn horizon_step(dt: f64, horizon: f64, len: usize) -> Result<usize, MetricsError> {
    let steps = (horizon / dt).round();
    let ok = steps >= 1.0 && (steps * dt - horizon).abs() <= 1e-9 && (steps as usize) <= len;
    if ok {
        Ok(steps as usize)
    } else {
        Err(MetricsError::HorizonMismatch {
            horizon,
            dt,
            len,
        })
    }
}

/// Euclidean displacement between plan and ground truth at each horizon.
pub fn l2_error(
    plan: &Trajectory,
    ground_truth: &Trajectory,
    horizons: &[f64],
) -> Result<Vec<f64>, MetricsError> {
    if plan.dt() != ground_truth.dt() {
        return Err(MetricsError::DtMismatch {
            a: plan.dt(),
            b: ground_truth.dt(),
        });
    }
    horizons
        .iter()
        .map(|&h| {
            let step = horizon_step(plan.dt(), h, plan.len().min(ground_truth.len()))?;
            let i = step - 1;
            Ok(plan.sample(i).position().distance(ground_truth.sample(i).position()))
        })
        .collect()
}

/// Per-horizon collision flags: 1 if the ego box placed along the plan
/// overlaps any agent ground-truth box at any step up to that horizon. Over a
/// dataset the rate is the mean of these flags.
pub fn collision_flags(
    plan: &Trajectory,
    agents: &[AgentTrack],
    ego_dims: BoxDims,
    horizons: &[f64],
) -> Result<Vec<bool>, MetricsError> {
    let max_step = horizons
        .iter()
        .map(|&h| horizon_step(plan.dt(), h, plan.len()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .max()
        .unwrap_or(0);

    let mut first_contact: Option<usize> = None;
    'outer: for t in 0..max_step {
        let ego_box = OrientedBox::from_dims(plan.sample(t).pose, ego_dims);
        for agent in agents {
            if t >= agent.motion.len() {
                continue;
            }
            let agent_box = OrientedBox::from_dims(agent.motion.sample(t).pose, agent.dims);
            if box_overlap(&ego_box, &agent_box) {
                first_contact = Some(t + 1);
                break 'outer;
            }
        }
    }

    horizons
        .iter()
        .map(|&h| {
            let step = horizon_step(plan.dt(), h, plan.len())?;
            Ok(first_contact.is_some_and(|c| c <= step))
        })
        .collect()
}

fn phi_at(
    plan: &Trajectory,
    agents: &[AgentTrack],
    t: usize,
    params: &PreParams,
    risk_params: &RiskParams,
) -> f64 {
    let ego = plan.sample(t);
    let mut worst = 0.0f64;
    for agent in agents {
        if t >= agent.motion.len() {
            continue;
        }
        let other = agent.motion.sample(t);
        let rel = risk::relative_kinematics((ego.pose, ego.velocity), (other.pose, other.velocity));
        let ttc = risk::ttc(rel.p_rel, rel.v_rel, rel.distance, risk_params);
        let phi = (-ttc / params.tau).exp() * (-rel.distance / params.sigma).exp();
        worst = worst.max(phi);
    }
    worst
}

/// Planning risk exposure: the mean over the full horizon of the worst-case
/// instantaneous exponential risk against ground-truth obstacles. Steps with
/// no agent present contribute zero.
pub fn pre(
    plan: &Trajectory,
    agents: &[AgentTrack],
    params: &PreParams,
    risk_params: &RiskParams,
) -> f64 {
    let total: f64 = (0..plan.len())
        .map(|t| phi_at(plan, agents, t, params, risk_params))
        .sum();
    total / plan.len() as f64
}

/// Exposure averaged up to each horizon instead of the full length.
pub fn pre_per_horizon(
    plan: &Trajectory,
    agents: &[AgentTrack],
    horizons: &[f64],
    params: &PreParams,
    risk_params: &RiskParams,
) -> Result<Vec<f64>, MetricsError> {
    let steps: Vec<usize> = horizons
        .iter()
        .map(|&h| horizon_step(plan.dt(), h, plan.len()))
        .collect::<Result<_, _>>()?;
    let max_step = steps.iter().copied().max().unwrap_or(0);
    let phis: Vec<f64> = (0..max_step)
        .map(|t| phi_at(plan, agents, t, params, risk_params))
        .collect();
    Ok(steps
        .into_iter()
        .map(|s| phis[..s].iter().sum::<f64>() / s as f64)
        .collect())
}

/// Mean deviation between the current plan and the previous frame's plan over
/// their overlapping future window, up to each horizon. `offset_steps` is the
/// age of the previous plan in control steps (1 for consecutive frames).
pub fn tpc(
    plan_now: &Trajectory,
    plan_prev: &Trajectory,
    offset_steps: usize,
    horizons: &[f64],
) -> Result<Vec<f64>, MetricsError> {
    if plan_now.dt() != plan_prev.dt() {
        return Err(MetricsError::DtMismatch {
            a: plan_now.dt(),
            b: plan_prev.dt(),
        });
    }
    if offset_steps >= plan_prev.len() {
        return Err(MetricsError::NoOverlap);
    }
    let overlap = plan_now.len().min(plan_prev.len() - offset_steps);
    if overlap == 0 {
        return Err(MetricsError::NoOverlap);
    }
    let deviations: Vec<f64> = (0..overlap)
        .map(|j| {
            plan_now
                .sample(j)
                .position()
                .distance(plan_prev.sample(j + offset_steps).position())
        })
        .collect();
    horizons
        .iter()
        .map(|&h| {
            let step = horizon_step(plan_now.dt(), h, plan_now.len())?;
            let n = step.min(overlap);
            Ok(deviations[..n].iter().sum::<f64>() / n as f64)
        })
        .collect()
}

/// Kahan-compensated accumulator so dataset means are independent of
/// accumulation noise.
#[derive(Debug, Clone, Default)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, value: f64) {
        let y = value - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Values at the report horizons plus their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerHorizon {
    pub values: Vec<f64>,
    pub avg: f64,
}

/// Parameters a report's numbers depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub pre_tau: f64,
    pub pre_sigma: f64,
    pub ttc_epsilon: f64,
    pub ttc_clamp: f64,
    pub ego_box: BoxDims,
}

/// Number of samples behind each aggregated metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub l2: usize,
    pub collision: usize,
    pub pre: usize,
    pub tpc: usize,
}

/// Per-horizon evaluation results in the 1s/2s/3s/avg layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub horizons: Vec<f64>,
    pub l2: PerHorizon,
    pub collision: PerHorizon,
    pub pre: PerHorizon,
    pub tpc: Option<PerHorizon>,
    pub params: ReportParams,
    pub samples: SampleCounts,
}

impl MetricsReport {
    /// Aligned plain-text table mirroring the per-horizon layout.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self
            .horizons
            .iter()
            .map(|h| format!("{h:.0}s"))
            .chain(std::iter::once("avg".to_string()))
            .collect();
        out.push_str(&format!("{:<14}", "metric"));
        for h in &header {
            out.push_str(&format!("{h:>10}"));
        }
        out.push('\n');
        let mut row = |name: &str, ph: &PerHorizon| {
            out.push_str(&format!("{name:<14}"));
            for v in ph.values.iter().chain(std::iter::once(&ph.avg)) {
                out.push_str(&format!("{v:>10.4}"));
            }
            out.push('\n');
        };
        row("L2 (m)", &self.l2);
        row("col. rate", &self.collision);
        row("PRE", &self.pre);
        if let Some(tpc) = &self.tpc {
            row("TPC (m)", tpc);
        }
        out
    }
}

/// Streaming aggregation of per-frame metric vectors into a report.
#[derive(Debug, Clone)]
pub struct ReportAccumulator {
    horizons: Vec<f64>,
    l2: Vec<KahanSum>,
    l2_n: usize,
    collision: Vec<KahanSum>,
    collision_n: usize,
    pre: Vec<KahanSum>,
    pre_n: usize,
    tpc: Vec<KahanSum>,
    tpc_n: usize,
}

impl ReportAccumulator {
    pub fn new(horizons: &[f64]) -> Self {
        let zeros = || vec![KahanSum::default(); horizons.len()];
        ReportAccumulator {
            horizons: horizons.to_vec(),
            l2: zeros(),
            l2_n: 0,
            collision: zeros(),
            collision_n: 0,
            pre: zeros(),
            pre_n: 0,
            tpc: zeros(),
            tpc_n: 0,
        }
    }

    pub fn add_l2(&mut self, values: &[f64]) {
        for (acc, &v) in self.l2.iter_mut().zip(values) {
            acc.add(v);
        }
        self.l2_n += 1;
    }

    pub fn add_collision(&mut self, flags: &[bool]) {
        for (acc, &f) in self.collision.iter_mut().zip(flags) {
            acc.add(if f { 1.0 } else { 0.0 });
        }
        self.collision_n += 1;
    }

    pub fn add_pre(&mut self, values: &[f64]) {
        for (acc, &v) in self.pre.iter_mut().zip(values) {
            acc.add(v);
        }
        self.pre_n += 1;
    }

    pub fn add_tpc(&mut self, values: &[f64]) {
        for (acc, &v) in self.tpc.iter_mut().zip(values) {
            acc.add(v);
        }
        self.tpc_n += 1;
    }

    pub fn finish(self, params: ReportParams) -> MetricsReport {
        let reduce = |sums: &[KahanSum], n: usize| -> PerHorizon {
            let values: Vec<f64> = sums
                .iter()
                .map(|s| if n == 0 { 0.0 } else { s.sum / n as f64 })
                .collect();
            let avg = if values.is_empty() {
                0.0
            } else {
                values.iter().sum::<f64>() / values.len() as f64
            };
            PerHorizon { values, avg }
        };
        let tpc = if self.tpc_n > 0 {
            Some(reduce(&self.tpc, self.tpc_n))
        } else {
            None
        };
        MetricsReport {
            l2: reduce(&self.l2, self.l2_n),
            collision: reduce(&self.collision, self.collision_n),
            pre: reduce(&self.pre, self.pre_n),
            tpc,
            samples: SampleCounts {
                l2: self.l2_n,
                collision: self.collision_n,
                pre: self.pre_n,
                tpc: self.tpc_n,
            },
            horizons: self.horizons,
            params,
        }
    }
}

/// One-shot report for a single plan against ground truth.
pub fn evaluate_single(
    plan: &Trajectory,
    ground_truth: Option<&Trajectory>,
    agents: &[AgentTrack],
    ego_dims: BoxDims,
    horizons: &[f64],
    pre_params: &PreParams,
    risk_params: &RiskParams,
) -> Result<MetricsReport, MetricsError> {
    let mut acc = ReportAccumulator::new(horizons);
    if let Some(gt) = ground_truth {
        acc.add_l2(&l2_error(plan, gt, horizons)?);
    }
    acc.add_collision(&collision_flags(plan, agents, ego_dims, horizons)?);
    acc.add_pre(&pre_per_horizon(plan, agents, horizons, pre_params, risk_params)?);
    Ok(acc.finish(ReportParams {
        pre_tau: pre_params.tau,
        pre_sigma: pre_params.sigma,
        ttc_epsilon: risk_params.epsilon,
        ttc_clamp: risk_params.ttc_clamp_sigma,
        ego_box: ego_dims,
    }))
}
