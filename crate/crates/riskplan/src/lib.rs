//! Risk-prioritized planning library.
//!
//! The pipeline turns a multi-agent scene into a decision in four moves:
//! a per-timestep collision risk built from guarded time-to-collision and
//! distance ([`risk`]), a worst-case reduction over agent motion modes and
//! the horizon weighted by detection confidence ([`risk::minimax_reduce`]),
//! a top-M sparse game graph with min-max normalized entries
//! ([`sparse_game`]), and an analytic best-response cost with command-gated
//! Hausdorff consistency against recent strategies ([`planner`],
//! [`stabilization`]). The normalized risk doubles as an additive prior on
//! cross-attention logits ([`attention`]); with the prior off and a full
//! mask that block is ordinary masked cross-attention.
//!
//! [`simulator`] closes the loop deterministically and [`metrics`] scores
//! the results (L2, collision rate, planning risk exposure, consistency).
//! [`io`] provides the file formats and the `riskplan` CLI.

pub mod adapters;
pub mod attention;
pub mod io;
pub mod metrics;
pub mod planner;
pub mod risk;
pub mod simulator;
pub mod sparse_game;
pub mod stabilization;
pub mod types;

pub use planner::{plan_step, PlanDecision, PlannerConfig};
pub use risk::{build_risk_tensor, minimax_reduce, RiskMatrix, RiskParams, RiskTensor};
pub use simulator::{Scenario, SimulationLog};
pub use sparse_game::{build_graph, SparseGameGraph};
pub use types::{Command, OrientedBox, Pose2, Trajectory, Vec2, Velocity2};
