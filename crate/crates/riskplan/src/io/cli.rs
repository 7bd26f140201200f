//! Command-line entry points: `plan`, `simulate`, `evaluate`, and `risk`.
//!
//! Usage errors exit with 2, data errors with 1. Flag overrides are applied
//! on top of the scenario's embedded configuration before validation.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use super::{fixtures, load_scenario, report_to_json, resolve_path, validate_scenario, IoError};
use crate::metrics::{self, AgentTrack, PreParams};
use crate::risk::RiskParams;
use crate::simulator::{self, Scenario, SimulationLog, TemplateAdapter};
use crate::types::{BoxDims, Trajectory};

const DEFAULT_STEPS: usize = 20;
const DEFAULT_HORIZONS: [f64; 3] = [1.0, 2.0, 3.0];

#[derive(Debug, Parser)]
#[command(
    name = "riskplan",
    version,
    about = "Risk-prioritized planning: minimax TTC risk, sparse game graphs, and closed-loop evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Clone, Copy, Args)]
struct Overrides {
    /// RNG seed for simulation runs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Risk-intensity factor injected into attention logits.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Number of highest-risk agents kept per planning mode.
    #[arg(long = "top-m", global = true)]
    top_m: Option<usize>,
    /// Number of fused historical frames.
    #[arg(long = "history-t", global = true)]
    history_t: Option<usize>,
    /// Exponential decay time of risk and exposure, seconds.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Exponential decay distance of risk and exposure, meters.
    #[arg(long, global = true)]
    sigma: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run one planning step on the scenario's initial frame and print the
    /// decision as JSON.
    Plan {
        scenario: PathBuf,
        /// Decision destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the closed loop and write a JSON-lines log.
    Simulate {
        scenario: PathBuf,
        /// Number of control steps (default: scenario setting, then 20).
        #[arg(long)]
        steps: Option<usize>,
        /// Log destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute metrics over a simulation log or explicit trajectory files.
    Evaluate {
        /// JSON-lines log produced by `simulate`.
        #[arg(long, conflicts_with_all = ["plan", "gt", "agents"])]
        log: Option<PathBuf>,
        /// Planned trajectory file (JSON).
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Ground-truth trajectory file (JSON).
        #[arg(long, requires = "plan")]
        gt: Option<PathBuf>,
        /// Ground-truth agent track file (JSON array).
        #[arg(long, requires = "plan")]
        agents: Option<PathBuf>,
        /// Evaluation horizons in seconds.
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<f64>>,
        /// Report destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also print the aligned text table.
        #[arg(long)]
        text: bool,
    },
    /// Print the risk matrix and sparse game graph for the initial frame.
    Risk {
        scenario: PathBuf,
        /// Destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Run the CLI against an argument vector and return the process exit code.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn apply_overrides(scenario: &mut Scenario, o: &Overrides) {
    if let Some(beta) = o.beta {
        scenario.planner.beta = beta;
    }
    if let Some(top_m) = o.top_m {
        scenario.planner.top_m = top_m;
    }
    if let Some(history_t) = o.history_t {
        scenario.planner.history_t = history_t;
    }
    if let Some(tau) = o.tau {
        scenario.planner.risk.tau_risk = tau;
        scenario.pre.tau = tau;
    }
    if let Some(sigma) = o.sigma {
        scenario.planner.risk.sigma_risk = sigma;
        scenario.pre.sigma = sigma;
    }
}

fn load_scenario_with_overrides(
    path: &Path,
    o: &Overrides,
) -> Result<(Scenario, Option<TemplateAdapter>), Box<dyn std::error::Error>> {
    let resolved = resolve_path(path, None);
    let mut scenario = load_scenario(&resolved)?;
    apply_overrides(&mut scenario, o);
    validate_scenario(&scenario)?;
    let adapter = match &scenario.template_adapter {
        Some(rel) => {
            let base = resolved.parent().map(Path::to_path_buf);
            let fixture_path = resolve_path(Path::new(rel), base.as_deref());
            let fixture = fixtures::WeightFixture::load(&fixture_path)?;
            Some(fixtures::template_adapter(&fixture)?)
        }
        None => None,
    };
    Ok((scenario, adapter))
}

fn write_or_print(out: Option<&Path>, contents: &str) -> Result<(), IoError> {
    match out {
        Some(path) => super::write_string(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let resolved = resolve_path(path, None);
    let text = std::fs::read_to_string(&resolved).map_err(|source| IoError::Read {
        path: resolved.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| IoError::Parse {
        path: resolved.display().to_string(),
        message: e.to_string(),
    })
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    let o = cli.overrides;
    match cli.command {
        Cmd::Plan { scenario, out } => {
            let (scenario, adapter) = load_scenario_with_overrides(&scenario, &o)?;
            let mut sim = simulator::Simulation::new(scenario, o.seed.unwrap_or(0), adapter);
            let record = sim.step()?;
            let mut text = serde_json::to_string_pretty(&record.decision)?;
            text.push('\n');
            write_or_print(out.as_deref(), &text)?;
            Ok(())
        }
        Cmd::Simulate { scenario, steps, out } => {
            let (scenario, adapter) = load_scenario_with_overrides(&scenario, &o)?;
            let steps = steps.or(scenario.steps).unwrap_or(DEFAULT_STEPS);
            let log = simulator::run(&scenario, steps, o.seed.unwrap_or(0), adapter.as_ref())?;
            write_or_print(out.as_deref(), &log.to_jsonl())?;
            Ok(())
        }
        Cmd::Evaluate {
            log,
            plan,
            gt,
            agents,
            horizons,
            out,
            text,
        } => {
            let horizons = horizons.unwrap_or_else(|| DEFAULT_HORIZONS.to_vec());
            let report = if let Some(log_path) = log {
                let resolved = resolve_path(&log_path, None);
                let contents =
                    std::fs::read_to_string(&resolved).map_err(|source| IoError::Read {
                        path: resolved.display().to_string(),
                        source,
                    })?;
                let log = SimulationLog::from_jsonl(&contents).map_err(|e| IoError::Parse {
                    path: resolved.display().to_string(),
                    message: e.to_string(),
                })?;
                log.evaluate(&horizons)?
            } else if let Some(plan_path) = plan {
                let plan: Trajectory = load_json(&plan_path)?;
                let gt: Option<Trajectory> = match &gt {
                    Some(p) => Some(load_json(p)?),
                    None => None,
                };
                let tracks: Vec<AgentTrack> = match &agents {
                    Some(p) => load_json(p)?,
                    None => vec![],
                };
                let mut risk_params = RiskParams::default();
                let mut pre_params = PreParams::default();
                if let Some(tau) = o.tau {
                    risk_params.tau_risk = tau;
                    pre_params.tau = tau;
                }
                if let Some(sigma) = o.sigma {
                    risk_params.sigma_risk = sigma;
                    pre_params.sigma = sigma;
                }
                metrics::evaluate_single(
                    &plan,
                    gt.as_ref(),
                    &tracks,
                    BoxDims::new(4.0, 1.8).expect("default ego box"),
                    &horizons,
                    &pre_params,
                    &risk_params,
                )?
            } else {
                return Err(Box::new(IoError::Validation {
                    field: "--log/--plan".into(),
                    message: "evaluate needs either a log or a plan file".into(),
                }));
            };
            write_or_print(out.as_deref(), &report_to_json(&report))?;
            if text {
                print!("{}", report.to_text_table());
            }
            Ok(())
        }
        Cmd::Risk { scenario, out } => {
            let (scenario, adapter) = load_scenario_with_overrides(&scenario, &o)?;
            let mut sim = simulator::Simulation::new(scenario, o.seed.unwrap_or(0), adapter);
            let record = sim.step()?;
            #[derive(serde::Serialize)]
            struct RiskDump<'a> {
                risk_matrix: &'a crate::risk::RiskMatrix,
                graph: &'a crate::sparse_game::SparseGameGraph,
            }
            let dump = RiskDump {
                risk_matrix: &record.decision.risk_matrix,
                graph: &record.decision.graph,
            };
            let mut text = serde_json::to_string_pretty(&dump)?;
            text.push('\n');
            write_or_print(out.as_deref(), &text)?;
            Ok(())
        }
    }
}
