//! Scenario/fixture/report file handling and the command-line interface.
//!
//! Everything on disk is JSON (logs are JSON lines). Floating-point values
//! round-trip through the shortest exact decimal representation, so reloading
//! a file reproduces the original values bit for bit.

pub mod cli;
pub mod fixtures;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::metrics::MetricsReport;
use crate::simulator::{Scenario, TemplateSpec, SCENARIO_VERSION};
use crate::types::Command;

pub use cli::cli_main;
pub use fixtures::WeightFixture;

/// Environment variable naming a directory searched for scenario and fixture
/// files that are not found relative to the working directory.
pub const CONFIG_DIR_ENV: &str = "RISKPLAN_CONFIG_DIR";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("unsupported scenario version {got} (expected {expected})")]
    Version { got: u32, expected: u32 },
    #[error("invalid value at {field}: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> IoError {
    IoError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

/// Resolve a path: as given if it exists, otherwise relative to `base` (the
/// referencing file's directory), otherwise under `RISKPLAN_CONFIG_DIR`.
pub fn resolve_path(path: &Path, base: Option<&Path>) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    if let Some(base) = base {
        let joined = base.join(path);
        if joined.exists() {
            return joined;
        }
    }
    if let Ok(dir) = std::env::var(CONFIG_DIR_ENV) {
        let joined = Path::new(&dir).join(path);
        if joined.exists() {
            return joined;
        }
    }
    path.to_path_buf()
}

fn read_to_string(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_string(path: &Path, contents: &str) -> Result<(), IoError> {
    std::fs::write(path, contents).map_err(|source| IoError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Load and fully validate a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, IoError> {
    let text = read_to_string(path)?;
    let scenario: Scenario = serde_json::from_str(&text).map_err(|e| IoError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    validate_scenario(&scenario)?;
    Ok(scenario)
}

pub fn save_scenario(path: &Path, scenario: &Scenario) -> Result<(), IoError> {
    validate_scenario(scenario)?;
    let mut text = serde_json::to_string_pretty(scenario).expect("scenario serializes");
    text.push('\n');
    write_string(path, &text)
}

/// Check every invariant a scenario file promises; errors carry the path of
/// the offending field.
pub fn validate_scenario(scenario: &Scenario) -> Result<(), IoError> {
    if scenario.version != SCENARIO_VERSION {
        return Err(IoError::Version {
            got: scenario.version,
            expected: SCENARIO_VERSION,
        });
    }
    if !(scenario.dt.is_finite() && scenario.dt > 0.0) {
        return Err(invalid("dt", format!("must be > 0, got {}", scenario.dt)));
    }
    if scenario.horizon == 0 {
        return Err(invalid("horizon", "must be >= 1"));
    }
    match &scenario.templates {
        TemplateSpec::Points { templates, .. } => {
            if templates.is_empty() {
                return Err(invalid("templates.templates", "at least one template required"));
            }
            for (i, t) in templates.iter().enumerate() {
                if t.len() != scenario.horizon {
                    return Err(invalid(
                        format!("templates.templates[{i}]"),
                        format!("expected {} points, got {}", scenario.horizon, t.len()),
                    ));
                }
            }
        }
        TemplateSpec::Arcs { arcs } => {
            if arcs.is_empty() {
                return Err(invalid("templates.arcs", "at least one arc required"));
            }
            for (i, arc) in arcs.iter().enumerate() {
                if !arc.yaw_rate.is_finite() {
                    return Err(invalid(format!("templates.arcs[{i}].yaw_rate"), "must be finite"));
                }
                if !arc.speed_scale.is_finite() || arc.speed_scale < 0.0 {
                    return Err(invalid(
                        format!("templates.arcs[{i}].speed_scale"),
                        "must be finite and >= 0",
                    ));
                }
                if let Some(speed) = arc.speed {
                    if !(speed.is_finite() && speed >= 0.0) {
                        return Err(invalid(
                            format!("templates.arcs[{i}].speed"),
                            "must be >= 0",
                        ));
                    }
                }
            }
        }
    }
    let mode_count = scenario.agents.first().map(|a| a.prediction_modes);
    for (i, agent) in scenario.agents.iter().enumerate() {
        if !(0.0..=1.0).contains(&agent.confidence) {
            return Err(invalid(
                format!("agents[{i}].confidence"),
                format!("must lie in [0, 1], got {}", agent.confidence),
            ));
        }
        if agent.prediction_modes == 0 {
            return Err(invalid(format!("agents[{i}].prediction_modes"), "must be >= 1"));
        }
        if Some(agent.prediction_modes) != mode_count {
            return Err(invalid(
                format!("agents[{i}].prediction_modes"),
                "all agents in one scenario must declare the same mode count",
            ));
        }
        if !agent.prediction_noise.is_empty()
            && agent.prediction_noise.len() != agent.prediction_modes
        {
            return Err(invalid(
                format!("agents[{i}].prediction_noise"),
                format!(
                    "expected {} offsets (one per mode) or none, got {}",
                    agent.prediction_modes,
                    agent.prediction_noise.len()
                ),
            ));
        }
        if agent.kind == crate::simulator::AgentKind::WaypointFollow && agent.waypoints.is_empty() {
            return Err(invalid(
                format!("agents[{i}].waypoints"),
                "waypoint-follow agents need at least one waypoint",
            ));
        }
    }
    let mut last_step = None;
    for (i, cmd) in scenario.commands.iter().enumerate() {
        if last_step.is_some_and(|prev| cmd.step < prev) {
            return Err(invalid(
                format!("commands[{i}].step"),
                "command schedule must be sorted by step",
            ));
        }
        last_step = Some(cmd.step);
        let needs_goal = cmd.command != Command::GoStraight;
        if needs_goal && !scenario.goal_points.contains_key(&cmd.command) {
            return Err(invalid(
                format!("goal_points.{}", cmd.command),
                "turn commands require a goal point",
            ));
        }
    }
    scenario.planner.validate().map_err(|e| invalid("planner", e.to_string()))?;
    for (field, value) in [("pre.tau", scenario.pre.tau), ("pre.sigma", scenario.pre.sigma)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(invalid(field, format!("must be > 0, got {value}")));
        }
    }
    if let Some(noise) = &scenario.risk_noise {
        if !(noise.amplitude.is_finite() && noise.amplitude >= 0.0) {
            return Err(invalid(
                "risk_noise.amplitude",
                format!("must be >= 0, got {}", noise.amplitude),
            ));
        }
    }
    if scenario.steps == Some(0) {
        return Err(invalid("steps", "must be >= 1 when given"));
    }
    Ok(())
}

/// Pretty JSON for a metrics report, newline-terminated.
pub fn report_to_json(report: &MetricsReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{AgentKind, AgentScript, ArcSpec, EgoSpec};
    use crate::types::{BoxDims, Pose2, Vec2, Velocity2};
    use std::io::Write;

    fn minimal_scenario() -> Scenario {
        Scenario {
            version: SCENARIO_VERSION,
            name: Some("minimal".into()),
            dt: 0.5,
            horizon: 6,
            ego: EgoSpec {
                pose: Pose2::origin(),
                velocity: Velocity2::new(4.0, 0.0),
                dims: BoxDims::new(4.0, 1.8).unwrap(),
            },
            templates: TemplateSpec::Arcs {
                arcs: vec![ArcSpec { yaw_rate: 0.0, speed_scale: 1.0, speed: None }],
            },
            agents: vec![],
            commands: vec![],
            goal_points: Default::default(),
            planner: Default::default(),
            pre: Default::default(),
            risk_noise: None,
            template_adapter: None,
            steps: None,
        }
    }

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn minimal_scenario_round_trips() {
        let scenario = minimal_scenario();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        save_scenario(&path, &scenario).unwrap();
        let loaded = load_scenario(&path).unwrap();
        assert_eq!(loaded, scenario);
        // fixed point: save the loaded copy and compare bytes
        let path2 = dir.path().join("s2.json");
        save_scenario(&path2, &loaded).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn zero_dt_names_the_field() {
        let mut scenario = minimal_scenario();
        scenario.dt = 0.0;
        let err = validate_scenario(&scenario).unwrap_err();
        match err {
            IoError::Validation { field, .. } => assert_eq!(field, "dt"),
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn wrong_version_rejected() {
        let mut scenario = minimal_scenario();
        scenario.version = 99;
        assert!(matches!(
            validate_scenario(&scenario),
            Err(IoError::Version { got: 99, .. })
        ));
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        let f = write_temp("{ not json");
        assert!(matches!(
            load_scenario(f.path()),
            Err(IoError::Parse { .. })
        ));
    }

    #[test]
    fn turn_command_without_goal_names_the_field() {
        let mut scenario = minimal_scenario();
        scenario.commands = vec![crate::simulator::CommandAt {
            step: 0,
            command: Command::TurnLeft,
        }];
        let err = validate_scenario(&scenario).unwrap_err();
        match err {
            IoError::Validation { field, .. } => assert_eq!(field, "goal_points.turn_left"),
            other => panic!("unexpected error {other}"),
        }
        scenario.goal_points.insert(Command::TurnLeft, Vec2::new(5.0, 5.0));
        validate_scenario(&scenario).unwrap();
    }

    #[test]
    fn uneven_mode_counts_rejected() {
        let mut scenario = minimal_scenario();
        let agent = |modes: usize| AgentScript {
            kind: AgentKind::ConstantVelocity,
            pose: Pose2::new(10.0, 0.0, 0.0),
            velocity: Velocity2::ZERO,
            waypoints: vec![],
            dims: BoxDims::new(2.0, 1.0).unwrap(),
            confidence: 0.9,
            prediction_modes: modes,
            prediction_noise: vec![],
        };
        scenario.agents = vec![agent(2), agent(3)];
        let err = validate_scenario(&scenario).unwrap_err();
        match err {
            IoError::Validation { field, .. } => assert_eq!(field, "agents[1].prediction_modes"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn template_length_must_match_horizon() {
        let mut scenario = minimal_scenario();
        scenario.templates = TemplateSpec::Points {
            templates: vec![vec![Vec2::new(1.0, 0.0); 4]],
            hold_heading: false,
        };
        let err = validate_scenario(&scenario).unwrap_err();
        match err {
            IoError::Validation { field, .. } => assert_eq!(field, "templates.templates[0]"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn per_row_normalization_scope_parses() {
        let mut text = serde_json::to_string(&minimal_scenario()).unwrap();
        text = text.replace("\"normalization_scope\":\"global\"", "\"normalization_scope\":\"per_row\"");
        let f = write_temp(&text);
        let scenario = load_scenario(f.path()).unwrap();
        assert_eq!(
            scenario.planner.normalization_scope,
            crate::sparse_game::NormalizationScope::PerRow
        );
    }

    #[test]
    fn non_finite_pose_rejected_at_parse() {
        // JSON cannot carry NaN, but "1e999" overflows to infinity; the
        // pose guard must reject it.
        let mut text = serde_json::to_string(&minimal_scenario()).unwrap();
        text = text.replace("\"x\":0.0", "\"x\":1e999");
        let f = write_temp(&text);
        assert!(matches!(load_scenario(f.path()), Err(IoError::Parse { .. })));
    }
}
