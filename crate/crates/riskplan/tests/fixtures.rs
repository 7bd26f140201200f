//! The committed weight fixtures must load into every consumer and drive
//! their pipelines end to end.

use std::path::Path;

use ndarray::Array2;

use riskplan::adapters::{gated_map_fusion, EmbeddingSet};
use riskplan::io::fixtures::{
    attention_weights, map_fusion_weights, refine_weights, template_adapter, WeightFixture,
};
use riskplan::planner::{refine_queries, resolve_goal, Scene};
use riskplan::risk::{build_risk_tensor, minimax_reduce, RiskParams};
use riskplan::sparse_game::{build_graph, NormalizationScope};
use riskplan::types::{AgentPrediction, Command, Pose2, Trajectory, TrajectorySample, Vec2, Velocity2};

fn fixture(name: &str) -> WeightFixture {
    WeightFixture::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)).unwrap()
}

fn constant_traj(dt: f64, n: usize, start: Vec2, v: Vec2) -> Trajectory {
    let samples = (0..n)
        .map(|i| {
            let s = (i + 1) as f64 * dt;
            TrajectorySample::new(
                Pose2::new(start.x + v.x * s, start.y + v.y * s, 0.0),
                Velocity2::new(v.x, v.y),
            )
        })
        .collect();
    Trajectory::new(dt, samples).unwrap()
}

#[test]
fn attention_refine_fixture_drives_query_refinement() {
    let fixture = fixture("attention_refine.json");
    let weights = refine_weights(&fixture).unwrap();
    assert_eq!(weights.attention.key_dim(), 16);
    assert_eq!(weights.attention.ffn_hidden.out_dim(), 32);
    assert_eq!(weights.attention.beta, 2.0);

    let dt = 0.5;
    let n = 6;
    let candidates = vec![
        constant_traj(dt, n, Vec2::ZERO, Vec2::new(5.0, 0.0)),
        constant_traj(dt, n, Vec2::ZERO, Vec2::new(5.0, 1.0)),
    ];
    let agents = vec![
        AgentPrediction {
            modes: vec![constant_traj(dt, n, Vec2::new(12.0, 0.0), Vec2::new(-3.0, 0.0))],
            confidence: 0.9,
        },
        AgentPrediction {
            modes: vec![constant_traj(dt, n, Vec2::new(8.0, 6.0), Vec2::new(0.0, -2.0))],
            confidence: 0.8,
        },
        AgentPrediction {
            modes: vec![constant_traj(dt, n, Vec2::new(40.0, 9.0), Vec2::new(1.0, 0.0))],
            confidence: 0.7,
        },
    ];
    let ego_pose = Pose2::origin();
    let ego_velocity = Velocity2::new(5.0, 0.0);
    let goal = resolve_goal(ego_pose, ego_velocity, Command::GoStraight, 3.0, &Default::default()).unwrap();
    let scene = Scene {
        ego_pose,
        ego_velocity,
        candidates,
        agents,
        command: Command::GoStraight,
        goal,
    };
    let params = RiskParams::default();
    let tensor = build_risk_tensor(&scene.candidates, &scene.agents, &params).unwrap();
    let confidences: Vec<f64> = scene.agents.iter().map(|a| a.confidence).collect();
    let matrix = minimax_reduce(&tensor, &confidences);
    let graph = build_graph(&matrix, 2, NormalizationScope::Global);

    let out = refine_queries(&scene, &graph, &weights, 2.0).unwrap();
    assert_eq!(out.refined.nrows(), 2);
    assert_eq!(out.refined.ncols(), 16);
    assert!(out.refined.iter().all(|v| v.is_finite()));
    for p in 0..2 {
        let active: usize = graph.active[p].iter().filter(|&&a| a).count();
        assert_eq!(active, 2);
        let row_sum: f64 = (0..3).map(|k| out.attention[[p, k]]).sum();
        assert!((row_sum - 1.0).abs() < 1e-9);
    }
}

#[test]
fn map_fusion_fixture_runs_the_gated_path() {
    let fixture = fixture("map_fusion.json");
    let weights = map_fusion_weights(&fixture).unwrap();
    let emb = EmbeddingSet {
        map_embeddings: Array2::from_shape_fn((3, 4), |(i, j)| 0.2 * (i as f64) - 0.1 * (j as f64)),
        det_embeddings: Array2::from_shape_fn((2, 4), |(i, j)| 0.3 * (j as f64) - 0.2 * (i as f64)),
    };
    let out = gated_map_fusion(&emb, &weights).unwrap();
    assert_eq!(out.nrows(), 2);
    assert_eq!(out.ncols(), 4);
    assert!(out.iter().all(|v| v.is_finite()));
    // a live gate actually modulates
    assert_ne!(out, emb.det_embeddings);
}

#[test]
fn template_adapter_fixture_loads_with_declared_shapes() {
    let fixture = fixture("template_adapter.json");
    let adapter = template_adapter(&fixture).unwrap();
    assert_eq!(adapter.refine.query_proj.in_dim(), 24); // 2 * horizon of 12
    assert_eq!(adapter.refine.decoder.out_dim(), 24);
    assert_eq!(adapter.ego_embed.in_dim(), 6);
    assert_eq!(adapter.det_embed.in_dim(), 6);
}

#[test]
fn attention_block_alone_loads_from_fixture() {
    let fixture = fixture("attention_refine.json");
    let weights = attention_weights(&fixture).unwrap();
    weights.validate().unwrap();
}
