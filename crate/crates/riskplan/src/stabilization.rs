//! Temporal stabilization of the planning best response: candidates are
//! matched against up to `t` historical strategies by Hausdorff distance,
//! gated by the high-level command so stale intents never bias new behavior.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{transform_to_frame, Command, Pose2, Trajectory, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilizationError {
    #[error("hausdorff distance over an empty point set")]
    EmptyTrajectory,
}

/// One remembered strategy: the selected trajectory in world frame, the
/// command it was chosen under, and the ego pose at selection time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub trajectory: Trajectory,
    pub command: Command,
    pub ego_pose: Pose2,
}

/// Ring of up to `capacity` past selected strategies, newest last. One entry
/// is pushed per planning step, so the newest entry is one step old.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryBuffer {
    capacity: usize,
    entries: VecDeque<HistoryEntry>,
}

impl HistoryBuffer {
    /// A capacity of zero is allowed and keeps the buffer permanently empty,
    /// which disables the consistency term entirely.
    pub fn new(capacity: usize) -> Self {
        HistoryBuffer {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn newest(&self) -> Option<&HistoryEntry> {
        self.entries.back()
    }

    /// Entries oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &HistoryEntry> {
        self.entries.iter()
    }

    /// Append the newest selected strategy, evicting the oldest entry once
    /// over capacity.
    pub fn push(&mut self, trajectory: Trajectory, command: Command, ego_pose: Pose2) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(HistoryEntry {
            trajectory,
            command,
            ego_pose,
        });
    }

    /// Drop every entry; used when the high-level command changes.
    pub fn flush(&mut self) {
        self.entries.clear();
    }
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff_points(a: &[Vec2], b: &[Vec2]) -> Result<f64, StabilizationError> {
    if a.is_empty() || b.is_empty() {
        return Err(StabilizationError::EmptyTrajectory);
    }
    let directed = |from: &[Vec2], to: &[Vec2]| -> f64 {
        from.iter()
            .map(|p| {
                to.iter()
                    .map(|q| p.distance(*q))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}

/// Symmetric Hausdorff distance over trajectory sample positions. Both
/// trajectories must already share a frame.
pub fn hausdorff(a: &Trajectory, b: &Trajectory) -> f64 {
    hausdorff_points(&a.positions(), &b.positions()).expect("trajectories are non-empty")
}

/// Per-candidate consistency scores against the buffered history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyScores {
    /// Mean Hausdorff distance to the participating history entries; all
    /// zeros when the gate is closed.
    pub scores: Vec<f64>,
    /// False when the buffer was empty or the command changed.
    pub gate_open: bool,
}

impl ConsistencyScores {
    fn gated_off(n: usize) -> Self {
        ConsistencyScores {
            scores: vec![0.0; n],
            gate_open: false,
        }
    }
}

/// Score each candidate against the buffered strategies.
///
/// Candidates are given in world frame. If the buffer is empty or its newest
/// command differs from `current_command`, the gate closes and every score is
/// zero (the caller is expected to flush the buffer on a command change).
/// Otherwise each history entry is transformed into the current ego frame and
/// truncated to its still-future part: an entry pushed `j` steps ago keeps
/// its samples from index `j - 1` on (timestamps at or after the current
/// decision instant) and is matched against the whole candidate. Entries
/// with nothing left in the window are skipped.
pub fn consistency_scores(
    candidates: &[Trajectory],
    buffer: &HistoryBuffer,
    current_command: Command,
    current_pose: Pose2,
) -> ConsistencyScores {
    assert!(!candidates.is_empty(), "candidate set must be non-empty");
    let Some(newest) = buffer.newest() else {
        return ConsistencyScores::gated_off(candidates.len());
    };
    if newest.command != current_command {
        return ConsistencyScores::gated_off(candidates.len());
    }

    let windows: Vec<Vec<Vec2>> = buffer
        .iter()
        .enumerate()
        .filter_map(|(i, entry)| {
            let age = buffer.len() - i; // newest entry is one step old
            let skip = age - 1;
            let local = transform_to_frame(&entry.trajectory, current_pose).positions();
            (skip < local.len()).then(|| local[skip..].to_vec())
        })
        .collect();

    let scores = candidates
        .iter()
        .map(|candidate| {
            let cand = transform_to_frame(candidate, current_pose).positions();
            if windows.is_empty() {
                return 0.0;
            }
            let total: f64 = windows
                .iter()
                .map(|tail| hausdorff_points(&cand, tail).expect("windows are non-empty"))
                .sum();
            total / windows.len() as f64
        })
        .collect();

    ConsistencyScores {
        scores,
        gate_open: true,
    }
}
