//! Shared geometric and temporal primitives: 2D poses, velocities, fixed-rate
//! trajectories, oriented boxes, and high-level commands.
//!
//! All angles are wrapped into `(-pi, pi]` so every heading has a single
//! canonical representative. Trajectories are validated at construction
//! (finite samples, `dt > 0`, at least one sample) and keep their fields
//! private so those invariants cannot be broken downstream.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("trajectory must contain at least one sample")]
    EmptyTrajectory,
    #[error("dt must be strictly positive, got {0}")]
    NonPositiveDt(f64),
    #[error("box dimensions must satisfy length >= width > 0, got length={length} width={width}")]
    InvalidBox { length: f64, width: f64 },
}

/// Wrap an angle into the canonical interval `(-pi, pi]`. In-range values
/// pass through unchanged, so wrapping is exactly idempotent.
pub fn wrap_angle(angle: f64) -> f64 {
    if -PI < angle && angle <= PI {
        return angle;
    }
    let r = angle.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Plain 2D vector used for positions, offsets, and relative quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec2Data")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

#[derive(Deserialize)]
struct Vec2Data {
    x: f64,
    y: f64,
}

impl TryFrom<Vec2Data> for Vec2 {
    type Error = GeometryError;
    fn try_from(d: Vec2Data) -> Result<Self, Self::Error> {
        if !(d.x.is_finite() && d.y.is_finite()) {
            return Err(GeometryError::NonFinite("vector"));
        }
        Ok(Vec2::new(d.x, d.y))
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Rotate counterclockwise by `angle` radians.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2 {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// 2D pose: position plus heading in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseData")]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Deserialize)]
struct PoseData {
    x: f64,
    y: f64,
    heading: f64,
}

impl TryFrom<PoseData> for Pose2 {
    type Error = GeometryError;
    fn try_from(d: PoseData) -> Result<Self, Self::Error> {
        if !(d.x.is_finite() && d.y.is_finite() && d.heading.is_finite()) {
            return Err(GeometryError::NonFinite("pose"));
        }
        Ok(Pose2::new(d.x, d.y, d.heading))
    }
}

impl Pose2 {
    /// Construct a pose; the heading is wrapped into `(-pi, pi]`.
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose2 {
            x,
            y,
            heading: wrap_angle(heading),
        }
    }

    pub fn origin() -> Self {
        Pose2::new(0.0, 0.0, 0.0)
    }

    pub fn position(self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.heading.is_finite()
    }

    /// The frame pose `g` such that transforming into `g` undoes
    /// transforming into `self`.
    pub fn inverse(self) -> Pose2 {
        let (s, c) = self.heading.sin_cos();
        Pose2::new(
            -(c * self.x + s * self.y),
            s * self.x - c * self.y,
            -self.heading,
        )
    }
}

/// 2D velocity in the same frame as the pose it accompanies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VelocityData")]
pub struct Velocity2 {
    pub vx: f64,
    pub vy: f64,
}

#[derive(Deserialize)]
struct VelocityData {
    vx: f64,
    vy: f64,
}

impl TryFrom<VelocityData> for Velocity2 {
    type Error = GeometryError;
    fn try_from(d: VelocityData) -> Result<Self, Self::Error> {
        if !(d.vx.is_finite() && d.vy.is_finite()) {
            return Err(GeometryError::NonFinite("velocity"));
        }
        Ok(Velocity2::new(d.vx, d.vy))
    }
}

impl Velocity2 {
    pub const ZERO: Velocity2 = Velocity2 { vx: 0.0, vy: 0.0 };

    pub fn new(vx: f64, vy: f64) -> Self {
        Velocity2 { vx, vy }
    }

    pub fn vec(self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }

    pub fn speed(self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn is_finite(self) -> bool {
        self.vx.is_finite() && self.vy.is_finite()
    }
}

/// One trajectory sample: pose plus instantaneous velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub pose: Pose2,
    pub velocity: Velocity2,
}

impl TrajectorySample {
    pub fn new(pose: Pose2, velocity: Velocity2) -> Self {
        TrajectorySample { pose, velocity }
    }

    pub fn position(self) -> Vec2 {
        self.pose.position()
    }
}

/// Fixed-rate sequence of poses and velocities.
///
/// Sample `i` sits at time `(i + 1) * dt` after the decision instant, matching
/// the prediction index convention `t in {1..T}`. Fields are private; use
/// [`Trajectory::new`] or [`Trajectory::from_positions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrajectoryData")]
pub struct Trajectory {
    dt: f64,
    samples: Vec<TrajectorySample>,
}

#[derive(Deserialize)]
struct TrajectoryData {
    dt: f64,
    samples: Vec<TrajectorySample>,
}

impl TryFrom<TrajectoryData> for Trajectory {
    type Error = GeometryError;
    fn try_from(d: TrajectoryData) -> Result<Self, Self::Error> {
        Trajectory::new(d.dt, d.samples)
    }
}

impl Trajectory {
    pub fn new(dt: f64, samples: Vec<TrajectorySample>) -> Result<Self, GeometryError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(GeometryError::NonPositiveDt(dt));
        }
        if samples.is_empty() {
            return Err(GeometryError::EmptyTrajectory);
        }
        for s in &samples {
            if !(s.pose.is_finite() && s.velocity.is_finite()) {
                return Err(GeometryError::NonFinite("trajectory sample"));
            }
        }
        Ok(Trajectory { dt, samples })
    }

    /// Like [`Trajectory::from_positions`] but with every heading pinned to
    /// `heading` instead of following the direction of motion. Used for
    /// lateral-offset maneuvers that keep the body axis fixed.
    pub fn from_positions_with_heading(
        dt: f64,
        positions: &[Vec2],
        heading: f64,
    ) -> Result<Self, GeometryError> {
        let mut traj = Trajectory::from_positions(dt, positions)?;
        for s in &mut traj.samples {
            s.pose = Pose2::new(s.pose.x, s.pose.y, heading);
        }
        Ok(traj)
    }

    /// Build a trajectory from bare positions. Headings follow the direction
    /// of motion and velocities are finite-differenced, with the trailing
    /// sample repeated at the end of the horizon.
    pub fn from_positions(dt: f64, positions: &[Vec2]) -> Result<Self, GeometryError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(GeometryError::NonPositiveDt(dt));
        }
        if positions.is_empty() {
            return Err(GeometryError::EmptyTrajectory);
        }
        let n = positions.len();
        let mut velocities = Vec::with_capacity(n);
        for i in 0..n.saturating_sub(1) {
            let d = positions[i + 1] - positions[i];
            velocities.push(Velocity2::new(d.x / dt, d.y / dt));
        }
        let trailing = velocities.last().copied().unwrap_or(Velocity2::ZERO);
        velocities.push(trailing);

        let mut heading = 0.0;
        let mut samples = Vec::with_capacity(n);
        for (i, (&p, &v)) in positions.iter().zip(&velocities).enumerate() {
            if i + 1 < n {
                let d = positions[i + 1] - positions[i];
                if d.norm() > 0.0 {
                    heading = d.y.atan2(d.x);
                }
            }
            samples.push(TrajectorySample::new(Pose2::new(p.x, p.y, heading), v));
        }
        Trajectory::new(dt, samples)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // at least one sample by construction
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> TrajectorySample {
        self.samples[i]
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.samples.iter().map(|s| s.position()).collect()
    }

    pub fn endpoint(&self) -> Vec2 {
        self.samples[self.samples.len() - 1].position()
    }
}

/// Express every sample of `traj` in the coordinate frame anchored at
/// `frame`. Velocities are rotated but not translated.
pub fn transform_to_frame(traj: &Trajectory, frame: Pose2) -> Trajectory {
    let (s, c) = frame.heading.sin_cos();
    let samples = traj
        .samples
        .iter()
        .map(|smp| {
            let dx = smp.pose.x - frame.x;
            let dy = smp.pose.y - frame.y;
            let pose = Pose2::new(
                c * dx + s * dy,
                -s * dx + c * dy,
                smp.pose.heading - frame.heading,
            );
            let v = smp.velocity;
            let velocity = Velocity2::new(c * v.vx + s * v.vy, -s * v.vx + c * v.vy);
            TrajectorySample::new(pose, velocity)
        })
        .collect();
    Trajectory {
        dt: traj.dt,
        samples,
    }
}

/// Inverse of [`transform_to_frame`]: map a frame-local trajectory back into
/// the frame's parent coordinates.
pub fn transform_from_frame(traj: &Trajectory, frame: Pose2) -> Trajectory {
    let (s, c) = frame.heading.sin_cos();
    let samples = traj
        .samples
        .iter()
        .map(|smp| {
            let pose = Pose2::new(
                frame.x + c * smp.pose.x - s * smp.pose.y,
                frame.y + s * smp.pose.x + c * smp.pose.y,
                smp.pose.heading + frame.heading,
            );
            let v = smp.velocity;
            let velocity = Velocity2::new(c * v.vx - s * v.vy, s * v.vx + c * v.vy);
            TrajectorySample::new(pose, velocity)
        })
        .collect();
    Trajectory {
        dt: traj.dt,
        samples,
    }
}

/// Length/width pair for a vehicle footprint, without a pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxDimsData")]
pub struct BoxDims {
    pub length: f64,
    pub width: f64,
}

#[derive(Deserialize)]
struct BoxDimsData {
    length: f64,
    width: f64,
}

impl TryFrom<BoxDimsData> for BoxDims {
    type Error = GeometryError;
    fn try_from(d: BoxDimsData) -> Result<Self, Self::Error> {
        BoxDims::new(d.length, d.width)
    }
}

impl BoxDims {
    pub fn new(length: f64, width: f64) -> Result<Self, GeometryError> {
        if !(length.is_finite() && width.is_finite()) || !(length >= width && width > 0.0) {
            return Err(GeometryError::InvalidBox { length, width });
        }
        Ok(BoxDims { length, width })
    }
}

/// Oriented rectangle: center pose plus length (along heading) and width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Pose2,
    pub dims: BoxDims,
}

impl OrientedBox {
    pub fn new(center: Pose2, length: f64, width: f64) -> Result<Self, GeometryError> {
        Ok(OrientedBox {
            center,
            dims: BoxDims::new(length, width)?,
        })
    }

    pub fn from_dims(center: Pose2, dims: BoxDims) -> Self {
        OrientedBox { center, dims }
    }

    pub fn length(&self) -> f64 {
        self.dims.length
    }

    pub fn width(&self) -> f64 {
        self.dims.width
    }

    /// Corner positions in world coordinates, counterclockwise.
    pub fn corners(&self) -> [Vec2; 4] {
        let hl = self.dims.length / 2.0;
        let hw = self.dims.width / 2.0;
        let center = self.center.position();
        let local = [
            Vec2::new(hl, hw),
            Vec2::new(-hl, hw),
            Vec2::new(-hl, -hw),
            Vec2::new(hl, -hw),
        ];
        local.map(|p| center + p.rotated(self.center.heading))
    }

    /// True iff `point` lies inside or on the boundary of the box.
    pub fn contains(&self, point: Vec2) -> bool {
        let local = (point - self.center.position()).rotated(-self.center.heading);
        local.x.abs() <= self.dims.length / 2.0 && local.y.abs() <= self.dims.width / 2.0
    }
}

fn project(corners: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in corners {
        let p = c.dot(axis);
        lo = lo.min(p);
        hi = hi.max(p);
    }
    (lo, hi)
}

/// Separating-axis intersection test for two oriented rectangles. Shared
/// boundary counts as an intersection.
pub fn box_overlap(a: &OrientedBox, b: &OrientedBox) -> bool {
    let ca = a.corners();
    let cb = b.corners();
    let axes = [
        Vec2::new(1.0, 0.0).rotated(a.center.heading),
        Vec2::new(0.0, 1.0).rotated(a.center.heading),
        Vec2::new(1.0, 0.0).rotated(b.center.heading),
        Vec2::new(0.0, 1.0).rotated(b.center.heading),
    ];
    for axis in axes {
        let (a_lo, a_hi) = project(&ca, axis);
        let (b_lo, b_hi) = project(&cb, axis);
        if a_hi < b_lo || b_hi < a_lo {
            return false;
        }
    }
    true
}

/// Signed separating-axis margin: positive values are the widest projection
/// gap (clear separation), negative values the smallest penetration depth.
/// Zero means exact boundary contact.
pub fn box_overlap_margin(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let ca = a.corners();
    let cb = b.corners();
    let axes = [
        Vec2::new(1.0, 0.0).rotated(a.center.heading),
        Vec2::new(0.0, 1.0).rotated(a.center.heading),
        Vec2::new(1.0, 0.0).rotated(b.center.heading),
        Vec2::new(0.0, 1.0).rotated(b.center.heading),
    ];
    let mut margin = f64::NEG_INFINITY;
    for axis in axes {
        let (a_lo, a_hi) = project(&ca, axis);
        let (b_lo, b_hi) = project(&cb, axis);
        let gap = (b_lo - a_hi).max(a_lo - b_hi);
        margin = margin.max(gap);
    }
    margin
}

/// High-level driving intent used to gate historical strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    GoStraight,
    TurnLeft,
    TurnRight,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::GoStraight => "go_straight",
            Command::TurnLeft => "turn_left",
            Command::TurnRight => "turn_right",
        };
        f.write_str(s)
    }
}

/// One traffic participant as seen by the planner: its predicted motion
/// modes plus the detection confidence score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPrediction {
    pub modes: Vec<Trajectory>,
    pub confidence: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn traj(dt: f64, points: &[(f64, f64, f64)], vels: &[(f64, f64)]) -> Trajectory {
        let samples = points
            .iter()
            .zip(vels)
            .map(|(&(x, y, h), &(vx, vy))| {
                TrajectorySample::new(Pose2::new(x, y, h), Velocity2::new(vx, vy))
            })
            .collect();
        Trajectory::new(dt, samples).unwrap()
    }

    #[test]
    fn wrap_angle_canonical_interval() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn transform_identity_frame() {
        let t = traj(0.1, &[(1.0, 2.0, 0.3), (2.0, 3.0, 0.4)], &[(1.0, 0.0), (0.0, 1.0)]);
        let out = transform_to_frame(&t, Pose2::origin());
        for (a, b) in t.samples().iter().zip(out.samples()) {
            assert!((a.pose.x - b.pose.x).abs() < 1e-12);
            assert!((a.pose.y - b.pose.y).abs() < 1e-12);
            assert!((a.pose.heading - b.pose.heading).abs() < 1e-12);
            assert!((a.velocity.vx - b.velocity.vx).abs() < 1e-12);
        }
    }

    #[test]
    fn transform_translation_cancellation() {
        let t = traj(0.1, &[(1.0, 0.0, 0.0)], &[(0.0, 0.0)]);
        let out = transform_to_frame(&t, Pose2::new(1.0, 0.0, 0.0));
        let s = out.sample(0);
        assert!(s.pose.x.abs() < 1e-12);
        assert!(s.pose.y.abs() < 1e-12);
        assert!(s.pose.heading.abs() < 1e-12);
    }

    #[test]
    fn transform_quarter_turn() {
        // Hand rotation-matrix evaluation: R(-pi/2) * (0, 1) = (1, 0).
        let t = traj(0.1, &[(0.0, 1.0, 0.0)], &[(0.0, 0.0)]);
        let out = transform_to_frame(&t, Pose2::new(0.0, 0.0, PI / 2.0));
        let s = out.sample(0);
        assert!((s.pose.x - 1.0).abs() < 1e-9);
        assert!(s.pose.y.abs() < 1e-9);
    }

    #[test]
    fn velocities_rotated_not_translated() {
        let t = traj(0.1, &[(5.0, 5.0, 0.0)], &[(1.0, 0.0)]);
        let out = transform_to_frame(&t, Pose2::new(100.0, -100.0, PI / 2.0));
        let v = out.sample(0).velocity;
        // Pure rotation by -pi/2: (1, 0) -> (0, -1).
        assert!(v.vx.abs() < 1e-12);
        assert!((v.vy + 1.0).abs() < 1e-12);
    }

    #[test]
    fn from_positions_finite_differences() {
        let t = Trajectory::from_positions(
            0.5,
            &[Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)],
        )
        .unwrap();
        assert_eq!(t.len(), 3);
        assert!((t.sample(0).velocity.vx - 2.0).abs() < 1e-12);
        // trailing velocity repeated
        assert!((t.sample(2).velocity.vx - 2.0).abs() < 1e-12);
        assert!(t.sample(1).pose.heading.abs() < 1e-12);
    }

    #[test]
    fn trajectory_rejects_bad_inputs() {
        assert!(matches!(
            Trajectory::new(0.0, vec![]),
            Err(GeometryError::NonPositiveDt(_))
        ));
        assert!(matches!(
            Trajectory::new(0.1, vec![]),
            Err(GeometryError::EmptyTrajectory)
        ));
        let bad = TrajectorySample::new(Pose2::new(f64::NAN, 0.0, 0.0), Velocity2::ZERO);
        assert!(Trajectory::new(0.1, vec![bad]).is_err());
    }

    #[test]
    fn box_self_overlap() {
        let b = OrientedBox::new(Pose2::new(1.0, 2.0, 0.7), 4.0, 2.0).unwrap();
        assert!(box_overlap(&b, &b));
    }

    #[test]
    fn boxes_far_apart() {
        let a = OrientedBox::new(Pose2::origin(), 1.0, 1.0).unwrap();
        let b = OrientedBox::new(Pose2::new(10.0, 0.0, 0.0), 1.0, 1.0).unwrap();
        assert!(!box_overlap(&a, &b));
    }

    #[test]
    fn boundary_contact_counts_as_overlap() {
        let a = OrientedBox::new(Pose2::origin(), 2.0, 2.0).unwrap();
        let b = OrientedBox::new(Pose2::new(2.0, 0.0, 0.0), 2.0, 2.0).unwrap();
        assert!(box_overlap(&a, &b));
    }

    /// Brute-force rasterization oracle: sample the overlap of the two
    /// axis-aligned bounding boxes on a fixed grid and look for a point
    /// inside both rectangles. Written independently of the SAT path.
    pub(crate) fn rasterization_overlap(a: &OrientedBox, b: &OrientedBox, grid: f64) -> bool {
        let aabb = |bx: &OrientedBox| {
            let cs = bx.corners();
            let xs: Vec<f64> = cs.iter().map(|c| c.x).collect();
            let ys: Vec<f64> = cs.iter().map(|c| c.y).collect();
            (
                xs.iter().cloned().fold(f64::INFINITY, f64::min),
                xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                ys.iter().cloned().fold(f64::INFINITY, f64::min),
                ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let (ax0, ax1, ay0, ay1) = aabb(a);
        let (bx0, bx1, by0, by1) = aabb(b);
        let x0 = ax0.max(bx0);
        let x1 = ax1.min(bx1);
        let y0 = ay0.max(by0);
        let y1 = ay1.min(by1);
        if x0 > x1 || y0 > y1 {
            return false;
        }
        // Coarse-to-fine scan with early exit; the finest level is `grid`.
        for step in [grid * 64.0, grid * 8.0, grid] {
            let mut y = y0;
            while y <= y1 {
                let mut x = x0;
                while x <= x1 {
                    let p = Vec2::new(x, y);
                    if a.contains(p) && b.contains(p) {
                        return true;
                    }
                    x += step;
                }
                y += step;
            }
        }
        false
    }

    #[test]
    fn rotated_boxes_against_rasterization_oracle() {
        // 4x2 at the origin vs 4x2 at (3.9, 0) rotated pi/4: the rotated
        // box's near corner reaches inside the first box.
        let a = OrientedBox::new(Pose2::origin(), 4.0, 2.0).unwrap();
        let b = OrientedBox::new(Pose2::new(3.9, 0.0, PI / 4.0), 4.0, 2.0).unwrap();
        let expected = rasterization_overlap(&a, &b, 0.001);
        assert!(expected, "oracle finds a shared 1 mm cell");
        assert_eq!(box_overlap(&a, &b), expected);
    }

    proptest! {
        #[test]
        fn transform_round_trip(
            x in -50.0..50.0f64, y in -50.0..50.0f64, h in -3.1..3.1f64,
            fx in -50.0..50.0f64, fy in -50.0..50.0f64, fh in -3.1..3.1f64,
            vx in -10.0..10.0f64, vy in -10.0..10.0f64,
        ) {
            let t = traj(0.1, &[(x, y, h)], &[(vx, vy)]);
            let f = Pose2::new(fx, fy, fh);
            let back = transform_to_frame(&transform_to_frame(&t, f), f.inverse());
            let (a, b) = (t.sample(0), back.sample(0));
            prop_assert!((a.pose.x - b.pose.x).abs() < 1e-9);
            prop_assert!((a.pose.y - b.pose.y).abs() < 1e-9);
            prop_assert!((wrap_angle(a.pose.heading - b.pose.heading)).abs() < 1e-9);
            prop_assert!((a.velocity.vx - b.velocity.vx).abs() < 1e-9);
            prop_assert!((a.velocity.vy - b.velocity.vy).abs() < 1e-9);
        }

        #[test]
        fn from_frame_matches_inverse(
            x in -50.0..50.0f64, y in -50.0..50.0f64, h in -3.1..3.1f64,
            fx in -50.0..50.0f64, fy in -50.0..50.0f64, fh in -3.1..3.1f64,
        ) {
            let t = traj(0.1, &[(x, y, h)], &[(1.0, -2.0)]);
            let f = Pose2::new(fx, fy, fh);
            let via_inverse = transform_to_frame(&t, f.inverse());
            let direct = transform_from_frame(&t, f);
            let (a, b) = (via_inverse.sample(0), direct.sample(0));
            prop_assert!((a.pose.x - b.pose.x).abs() < 1e-9);
            prop_assert!((a.pose.y - b.pose.y).abs() < 1e-9);
            prop_assert!((wrap_angle(a.pose.heading - b.pose.heading)).abs() < 1e-9);
        }

        #[test]
        fn box_overlap_symmetric(
            ax in -5.0..5.0f64, ay in -5.0..5.0f64, ah in -3.1..3.1f64,
            al in 0.5..6.0f64, aw in 0.2..0.5f64,
            bx in -5.0..5.0f64, by in -5.0..5.0f64, bh in -3.1..3.1f64,
            bl in 0.5..6.0f64, bw in 0.2..0.5f64,
        ) {
            let a = OrientedBox::new(Pose2::new(ax, ay, ah), al, aw).unwrap();
            let b = OrientedBox::new(Pose2::new(bx, by, bh), bl, bw).unwrap();
            prop_assert_eq!(box_overlap(&a, &b), box_overlap(&b, &a));
        }
    }
}
