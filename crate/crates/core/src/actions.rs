//! Motion primitive library: an in-place point turn followed by two
//! constant-curvature arcs, sampled at a fixed arc-length spacing.
//!
//! Trajectories are expressed relative to the start pose. The robot starts at
//! the origin facing +y; a waypoint's `yaw` is the heading offset from +y,
//! counter-clockwise positive, so positive curvature turns left.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::robot::{normalize_angle, RobotConfig};

pub const DEFAULT_ARC_LENGTH: f64 = 1.65;
pub const DEFAULT_SPACING: f64 = 0.06;
pub const DEFAULT_ACTION_COUNT: usize = 3042;

/// Default curvature set in 1/m: 13 evenly spaced values in [-0.75, 0.75].
pub fn default_curvatures() -> Vec<f64> {
    (-6..=6).map(|k| k as f64 / 8.0).collect()
}

/// Default point-turn set in degrees: multiples of 20 including 0.
pub fn default_rotations_deg() -> Vec<f64> {
    (0..18).map(|k| k as f64 * 20.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveSpec {
    pub rotation_index: usize,
    /// Point-turn angle in radians, wrapped to (-π, π].
    pub rotation: f64,
    /// Point-turn angle as configured, in degrees.
    pub rotation_deg: f64,
    pub curvature1: f64,
    pub curvature2: f64,
    /// Length of each of the two arcs.
    pub arc_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    /// Heading offset from +y, wrapped to (-π, π].
    pub yaw: f64,
}

impl Waypoint {
    /// Heading in the map convention where yaw 0 faces +x.
    #[inline]
    pub fn world_yaw(&self) -> f64 {
        self.yaw + FRAC_PI_2
    }

    /// Wheel centers in FL, FR, RL, RR order. Equal to
    /// [`crate::robot::wheel_positions`] at [`Waypoint::world_yaw`], but
    /// computed in the heading-offset frame so that mirrored waypoints give
    /// exactly mirrored wheels.
    pub fn wheel_positions(&self, cfg: &RobotConfig) -> [(f64, f64); 4] {
        let (s, c) = self.yaw.sin_cos();
        // forward = (-s, c), left = (-c, -s)
        let hf = cfg.wheelbase / 2.0;
        let hl = cfg.wheel_track / 2.0;
        [(hf, hl), (hf, -hl), (-hf, hl), (-hf, -hl)]
            .map(|(u, v)| (self.x + u * -s + v * -c, self.y + u * c + v * -s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub spec: PrimitiveSpec,
    pub step_spacing: f64,
    /// `waypoints[0]` is the start after the point turn; each arc then
    /// contributes its samples, with the junction between arcs emitted once.
    pub waypoints: Vec<Waypoint>,
}

impl Trajectory {
    /// Sum of straight-line distances between consecutive waypoints.
    pub fn chord_length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
            .sum()
    }

    /// Nominal path length (both arcs).
    pub fn arc_length(&self) -> f64 {
        2.0 * self.spec.arc_length
    }

    /// Copy holding only the first `n` waypoints.
    pub fn truncated(&self, n: usize) -> Self {
        Self { waypoints: self.waypoints[..n.min(self.waypoints.len())].to_vec(), ..self.clone() }
    }
}

/// Builds the rotation-major, then curvature1, then curvature2 product.
pub fn build_action_space(curvatures: &[f64], rotations_deg: &[f64], arc_length: f64) -> Result<Vec<PrimitiveSpec>> {
    if curvatures.is_empty() || rotations_deg.is_empty() {
        return Err(Error::InvalidConfig("curvature and rotation sets must be non-empty".into()));
    }
    if curvatures.iter().chain(rotations_deg).any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("action-space values must be finite".into()));
    }
    if !(arc_length > 0.0 && arc_length.is_finite()) {
        return Err(Error::InvalidConfig(format!("arc length must be positive, got {arc_length}")));
    }
    let mut specs = Vec::with_capacity(rotations_deg.len() * curvatures.len() * curvatures.len());
    for (rotation_index, &deg) in rotations_deg.iter().enumerate() {
        // Wrap in degrees first so that mirrored turns (20° / 340°) produce
        // exactly negated radians.
        let wrapped = deg.rem_euclid(360.0);
        let signed = if wrapped > 180.0 { wrapped - 360.0 } else { wrapped };
        let rotation = signed.to_radians();
        for &curvature1 in curvatures {
            for &curvature2 in curvatures {
                specs.push(PrimitiveSpec {
                    rotation_index,
                    rotation,
                    rotation_deg: deg,
                    curvature1,
                    curvature2,
                    arc_length,
                });
            }
        }
    }
    Ok(specs)
}

/// Pose after travelling `s` along a constant-curvature arc.
#[inline]
fn advance(start: Waypoint, curvature: f64, s: f64) -> Waypoint {
    let (s0, c0) = start.yaw.sin_cos();
    if curvature == 0.0 {
        return Waypoint { x: start.x - s * s0, y: start.y + s * c0, yaw: start.yaw };
    }
    let yaw = start.yaw + curvature * s;
    let (s1, c1) = yaw.sin_cos();
    Waypoint {
        x: start.x + (c1 - c0) / curvature,
        y: start.y + (s1 - s0) / curvature,
        yaw: normalize_angle(yaw),
    }
}

/// Samples a primitive every `spacing` meters of arc length.
pub fn discretize(spec: &PrimitiveSpec, spacing: f64) -> Result<Trajectory> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidConfig(format!("waypoint spacing must be positive, got {spacing}")));
    }
    let full_steps = ((spec.arc_length / spacing - 1e-9).ceil() as usize).saturating_sub(1);
    let mut waypoints = Vec::with_capacity(1 + 2 * (full_steps + 1));
    let mut start = Waypoint { x: 0.0, y: 0.0, yaw: spec.rotation };
    waypoints.push(start);
    for curvature in [spec.curvature1, spec.curvature2] {
        for k in 1..=full_steps {
            waypoints.push(advance(start, curvature, k as f64 * spacing));
        }
        start = advance(start, curvature, spec.arc_length);
        waypoints.push(start);
    }
    Ok(Trajectory { spec: *spec, step_spacing: spacing, waypoints })
}

/// Configured primitive library together with its sampled trajectories.
#[derive(Debug, Clone)]
pub struct ActionSpace {
    pub trajectories: Vec<Trajectory>,
}

impl ActionSpace {
    pub fn new(curvatures: &[f64], rotations_deg: &[f64], arc_length: f64, spacing: f64) -> Result<Self> {
        let trajectories = build_action_space(curvatures, rotations_deg, arc_length)?
            .iter()
            .map(|spec| discretize(spec, spacing))
            .collect::<Result<_>>()?;
        Ok(Self { trajectories })
    }

    /// 18 point turns x 13 x 13 curvature pairs.
    pub fn standard() -> Self {
        let space = Self::new(&default_curvatures(), &default_rotations_deg(), DEFAULT_ARC_LENGTH, DEFAULT_SPACING)
            .expect("default action space is valid");
        debug_assert_eq!(space.len(), DEFAULT_ACTION_COUNT);
        space
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// One line per primitive: `index rotation_deg curvature1 curvature2`.
    pub fn manifest(&self) -> String {
        let mut out = String::from("# index rotation_deg curvature1 curvature2\n");
        for (i, t) in self.trajectories.iter().enumerate() {
            let s = &t.spec;
            writeln!(out, "{i} {} {} {}", s.rotation_deg, s.curvature1, s.curvature2).unwrap();
        }
        out
    }

    /// Index of the primitive that mirrors `index` across the y-axis
    /// (negated turn and curvatures), if present.
    pub fn mirror_of(&self, index: usize) -> Option<usize> {
        let s = &self.trajectories[index].spec;
        let eq_angle = |a: f64, b: f64| normalize_angle(a - b).abs() < 1e-12;
        self.trajectories.iter().position(|t| {
            eq_angle(t.spec.rotation, -s.rotation)
                && t.spec.curvature1 == -s.curvature1
                && t.spec.curvature2 == -s.curvature2
        })
    }
}
