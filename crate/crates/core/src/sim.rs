//! Ground-truth traverse labeling.
//!
//! The robot is placed statically on every waypoint of a trajectory, starting
//! from the map center. Three failure events are checked at each placement and
//! latch on first occurrence:
//!
//! - step: a wheel's terrain elevation changes by more than `max_step` between
//!   consecutive placements. The point turn from the start heading (+y) to
//!   waypoint 0 is swept in sub-steps that move each wheel at most one
//!   waypoint spacing along its turning circle; a step during the sweep is
//!   reported at waypoint 0.
//! - obstacle: a map node under the rotated body rectangle sits more than
//!   `ride_height` above the wheel-contact plane.
//! - tilt: the contact plane is inclined more than `max_tilt`.
//!
//! All thresholds are strict. A placement that leaves the map marks the
//! traverse invalid instead of failing the batch.

use std::f64::consts::FRAC_PI_2;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::actions::Trajectory;
use crate::error::{Error, Result};
use crate::robot::{solve_pose_local, ContactPlane, Pose, RobotConfig, WheelContacts};
use crate::terrain::ElevationMap;

pub const LABELS_HEADER: &str = "map_id,traj_id,step,obstacle,tilt,valid";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct FailureLabel {
    pub step: bool,
    pub obstacle: bool,
    pub tilt: bool,
}

impl FailureLabel {
    pub fn any(&self) -> bool {
        self.step || self.obstacle || self.tilt
    }

    pub fn as_array(&self) -> [bool; 3] {
        [self.step, self.obstacle, self.tilt]
    }

    pub fn from_array(bits: [bool; 3]) -> Self {
        Self { step: bits[0], obstacle: bits[1], tilt: bits[2] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TraverseResult {
    pub label: FailureLabel,
    /// Waypoint index of the first step, obstacle and tilt failure.
    pub first_failure: [Option<usize>; 3],
    /// False when some placement left the map.
    pub valid: bool,
}

pub fn check_step(prev: &WheelContacts, curr: &WheelContacts, max_step: f64) -> bool {
    prev.points.iter().zip(&curr.points).any(|(a, b)| (b[2] - a[2]).abs() > max_step)
}

pub fn check_tilt(pose: &Pose, max_tilt: f64) -> bool {
    pose.tilt > max_tilt
}

/// Obstacle check against the plane fitted through `contacts`. `pose` and
/// `contacts` are in world coordinates.
pub fn check_obstacle(cfg: &RobotConfig, map: &ElevationMap, pose: &Pose, contacts: &WheelContacts) -> Result<bool> {
    let (ox, oy) = map.origin();
    let mut plane = contacts.fit_plane();
    plane.center = (plane.center.0 - ox, plane.center.1 - oy);
    body_clearance_exceeded(cfg, map, pose.x - ox, pose.y - oy, pose.yaw, &plane)
}

/// True when any node inside the body rectangle at local `(x, y, yaw)` rises
/// more than the ride height above `plane` (also in local coordinates).
fn body_clearance_exceeded(
    cfg: &RobotConfig,
    map: &ElevationMap,
    x: f64,
    y: f64,
    yaw: f64,
    plane: &ContactPlane,
) -> Result<bool> {
    let (s, c) = yaw.sin_cos();
    let hl = cfg.body_length / 2.0;
    let hw = cfg.body_width / 2.0;
    let ex = c.abs() * hl + s.abs() * hw;
    let ey = s.abs() * hl + c.abs() * hw;
    let half = map.half_extent();
    if x - ex < -half || x + ex > half || y - ey < -half || y + ey > half {
        return Err(Error::OutOfBounds { x, y });
    }

    let cell = map.cell_size();
    let side = map.side_cells();
    let col_lo = ((x - ex + half) / cell).ceil().max(0.0) as usize;
    let col_hi = (((x + ex + half) / cell).floor() as usize).min(side - 1);
    let row_lo = ((y - ey + half) / cell).ceil().max(0.0) as usize;
    let row_hi = (((y + ey + half) / cell).floor() as usize).min(side - 1);

    let cells = map.cells();
    for row in row_lo..=row_hi {
        let dy = row as f64 * cell - half - y;
        let base = row * side;
        for col in col_lo..=col_hi {
            let dx = col as f64 * cell - half - x;
            let u = c * dx + s * dy;
            let v = -s * dx + c * dy;
            if u.abs() > hl || v.abs() > hw {
                continue;
            }
            let z = cells[base + col] as f64;
            if z - plane.height_at(x + dx, y + dy) > cfg.ride_height {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Walks `traj` from the map center and records the three failure events.
pub fn simulate(cfg: &RobotConfig, map: &ElevationMap, traj: &Trajectory) -> TraverseResult {
    let mut result = TraverseResult { valid: true, ..Default::default() };

    let Ok((_, mut prev, _)) = solve_pose_local(cfg, map, 0.0, 0.0, FRAC_PI_2) else {
        result.valid = false;
        return result;
    };

    let turn = traj.waypoints.first().map_or(0.0, |w| w.yaw);
    let wheel_radius = cfg.wheelbase.hypot(cfg.wheel_track) / 2.0;
    let sweeps = (turn.abs() * wheel_radius / traj.step_spacing - 1e-9).ceil().max(0.0) as usize;
    for j in 1..sweeps {
        let yaw = FRAC_PI_2 + turn * j as f64 / sweeps as f64;
        let Ok((_, contacts, _)) = solve_pose_local(cfg, map, 0.0, 0.0, yaw) else {
            result.valid = false;
            return result;
        };
        if check_step(&prev, &contacts, cfg.max_step) {
            result.first_failure[0] = Some(0);
        }
        prev = contacts;
    }

    for (k, wp) in traj.waypoints.iter().enumerate() {
        let yaw = wp.world_yaw();
        let Ok((pose, contacts, plane)) = solve_pose_local(cfg, map, wp.x, wp.y, yaw) else {
            result.valid = false;
            break;
        };
        let step = check_step(&prev, &contacts, cfg.max_step);
        let obstacle = match body_clearance_exceeded(cfg, map, wp.x, wp.y, yaw, &plane) {
            Ok(hit) => hit,
            Err(_) => {
                result.valid = false;
                break;
            }
        };
        let tilt = check_tilt(&pose, cfg.max_tilt);

        for (i, fired) in [step, obstacle, tilt].into_iter().enumerate() {
            if fired && result.first_failure[i].is_none() {
                result.first_failure[i] = Some(k);
            }
        }
        prev = contacts;
    }
    result.label = FailureLabel::from_array(result.first_failure.map(|f| f.is_some()));
    result
}

/// Simulates every trajectory on one map. Output order follows `trajectories`
/// and does not depend on the size of the rayon pool.
pub fn simulate_all(cfg: &RobotConfig, map: &ElevationMap, trajectories: &[Trajectory]) -> Vec<TraverseResult> {
    trajectories.par_iter().map(|t| simulate(cfg, map, t)).collect()
}

/// One row of a labels CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelRow {
    pub map_id: u32,
    pub traj_id: u32,
    pub label: FailureLabel,
    pub valid: bool,
}

impl LabelRow {
    pub fn new(map_id: u32, traj_id: u32, result: &TraverseResult) -> Self {
        Self { map_id, traj_id, label: result.label, valid: result.valid }
    }
}

pub fn write_labels_csv<W: Write>(mut out: W, rows: impl IntoIterator<Item = LabelRow>) -> Result<()> {
    let b = |v: bool| if v { '1' } else { '0' };
    let mut text = String::from(LABELS_HEADER);
    text.push('\n');
    for r in rows {
        let l = r.label;
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.map_id,
            r.traj_id,
            b(l.step),
            b(l.obstacle),
            b(l.tilt),
            b(r.valid)
        ));
        if text.len() > 1 << 16 {
            out.write_all(text.as_bytes())?;
            text.clear();
        }
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub fn read_labels_csv<R: BufRead>(input: R) -> Result<Vec<LabelRow>> {
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == LABELS_HEADER => {}
        Some(Ok(h)) => return Err(Error::Parse(format!("unexpected labels header {h:?}"))),
        Some(Err(e)) => return Err(e.into()),
        None => return Err(Error::Parse("empty labels file".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Parse(format!("labels line {}: {line:?}", i + 2));
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 6 {
            return Err(bad());
        }
        let bit = |s: &str| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad()),
        };
        rows.push(LabelRow {
            map_id: f[0].parse().map_err(|_| bad())?,
            traj_id: f[1].parse().map_err(|_| bad())?,
            label: FailureLabel { step: bit(f[2])?, obstacle: bit(f[3])?, tilt: bit(f[4])? },
            valid: bit(f[5])?,
        });
    }
    Ok(rows)
}
