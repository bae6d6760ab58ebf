//! Rigid four-wheel platform geometry and its static pose on terrain.
//!
//! The chassis is treated as rigid: the four wheel-center elevations are
//! fitted with a least-squares plane, and roll, pitch and tilt come from that
//! plane's normal. There is no suspension model.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::terrain::ElevationMap;

const DEFAULT_CONFIG: &str = include_str!("../config/robot_default.toml");

/// Geometry and mobility limits of the simulated platform. Lengths in meters,
/// angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotConfig {
    /// Front-to-rear wheel center distance.
    pub wheelbase: f64,
    /// Left-to-right wheel center distance.
    pub wheel_track: f64,
    pub wheel_width: f64,
    pub body_length: f64,
    pub body_width: f64,
    /// Chassis underside clearance above the wheel-contact plane.
    pub ride_height: f64,
    /// Largest per-wheel elevation change between consecutive poses.
    pub max_step: f64,
    /// Largest inclination from vertical.
    pub max_tilt: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotConfigFile {
    wheelbase: f64,
    wheel_track: f64,
    wheel_width: f64,
    body_length: f64,
    body_width: f64,
    ride_height: f64,
    max_step: f64,
    /// Degrees.
    max_tilt: f64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("shipped robot config is valid")
    }
}

impl RobotConfig {
    /// Parses `key = value` text. Every field is required; `max_tilt` is in
    /// degrees.
    pub fn parse(text: &str) -> Result<Self> {
        let f: RobotConfigFile =
            toml::from_str(text).map_err(|e| Error::Parse(format!("robot config: {e}")))?;
        let cfg = Self {
            wheelbase: f.wheelbase,
            wheel_track: f.wheel_track,
            wheel_width: f.wheel_width,
            body_length: f.body_length,
            body_width: f.body_width,
            ride_height: f.ride_height,
            max_step: f.max_step,
            max_tilt: f.max_tilt.to_radians(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Renders the config in the same format [`RobotConfig::parse`] reads.
    pub fn to_config_text(&self) -> String {
        format!(
            "wheelbase = {}\nwheel_track = {}\nwheel_width = {}\nbody_length = {}\nbody_width = {}\n\
             ride_height = {}\nmax_step = {}\nmax_tilt = {}\n",
            self.wheelbase,
            self.wheel_track,
            self.wheel_width,
            self.body_length,
            self.body_width,
            self.ride_height,
            self.max_step,
            self.max_tilt.to_degrees()
        )
    }

    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("wheelbase", self.wheelbase),
            ("wheel_track", self.wheel_track),
            ("wheel_width", self.wheel_width),
            ("body_length", self.body_length),
            ("body_width", self.body_width),
            ("ride_height", self.ride_height),
            ("max_step", self.max_step),
        ];
        for (name, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.max_tilt > 0.0 && self.max_tilt < FRAC_PI_2) {
            return Err(Error::InvalidConfig(format!(
                "max_tilt must lie in (0, 90) degrees, got {}",
                self.max_tilt.to_degrees()
            )));
        }
        if self.body_length < self.wheelbase || self.body_width < self.wheel_track {
            return Err(Error::InvalidConfig(
                "body footprint must cover the wheel footprint".into(),
            ));
        }
        Ok(())
    }

    /// Distance from the robot center to a body corner.
    pub fn body_half_diagonal(&self) -> f64 {
        (self.body_length / 2.0).hypot(self.body_width / 2.0)
    }
}

/// Wraps an angle into `(-π, π]`. In-range angles are returned untouched and
/// `normalize_angle(-a) == -normalize_angle(a)` away from ±π.
pub fn normalize_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut r = a % (2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    } else if r <= -PI {
        r += 2.0 * PI;
    }
    r
}

/// Wheel order used throughout: front-left, front-right, rear-left, rear-right.
pub const WHEEL_NAMES: [&str; 4] = ["FL", "FR", "RL", "RR"];

/// Wheel-center `(x, y)` positions for a robot at `(x, y)` heading `yaw`
/// (yaw 0 faces +x, left is +y).
pub fn wheel_positions(cfg: &RobotConfig, x: f64, y: f64, yaw: f64) -> [(f64, f64); 4] {
    let (s, c) = yaw.sin_cos();
    let hf = cfg.wheelbase / 2.0;
    let hl = cfg.wheel_track / 2.0;
    [(hf, hl), (hf, -hl), (-hf, hl), (-hf, -hl)].map(|(u, v)| (x + c * u - s * v, y + s * u + c * v))
}

/// Static pose. `z` is the contact-plane height under the robot center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub z: f64,
    /// Positive when the left side is raised.
    pub roll: f64,
    /// Positive when the front is raised.
    pub pitch: f64,
    /// Angle between the contact-plane normal and world vertical.
    pub tilt: f64,
}

/// Least-squares plane `z = height + gx * (x - cx) + gy * (y - cy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPlane {
    pub center: (f64, f64),
    pub height: f64,
    pub gx: f64,
    pub gy: f64,
}

impl ContactPlane {
    #[inline]
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        self.height + self.gx * (x - self.center.0) + self.gy * (y - self.center.1)
    }

    /// Angle of the plane normal from vertical.
    pub fn inclination(&self) -> f64 {
        self.gx.hypot(self.gy).atan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelContacts {
    /// `(x, y, z)` per wheel in [`WHEEL_NAMES`] order.
    pub points: [[f64; 3]; 4],
}

impl WheelContacts {
    /// Least-squares plane through the four contacts.
    pub fn fit_plane(&self) -> ContactPlane {
        let n = self.points.len() as f64;
        let cx = self.points.iter().map(|p| p[0]).sum::<f64>() / n;
        let cy = self.points.iter().map(|p| p[1]).sum::<f64>() / n;
        let cz = self.points.iter().map(|p| p[2]).sum::<f64>() / n;
        let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for p in &self.points {
            let (dx, dy, dz) = (p[0] - cx, p[1] - cy, p[2] - cz);
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
            sxz += dx * dz;
            syz += dy * dz;
        }
        let det = sxx * syy - sxy * sxy;
        let gx = (sxz * syy - syz * sxy) / det;
        let gy = (syz * sxx - sxz * sxy) / det;
        ContactPlane { center: (cx, cy), height: cz, gx, gy }
    }

    /// Root-mean-square distance of the contacts from their fitted plane.
    pub fn residual(&self) -> f64 {
        let plane = self.fit_plane();
        let ss: f64 = self
            .points
            .iter()
            .map(|p| (p[2] - plane.height_at(p[0], p[1])).powi(2))
            .sum();
        (ss / 4.0).sqrt()
    }
}

/// Places the robot at `(x, y, yaw)` in world coordinates.
pub fn solve_pose(
    cfg: &RobotConfig,
    map: &ElevationMap,
    x: f64,
    y: f64,
    yaw: f64,
) -> Result<(Pose, WheelContacts, ContactPlane)> {
    let (ox, oy) = map.origin();
    let (mut pose, mut contacts, mut plane) = solve_pose_local(cfg, map, x - ox, y - oy, yaw)?;
    pose.x = x;
    pose.y = y;
    for p in contacts.points.iter_mut() {
        p[0] += ox;
        p[1] += oy;
    }
    plane.center = (plane.center.0 + ox, plane.center.1 + oy);
    Ok((pose, contacts, plane))
}

/// As [`solve_pose`], with `(x, y)` relative to the map origin.
pub fn solve_pose_local(
    cfg: &RobotConfig,
    map: &ElevationMap,
    x: f64,
    y: f64,
    yaw: f64,
) -> Result<(Pose, WheelContacts, ContactPlane)> {
    let wheels = wheel_positions(cfg, x, y, yaw);
    let mut points = [[0.0; 3]; 4];
    for (p, &(wx, wy)) in points.iter_mut().zip(&wheels) {
        *p = [wx, wy, map.elevation_at_local(wx, wy)?];
    }
    let contacts = WheelContacts { points };
    let plane = contacts.fit_plane();

    // Slopes along the heading and to the left of it.
    let (s, c) = yaw.sin_cos();
    let forward = plane.gx * c + plane.gy * s;
    let left = -plane.gx * s + plane.gy * c;
    let norm = (1.0 + plane.gx * plane.gx + plane.gy * plane.gy).sqrt();

    let pose = Pose {
        x,
        y,
        yaw: normalize_angle(yaw),
        z: plane.height_at(x, y),
        roll: (left / norm).asin(),
        pitch: forward.atan(),
        tilt: plane.inclination(),
    };
    Ok((pose, contacts, plane))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::DEFAULT_CELL_SIZE;
    use proptest::prelude::*;

    fn cfg() -> RobotConfig {
        RobotConfig::default()
    }

    fn plane_map(gx: f64, gy: f64) -> ElevationMap {
        ElevationMap::from_fn(129, DEFAULT_CELL_SIZE, (0.0, 0.0), |x, y| gx * x + gy * y).unwrap()
    }

    fn close(a: (f64, f64), b: (f64, f64)) -> bool {
        (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12
    }

    #[test]
    fn default_config_matches_file() {
        let c = cfg();
        assert_eq!(c.wheelbase, 0.60);
        assert_eq!(c.wheel_track, 0.79);
        assert_eq!(c.ride_height, 0.09);
        assert!((c.max_tilt - 30f64.to_radians()).abs() < 1e-15);
        assert_eq!(RobotConfig::parse(&c.to_config_text()).unwrap(), c);
    }

    #[test]
    fn config_requires_every_field() {
        let text = DEFAULT_CONFIG.replace("ride_height = 0.09", "");
        assert!(matches!(RobotConfig::parse(&text), Err(Error::Parse(_))));
        let text = format!("{DEFAULT_CONFIG}\nspeed = 1.0\n");
        assert!(RobotConfig::parse(&text).is_err());
        let text = DEFAULT_CONFIG.replace("max_tilt = 30.0", "max_tilt = 95.0");
        assert!(matches!(RobotConfig::parse(&text), Err(Error::InvalidConfig(_))));
        let text = DEFAULT_CONFIG.replace("body_width = 0.84", "body_width = 0.5");
        assert!(matches!(RobotConfig::parse(&text), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn wheels_axis_aligned_at_zero_yaw() {
        let c = cfg();
        let w = wheel_positions(&c, 1.0, 2.0, 0.0);
        assert!(close(w[0], (1.3, 2.395)));
        assert!(close(w[1], (1.3, 1.605)));
        assert!(close(w[2], (0.7, 2.395)));
        assert!(close(w[3], (0.7, 1.605)));
    }

    #[test]
    fn half_turn_reflects_through_center() {
        let c = cfg();
        let a = wheel_positions(&c, 1.0, 2.0, 0.0);
        let b = wheel_positions(&c, 1.0, 2.0, PI);
        for (p, q) in a.iter().zip(&b) {
            assert!(close((2.0 - p.0, 4.0 - p.1), *q));
        }
    }

    #[test]
    fn quarter_turn_puts_wheelbase_on_y() {
        let c = cfg();
        let w = wheel_positions(&c, 0.0, 0.0, FRAC_PI_2);
        assert!(close(w[0], (-0.395, 0.3)));
        assert!(close(w[3], (0.395, -0.3)));
    }

    #[test]
    fn flat_map_pose() {
        let map = ElevationMap::flat(129, DEFAULT_CELL_SIZE, 0.7);
        let (pose, contacts, _) = solve_pose(&cfg(), &map, 0.3, -1.1, 0.4).unwrap();
        assert!((pose.z - 0.7).abs() < 1e-7);
        assert_eq!((pose.roll, pose.pitch, pose.tilt), (0.0, 0.0, 0.0));
        assert!(contacts.points.iter().all(|p| (p[2] - 0.7).abs() < 1e-7));
    }

    #[test]
    fn slope_along_x_is_pitch() {
        let theta = 17f64.to_radians();
        let map = plane_map(theta.tan(), 0.0);
        let (pose, _, _) = solve_pose(&cfg(), &map, 0.0, 0.0, 0.0).unwrap();
        assert!((pose.pitch - theta).abs() < 1e-6);
        assert!(pose.roll.abs() < 1e-6);
        assert!((pose.tilt - theta).abs() < 1e-6);
    }

    #[test]
    fn slope_along_y_is_roll() {
        let theta = 12f64.to_radians();
        let map = plane_map(0.0, theta.tan());
        let (pose, _, _) = solve_pose(&cfg(), &map, 0.5, 0.5, 0.0).unwrap();
        assert!((pose.roll - theta).abs() < 1e-6);
        assert!(pose.pitch.abs() < 1e-6);
    }

    #[test]
    fn wheels_off_the_map_are_out_of_bounds() {
        let map = ElevationMap::flat(129, DEFAULT_CELL_SIZE, 0.0);
        assert!(matches!(
            solve_pose(&cfg(), &map, 3.9, 0.0, 0.0),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn twisted_contacts_leave_a_residual() {
        let flat = WheelContacts { points: [[1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [-1.0, 1.0, 0.0], [-1.0, -1.0, 0.0]] };
        assert_eq!(flat.residual(), 0.0);
        let mut twisted = flat;
        twisted.points[0][2] = 0.2;
        assert!(twisted.residual() > 0.04);
    }

    #[test]
    fn angles_normalize_into_half_open_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI / 2.0) + FRAC_PI_2).abs() < 1e-12);
        assert!((normalize_angle(-0.1) + 0.1).abs() < 1e-15);
    }

    proptest! {
        // Dyadic slopes keep the stored f32 grid exactly planar.
        #[test]
        fn planar_fit_is_exact_and_tilt_is_yaw_invariant(
            kx in -48i32..48,
            ky in -48i32..48,
            x in -2.5f64..2.5,
            y in -2.5f64..2.5,
            yaw in -PI..PI,
        ) {
            let (gx, gy) = (kx as f64 / 64.0, ky as f64 / 64.0);
            let map = plane_map(gx, gy);
            let (pose, contacts, plane) = solve_pose(&cfg(), &map, x, y, yaw).unwrap();
            prop_assert!((plane.gx - gx).abs() < 1e-9 && (plane.gy - gy).abs() < 1e-9);
            prop_assert!((pose.z - (gx * x + gy * y)).abs() < 1e-9);
            prop_assert!(contacts.residual() < 1e-9);
            let inclination = gx.hypot(gy).atan();
            prop_assert!((pose.tilt - inclination).abs() < 1e-9);
            let (other, _, _) = solve_pose(&cfg(), &map, x, y, yaw + 1.234).unwrap();
            prop_assert!((other.tilt - pose.tilt).abs() < 1e-9);
            // Roll and pitch recombine to the same inclination.
            prop_assert!((pose.roll.cos() * pose.pitch.cos() - pose.tilt.cos()).abs() < 1e-9);
        }
    }
}
