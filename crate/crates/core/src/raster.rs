//! Three-channel image encoding of a (map, trajectory) pair, and the SBT
//! tensor batch format.
//!
//! Pixel `(row, col)` of a 129 x 129 channel covers the point
//! `((col - 64) * 0.0625, (64 - row) * 0.0625)` relative to the robot start,
//! so the robot sits at pixel (64, 64) facing up the image.
//!
//! Channels, in order:
//! 0. elevation relative to the start cell, `0.5 + dz / (2 * h_norm)`, clamped;
//! 1. trajectory centerline, 1 on the path falling to 0 at half the wheel track;
//! 2. wheel traces, 0.5 per pass (front and rear axle), summed and clamped.

use std::io::{Read, Write};

use crate::actions::Trajectory;
use crate::error::{Error, Result};
use crate::robot::RobotConfig;
use crate::sim::FailureLabel;
use crate::terrain::ElevationMap;

pub const RASTER_SIDE: usize = 129;
pub const RASTER_CHANNELS: usize = 3;
pub const RASTER_SPACING: f64 = 0.0625;
pub const SBT_MAGIC: &[u8; 4] = b"SBT1";

const PIXELS: usize = RASTER_SIDE * RASTER_SIDE;
const CENTER: f64 = ((RASTER_SIDE - 1) / 2) as f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterConfig {
    /// Elevation difference mapped to a full half-range of the channel (m).
    pub h_norm: f64,
    /// Decay rate of the shifted exponential profile.
    pub decay: f64,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self { h_norm: 1.0, decay: 3.0 }
    }
}

/// One 129 x 129 channel, row-major, row 0 at the top of the image.
pub type Channel = Vec<f64>;

#[inline]
pub fn pixel_to_local(row: usize, col: usize) -> (f64, f64) {
    ((col as f64 - CENTER) * RASTER_SPACING, (CENTER - row as f64) * RASTER_SPACING)
}

/// Shifted exponential: 1 at `d = 0`, exactly 0 from `d = half_width` on.
#[inline]
pub fn falloff(d: f64, half_width: f64, decay: f64) -> f64 {
    if d >= half_width {
        return 0.0;
    }
    let floor = (-decay).exp();
    (((-decay * d / half_width).exp() - floor) / (1.0 - floor)).clamp(0.0, 1.0)
}

#[inline]
fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (ex, ey) = (b.0 - a.0, b.1 - a.1);
    let (px, py) = (p.0 - a.0, p.1 - a.1);
    let len2 = ex * ex + ey * ey;
    let t = if len2 > 0.0 { ((px * ex + py * ey) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (dx, dy) = (p.0 - (a.0 + t * ex), p.1 - (a.1 + t * ey));
    (dx * dx + dy * dy).sqrt()
}

/// Per-pixel distance to a polyline, exact within `radius` and `+inf` beyond
/// the padded bounding box of every segment.
fn polyline_distance(points: &[(f64, f64)], radius: f64) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; PIXELS];
    let last = (RASTER_SIDE - 1) as f64;
    let pad = radius + RASTER_SPACING;
    let segments: Vec<((f64, f64), (f64, f64))> = if points.len() == 1 {
        vec![(points[0], points[0])]
    } else {
        points.windows(2).map(|w| (w[0], w[1])).collect()
    };
    for (a, b) in segments {
        let (x0, x1) = (a.0.min(b.0) - pad, a.0.max(b.0) + pad);
        let (y0, y1) = (a.1.min(b.1) - pad, a.1.max(b.1) + pad);
        let col_lo = (x0 / RASTER_SPACING + CENTER).ceil().clamp(0.0, last) as usize;
        let col_hi = (x1 / RASTER_SPACING + CENTER).floor().clamp(0.0, last) as usize;
        let row_lo = (CENTER - y1 / RASTER_SPACING).ceil().clamp(0.0, last) as usize;
        let row_hi = (CENTER - y0 / RASTER_SPACING).floor().clamp(0.0, last) as usize;
        if x1 < -CENTER * RASTER_SPACING || x0 > CENTER * RASTER_SPACING {
            continue;
        }
        if y1 < -CENTER * RASTER_SPACING || y0 > CENTER * RASTER_SPACING {
            continue;
        }
        for row in row_lo..=row_hi {
            for col in col_lo..=col_hi {
                let d = segment_distance(pixel_to_local(row, col), a, b);
                let slot = &mut dist[row * RASTER_SIDE + col];
                if d < *slot {
                    *slot = d;
                }
            }
        }
    }
    dist
}

/// Elevation channel. Maps that are not 129 nodes at 0.0625 m are sampled
/// bilinearly; pixels outside the map read as the center elevation.
pub fn raster_elevation(map: &ElevationMap, rc: &RasterConfig) -> Channel {
    let z_center = map.elevation_at_local(0.0, 0.0).unwrap_or(0.0);
    let native = map.side_cells() == RASTER_SIDE && map.cell_size() == RASTER_SPACING;
    let mut out = vec![0.0; PIXELS];
    for row in 0..RASTER_SIDE {
        for col in 0..RASTER_SIDE {
            let z = if native {
                map.get(RASTER_SIDE - 1 - row, col) as f64
            } else {
                let (x, y) = pixel_to_local(row, col);
                map.elevation_at_local(x, y).unwrap_or(z_center)
            };
            out[row * RASTER_SIDE + col] = (0.5 + (z - z_center) / (2.0 * rc.h_norm)).clamp(0.0, 1.0);
        }
    }
    out
}

/// Trajectory centerline channel.
pub fn raster_trajectory(cfg: &RobotConfig, traj: &Trajectory, rc: &RasterConfig) -> Channel {
    let half = cfg.wheel_track / 2.0;
    let points: Vec<(f64, f64)> = traj.waypoints.iter().map(|w| (w.x, w.y)).collect();
    polyline_distance(&points, half)
        .into_iter()
        .map(|d| falloff(d, half, rc.decay))
        .collect()
}

/// Wheel trace channel.
pub fn raster_wheel_trace(cfg: &RobotConfig, traj: &Trajectory, rc: &RasterConfig) -> Channel {
    let half = cfg.wheel_width / 2.0;
    let wheels: Vec<[(f64, f64); 4]> = traj.waypoints.iter().map(|w| w.wheel_positions(cfg)).collect();
    let field = |wheel: usize| -> Vec<f64> {
        let path: Vec<(f64, f64)> = wheels.iter().map(|w| w[wheel]).collect();
        polyline_distance(&path, half).into_iter().map(|d| falloff(d, half, rc.decay)).collect()
    };
    let (fl, fr, rl, rr) = (field(0), field(1), field(2), field(3));
    (0..PIXELS)
        .map(|i| {
            let front = 0.5 * fl[i].max(fr[i]);
            let rear = 0.5 * rl[i].max(rr[i]);
            (front + rear).min(1.0)
        })
        .collect()
}

/// One exported sample: three channels plus its identity and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTensor {
    pub map_id: u32,
    pub traj_id: u32,
    pub label: FailureLabel,
    /// Channel-major `3 x 129 x 129` values in `[0, 1]`.
    pub data: Vec<f32>,
}

impl SampleTensor {
    pub fn channel(&self, c: usize) -> &[f32] {
        &self.data[c * PIXELS..(c + 1) * PIXELS]
    }

    #[inline]
    pub fn at(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.data[channel * PIXELS + row * RASTER_SIDE + col]
    }
}

/// Stacks the three channels for one (map, trajectory) pair.
pub fn rasterize(
    cfg: &RobotConfig,
    map: &ElevationMap,
    traj: &Trajectory,
    rc: &RasterConfig,
    map_id: u32,
    traj_id: u32,
    label: FailureLabel,
) -> SampleTensor {
    let mut data = Vec::with_capacity(RASTER_CHANNELS * PIXELS);
    for ch in [raster_elevation(map, rc), raster_trajectory(cfg, traj, rc), raster_wheel_trace(cfg, traj, rc)] {
        data.extend(ch.into_iter().map(|v| v as f32));
    }
    SampleTensor { map_id, traj_id, label, data }
}

const SBT_HEADER_LEN: usize = 4 + 4 + 2 + 2;
const SBT_RECORD_LEN: usize = 4 + 4 + 4 + RASTER_CHANNELS * PIXELS * 4;

/// Streaming SBT writer. The sample count is fixed up front.
pub struct SbtWriter<W: Write> {
    out: W,
    expected: u32,
    written: u32,
    buf: Vec<u8>,
}

impl<W: Write> SbtWriter<W> {
    pub fn new(mut out: W, sample_count: u32) -> Result<Self> {
        let mut header = Vec::with_capacity(SBT_HEADER_LEN);
        header.extend_from_slice(SBT_MAGIC);
        header.extend_from_slice(&sample_count.to_le_bytes());
        header.extend_from_slice(&(RASTER_SIDE as u16).to_le_bytes());
        header.extend_from_slice(&(RASTER_CHANNELS as u16).to_le_bytes());
        out.write_all(&header)?;
        Ok(Self { out, expected: sample_count, written: 0, buf: Vec::with_capacity(SBT_RECORD_LEN) })
    }

    pub fn write(&mut self, s: &SampleTensor) -> Result<()> {
        if self.written == self.expected {
            return Err(Error::DataMismatch(format!("SBT shard already holds {} samples", self.expected)));
        }
        if s.data.len() != RASTER_CHANNELS * PIXELS {
            return Err(Error::DataMismatch(format!("sample holds {} values", s.data.len())));
        }
        self.buf.clear();
        self.buf.extend_from_slice(&s.map_id.to_le_bytes());
        self.buf.extend_from_slice(&s.traj_id.to_le_bytes());
        self.buf.extend_from_slice(&[s.label.step as u8, s.label.obstacle as u8, s.label.tilt as u8, 0]);
        for v in &s.data {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
        self.out.write_all(&self.buf)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.expected {
            return Err(Error::DataMismatch(format!(
                "SBT header promises {} samples, {} written",
                self.expected, self.written
            )));
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_sbt<W: Write>(out: W, samples: &[SampleTensor]) -> Result<W> {
    let count = u32::try_from(samples.len()).map_err(|_| Error::InvalidConfig("too many samples".into()))?;
    let mut w = SbtWriter::new(out, count)?;
    for s in samples {
        w.write(s)?;
    }
    w.finish()
}

pub fn read_sbt<R: Read>(mut input: R) -> Result<Vec<SampleTensor>> {
    let mut header = [0u8; SBT_HEADER_LEN];
    input
        .read_exact(&mut header)
        .map_err(|_| Error::Parse("SBT header truncated".into()))?;
    if &header[..4] != SBT_MAGIC {
        return Err(Error::Parse("missing SBT1 magic".into()));
    }
    let count = u32::from_le_bytes(header[4..8].try_into().unwrap());
    let side = u16::from_le_bytes([header[8], header[9]]) as usize;
    let channels = u16::from_le_bytes([header[10], header[11]]) as usize;
    if side != RASTER_SIDE || channels != RASTER_CHANNELS {
        return Err(Error::Parse(format!("unsupported SBT shape {side}x{side}x{channels}")));
    }
    let mut samples = Vec::with_capacity(count.min(4096) as usize);
    let mut rec = vec![0u8; SBT_RECORD_LEN];
    for i in 0..count {
        input
            .read_exact(&mut rec)
            .map_err(|_| Error::Parse(format!("SBT record {i} of {count} truncated")))?;
        let bit = |b: u8| match b {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(Error::Parse(format!("SBT record {i}: bad label byte {b}"))),
        };
        samples.push(SampleTensor {
            map_id: u32::from_le_bytes(rec[0..4].try_into().unwrap()),
            traj_id: u32::from_le_bytes(rec[4..8].try_into().unwrap()),
            label: FailureLabel { step: bit(rec[8])?, obstacle: bit(rec[9])?, tilt: bit(rec[10])? },
            data: rec[12..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect(),
        });
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Parse("trailing bytes after SBT records".into()));
    }
    Ok(samples)
}
