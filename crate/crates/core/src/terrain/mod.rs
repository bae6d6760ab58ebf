//! Procedural terrain: OpenSimplex noise, mountain/plain blending and the
//! elevation grid the rest of the toolkit works on.

mod io;
mod map;
mod noise;
mod presets;

pub use io::{default_text_extent, read_emap, read_text_grid, write_emap, write_text_grid, EMAP_MAGIC, EMAP_VERSION};
pub use map::{ElevationMap, DEFAULT_CELL_SIZE, DEFAULT_SIDE};
pub use noise::NoiseSource;
pub use presets::{load_presets, PresetLibrary, TerrainPreset, PRESET_DIR_ENV};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frequency / scale / offset applied to one noise field:
/// `noise2d(x * frequency, y * frequency) * amplitude + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseLayer {
    pub frequency: f64,
    pub amplitude: f64,
    pub offset: f64,
}

impl NoiseLayer {
    #[inline]
    fn sample(&self, src: &NoiseSource, x: f64, y: f64) -> f64 {
        src.noise2d(x * self.frequency, y * self.frequency) * self.amplitude + self.offset
    }

    /// Constant field at `offset`.
    pub fn constant(offset: f64) -> Self {
        Self { frequency: 0.0, amplitude: 0.0, offset }
    }
}

/// What to do when the plain field's base goes negative before smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasePolicy {
    /// Clamp the base to zero before raising it to the smoothing exponent.
    #[default]
    Clamp,
    /// Fail with [`Error::NegativeBase`].
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSeeds {
    pub mountain: i64,
    pub plain: i64,
    pub blend: i64,
}

impl FieldSeeds {
    /// Independent seeds `master + 0/1/2`, or one shared seed for all fields.
    pub fn from_master(master: i64, shared: bool) -> Self {
        if shared {
            Self { mountain: master, plain: master, blend: master }
        } else {
            Self {
                mountain: master,
                plain: master.wrapping_add(1),
                blend: master.wrapping_add(2),
            }
        }
    }
}

/// Full parameter set of the mountain/plain terrain composition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerrainParams {
    /// Obstacle field `m`.
    pub mountain: NoiseLayer,
    /// Plain field base, raised to `smoothing` to give `p`.
    pub plain: NoiseLayer,
    /// Exponent applied to the plain base, in `[0, 1]`.
    pub smoothing: f64,
    /// Field fed through [`intrp`] to give the plain weight `w`.
    pub blend: NoiseLayer,
    /// Blend values above this select the plain field entirely.
    pub upper: f64,
    /// Blend values below this select the mountain field entirely.
    pub lower: f64,
    pub seeds: FieldSeeds,
    pub base_policy: BasePolicy,
}

impl TerrainParams {
    pub fn validate(&self) -> Result<()> {
        let layers = [("mountain", &self.mountain), ("plain", &self.plain), ("blend", &self.blend)];
        for (name, layer) in layers {
            if !(layer.frequency.is_finite() && layer.amplitude.is_finite() && layer.offset.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} layer has non-finite values")));
            }
            if layer.amplitude < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} amplitude must be nonnegative, got {}",
                    layer.amplitude
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.smoothing) {
            return Err(Error::InvalidParams(format!(
                "smoothing exponent must lie in [0, 1], got {}",
                self.smoothing
            )));
        }
        if !(self.lower < self.upper) {
            return Err(Error::InvalidParams(format!(
                "blend thresholds need lower < upper, got lower={} upper={}",
                self.lower, self.upper
            )));
        }
        Ok(())
    }

    /// Upper bound on `|Z|` implied by the layer amplitudes and offsets.
    pub fn elevation_bound(&self) -> f64 {
        let m = self.mountain.amplitude + self.mountain.offset.abs();
        let top = (self.plain.amplitude + self.plain.offset).max(0.0);
        let p = if self.smoothing == 0.0 { 1.0 } else { top.powf(self.smoothing) };
        m.max(p)
    }

    fn sources(&self) -> [NoiseSource; 3] {
        [
            NoiseSource::new(self.seeds.mountain),
            NoiseSource::new(self.seeds.plain),
            NoiseSource::new(self.seeds.blend),
        ]
    }
}

/// Piecewise-linear blend weight: 1 above `upper`, 0 below `lower`, linear
/// in between.
#[inline]
pub fn intrp(v: f64, upper: f64, lower: f64) -> f64 {
    if v > upper {
        1.0
    } else if v < lower {
        0.0
    } else {
        (v - lower) / (upper - lower)
    }
}

/// Intermediate fields at one point; `z = p * w + m * (1 - w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerrainSample {
    pub mountain: f64,
    pub plain: f64,
    pub weight: f64,
    pub z: f64,
}

fn sample_point(params: &TerrainParams, src: &[NoiseSource; 3], x: f64, y: f64) -> Result<TerrainSample> {
    let mountain = params.mountain.sample(&src[0], x, y);
    let mut base = params.plain.sample(&src[1], x, y);
    if base < 0.0 {
        match params.base_policy {
            BasePolicy::Clamp => base = 0.0,
            BasePolicy::Reject => return Err(Error::NegativeBase { base, x, y }),
        }
    }
    let plain = base.powf(params.smoothing);
    let weight = intrp(params.blend.sample(&src[2], x, y), params.upper, params.lower);
    let z = plain * weight + mountain * (1.0 - weight);
    Ok(TerrainSample { mountain, plain, weight, z })
}

/// Evaluates the composition at a single world point.
pub fn sample_terrain(params: &TerrainParams, x: f64, y: f64) -> Result<TerrainSample> {
    params.validate()?;
    sample_point(params, &params.sources(), x, y)
}

/// Generates a `side_cells`-square map centered on the world origin. Noise is
/// evaluated at node world coordinates, so `cell_size` changes resolution but
/// not terrain shape.
pub fn generate_map(params: &TerrainParams, side_cells: usize, cell_size: f64) -> Result<ElevationMap> {
    params.validate()?;
    if side_cells < 2 || !(cell_size > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "map needs side >= 2 and positive cell size, got {side_cells} / {cell_size}"
        )));
    }
    let sources = params.sources();
    let half = (side_cells as f64 - 1.0) * cell_size / 2.0;
    let mut cells = vec![0f32; side_cells * side_cells];
    cells
        .par_chunks_mut(side_cells)
        .enumerate()
        .try_for_each(|(row, out)| -> Result<()> {
            let y = row as f64 * cell_size - half;
            for (col, z) in out.iter_mut().enumerate() {
                let x = col as f64 * cell_size - half;
                *z = sample_point(params, &sources, x, y)?.z as f32;
            }
            Ok(())
        })?;
    ElevationMap::new(side_cells, cell_size, (0.0, 0.0), cells)
}
