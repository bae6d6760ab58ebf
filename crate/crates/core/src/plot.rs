//! Probability fans: every trajectory of the action space drawn over the
//! map, colored by its failure probability, written as binary PPM.
//!
//! Bands are `[0, 0.25)` green, `[0.25, 0.5]` yellow and `(0.5, 1]` red.

use std::io::{BufRead, Write};

use crate::actions::ActionSpace;
use crate::error::{Error, Result};
use crate::terrain::ElevationMap;

pub const GREEN: [u8; 3] = [0, 200, 0];
pub const YELLOW: [u8; 3] = [230, 200, 0];
pub const RED: [u8; 3] = [220, 0, 0];

/// Image pixels per map cell.
const SCALE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Green,
    Yellow,
    Red,
}

impl Band {
    pub fn of(p: f64) -> Self {
        if p < 0.25 {
            Band::Green
        } else if p <= 0.5 {
            Band::Yellow
        } else {
            Band::Red
        }
    }

    pub fn color(self) -> [u8; 3] {
        match self {
            Band::Green => GREEN,
            Band::Yellow => YELLOW,
            Band::Red => RED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl Image {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        Self { width, height, pixels: vec![fill; width * height] }
    }

    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        self.pixels[row * self.width + col]
    }

    pub fn write_ppm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.pixels.concat())?;
        out.flush()?;
        Ok(())
    }

    pub fn read_ppm<R: BufRead>(mut input: R) -> Result<Self> {
        let mut tokens = Vec::new();
        while tokens.len() < 4 {
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                return Err(Error::Parse("PPM header truncated".into()));
            }
            let line = line.split('#').next().unwrap_or("");
            tokens.extend(line.split_whitespace().map(str::to_string));
        }
        if tokens[0] != "P6" || tokens[3] != "255" {
            return Err(Error::Parse("only 8-bit binary PPM is supported".into()));
        }
        let dim = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad PPM size {s:?}")));
        let (width, height) = (dim(&tokens[1])?, dim(&tokens[2])?);
        let mut raw = vec![0u8; width * height * 3];
        input.read_exact(&mut raw).map_err(|_| Error::Parse("PPM pixel data truncated".into()))?;
        let pixels = raw.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(Self { width, height, pixels })
    }
}

/// Gray shaded elevation with the same orientation as the map (north up).
fn background(map: &ElevationMap) -> Image {
    let n = map.side_cells();
    let side = (n - 1) * SCALE + 1;
    let (lo, hi) = map.cells().iter().fold((f32::MAX, f32::MIN), |(a, b), &z| (a.min(z), b.max(z)));
    let span = (hi - lo).max(1e-6) as f64;
    let step = map.cell_size() / SCALE as f64;
    let half = map.half_extent();
    let mut img = Image::new(side, side, [0; 3]);
    for row in 0..side {
        for col in 0..side {
            let (x, y) = (col as f64 * step - half, half - row as f64 * step);
            let z = map.elevation_at_local(x, y).unwrap_or(lo as f64);
            let g = (40.0 + 120.0 * (z - lo as f64) / span).round() as u8;
            img.pixels[row * side + col] = [g, g, g];
        }
    }
    img
}

fn draw_polyline(img: &mut Image, points: &[(f64, f64)], half: f64, px: f64, color: [u8; 3]) {
    let mut plot = |x: f64, y: f64| {
        let col = ((x + half) / px).round();
        let row = ((half - y) / px).round();
        if col >= 0.0 && row >= 0.0 && (col as usize) < img.width && (row as usize) < img.height {
            img.pixels[row as usize * img.width + col as usize] = color;
        }
    };
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        let steps = (2.0 * len / px).ceil().max(1.0) as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            plot(a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
        }
    }
    if let [only] = points {
        plot(only.0, only.1);
    }
}

/// Draws one fan. Higher probabilities are drawn last so risky paths stay
/// visible where trajectories overlap.
pub fn render_fan(map: &ElevationMap, space: &ActionSpace, probs: &[f64]) -> Result<Image> {
    if probs.len() != space.len() {
        return Err(Error::DataMismatch(format!("{} probabilities for {} trajectories", probs.len(), space.len())));
    }
    let mut img = background(map);
    let px = map.cell_size() / SCALE as f64;
    let half = map.half_extent();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]).then(a.cmp(&b)));
    for i in order {
        let points: Vec<(f64, f64)> = space.trajectories[i].waypoints.iter().map(|w| (w.x, w.y)).collect();
        draw_polyline(&mut img, &points, half, px, Band::of(probs[i]).color());
    }
    Ok(img)
}

/// Step, obstacle and tilt fans followed by a composite colored by the
/// largest of the three probabilities.
pub fn render_fans(map: &ElevationMap, space: &ActionSpace, probs: &[[f64; 3]]) -> Result<[Image; 4]> {
    let event = |e: usize| probs.iter().map(|p| p[e]).collect::<Vec<_>>();
    let worst: Vec<f64> = probs.iter().map(|p| p[0].max(p[1]).max(p[2])).collect();
    Ok([
        render_fan(map, space, &event(0))?,
        render_fan(map, space, &event(1))?,
        render_fan(map, space, &event(2))?,
        render_fan(map, space, &worst)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::{DEFAULT_CELL_SIZE, DEFAULT_SIDE};

    fn colored(img: &Image) -> Vec<[u8; 3]> {
        img.pixels.iter().copied().filter(|p| !(p[0] == p[1] && p[1] == p[2])).collect()
    }

    #[test]
    fn band_boundaries() {
        assert_eq!(Band::of(0.0), Band::Green);
        assert_eq!(Band::of(0.2499), Band::Green);
        assert_eq!(Band::of(0.25), Band::Yellow);
        assert_eq!(Band::of(0.5), Band::Yellow);
        assert_eq!(Band::of(0.5001), Band::Red);
        assert_eq!(Band::of(1.0), Band::Red);
    }

    #[test]
    fn uniform_probabilities_give_one_color() {
        let map = ElevationMap::from_fn(DEFAULT_SIDE, DEFAULT_CELL_SIZE, (0.0, 0.0), |x, y| 0.1 * (x + y).sin()).unwrap();
        let space = ActionSpace::standard();
        for (p, color) in [(0.0, GREEN), (0.3, YELLOW), (0.25, YELLOW), (1.0, RED)] {
            let img = render_fan(&map, &space, &vec![p; space.len()]).unwrap();
            let c = colored(&img);
            assert!(c.len() > 1000);
            assert!(c.iter().all(|&px| px == color));
        }
    }

    #[test]
    fn fan_starts_at_center_and_covers_all_headings() {
        let map = ElevationMap::flat(DEFAULT_SIDE, DEFAULT_CELL_SIZE, 0.0);
        let space = ActionSpace::standard();
        let img = render_fan(&map, &space, &vec![0.0; space.len()]).unwrap();
        assert_eq!((img.width, img.height), (257, 257));
        assert_eq!(img.get(128, 128), GREEN);
        // Straight ahead (up the image) and straight behind via the 180 degree rotation.
        assert_eq!(img.get(128 - 80, 128), GREEN);
        assert_eq!(img.get(128 + 80, 128), GREEN);
    }

    #[test]
    fn risky_paths_draw_on_top() {
        let map = ElevationMap::flat(DEFAULT_SIDE, DEFAULT_CELL_SIZE, 0.0);
        let space = ActionSpace::standard();
        let mut probs = vec![0.0; space.len()];
        probs[0] = 0.9;
        let img = render_fan(&map, &space, &probs).unwrap();
        assert_eq!(img.get(128, 128), RED);
        assert!(render_fan(&map, &space, &probs[1..]).is_err());
    }

    #[test]
    fn ppm_round_trip() {
        let mut img = Image::new(3, 2, [1, 2, 3]);
        img.pixels[4] = RED;
        let mut buf = Vec::new();
        img.write_ppm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(buf.len(), 11 + 18);
        assert_eq!(Image::read_ppm(&buf[..]).unwrap(), img);
        assert!(Image::read_ppm(&buf[..20]).is_err());
    }
}
