use crate::error::{Error, Result};

/// Default number of grid points per side.
pub const DEFAULT_SIDE: usize = 129;
/// Default grid spacing: an 8 m square sampled at 129 points per side.
pub const DEFAULT_CELL_SIZE: f64 = 0.0625;

/// Square elevation grid with world-frame geometry.
///
/// Cells are grid nodes stored row-major. Row 0 lies at the minimum world
/// `y`, column 0 at the minimum world `x`, so node `(row, col)` sits at
/// `origin + (col * cell - half, row * cell - half)` where `half` is half the
/// extent.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationMap {
    cells: Vec<f32>,
    side: usize,
    cell_size: f64,
    origin: (f64, f64),
}

impl ElevationMap {
    pub fn new(side: usize, cell_size: f64, origin: (f64, f64), cells: Vec<f32>) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidConfig(format!("map side must be at least 2, got {side}")));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::InvalidConfig(format!("cell size must be positive, got {cell_size}")));
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(Error::InvalidConfig("map origin must be finite".into()));
        }
        if cells.len() != side * side {
            return Err(Error::NonSquareGrid { rows: side, cols: cells.len() / side.max(1) });
        }
        if let Some(i) = cells.iter().position(|z| !z.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite elevation at cell {i}")));
        }
        Ok(Self { cells, side, cell_size, origin })
    }

    /// Constant-elevation map centered on the world origin.
    pub fn flat(side: usize, cell_size: f64, elevation: f32) -> Self {
        Self::new(side, cell_size, (0.0, 0.0), vec![elevation; side * side]).expect("valid flat map")
    }

    /// Builds a map centered on `origin` by evaluating `f(x, y)` at every node.
    pub fn from_fn(
        side: usize,
        cell_size: f64,
        origin: (f64, f64),
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Result<Self> {
        let half = (side as f64 - 1.0) * cell_size / 2.0;
        let mut cells = Vec::with_capacity(side * side);
        for row in 0..side {
            let y = origin.1 - half + row as f64 * cell_size;
            for col in 0..side {
                let x = origin.0 - half + col as f64 * cell_size;
                cells.push(f(x, y) as f32);
            }
        }
        Self::new(side, cell_size, origin, cells)
    }

    pub fn side_cells(&self) -> usize {
        self.side
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn cells(&self) -> &[f32] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [f32] {
        &mut self.cells
    }

    /// Side length in meters, `(side - 1) * cell_size`.
    pub fn extent(&self) -> f64 {
        (self.side as f64 - 1.0) * self.cell_size
    }

    pub fn half_extent(&self) -> f64 {
        self.extent() / 2.0
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.cells[row * self.side + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, z: f32) {
        self.cells[row * self.side + col] = z;
    }

    /// Node position relative to the map origin.
    #[inline]
    pub fn node_local(&self, row: usize, col: usize) -> (f64, f64) {
        let half = self.half_extent();
        (col as f64 * self.cell_size - half, row as f64 * self.cell_size - half)
    }

    /// Node position in world coordinates.
    pub fn node_world(&self, row: usize, col: usize) -> (f64, f64) {
        let (lx, ly) = self.node_local(row, col);
        (lx + self.origin.0, ly + self.origin.1)
    }

    /// Bilinear elevation at a world point.
    pub fn elevation_at(&self, x: f64, y: f64) -> Result<f64> {
        self.elevation_at_local(x - self.origin.0, y - self.origin.1)
    }

    /// Bilinear elevation at a point given relative to the map origin.
    #[inline]
    pub fn elevation_at_local(&self, lx: f64, ly: f64) -> Result<f64> {
        let half = self.half_extent();
        if !(lx >= -half && lx <= half && ly >= -half && ly <= half) {
            return Err(Error::OutOfBounds { x: lx + self.origin.0, y: ly + self.origin.1 });
        }
        let fx = (lx + half) / self.cell_size;
        let fy = (ly + half) / self.cell_size;
        let last = self.side - 2;
        let c0 = (fx.floor() as usize).min(last);
        let r0 = (fy.floor() as usize).min(last);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;

        let base = r0 * self.side + c0;
        let z00 = self.cells[base] as f64;
        let z01 = self.cells[base + 1] as f64;
        let z10 = self.cells[base + self.side] as f64;
        let z11 = self.cells[base + self.side + 1] as f64;

        // Exact node hits return the stored value untouched.
        if tx == 0.0 && ty == 0.0 {
            return Ok(z00);
        }
        let bottom = z00 + (z01 - z00) * tx;
        let top = z10 + (z11 - z10) * tx;
        Ok(bottom + (top - bottom) * ty)
    }

    /// Same grid with `offset` added to every cell.
    pub fn offset_by(&self, offset: f32) -> Self {
        let mut out = self.clone();
        out.cells.iter_mut().for_each(|z| *z += offset);
        out
    }

    /// Same cells, moved to a new world origin.
    pub fn with_origin(mut self, origin: (f64, f64)) -> Self {
        self.origin = origin;
        self
    }

    /// Grid rotated counter-clockwise about its center by `quarter_turns * 90°`.
    pub fn rotated_quarter(&self, quarter_turns: u32) -> Self {
        let n = self.side;
        let mut out = self.clone();
        for _ in 0..quarter_turns % 4 {
            let src = out.cells.clone();
            for row in 0..n {
                for col in 0..n {
                    // World point p maps to R(90°)p; the new node (row, col)
                    // takes the value of the source node at R(-90°)(col, row).
                    out.cells[row * n + col] = src[(n - 1 - col) * n + row];
                }
            }
        }
        out
    }

    /// Bilinear resample onto a `side x side` grid spanning the same extent.
    pub fn resampled(&self, side: usize) -> Result<Self> {
        if side == self.side {
            return Ok(self.clone());
        }
        let extent = self.extent();
        let cell = extent / (side as f64 - 1.0);
        let half = extent / 2.0;
        let mut cells = Vec::with_capacity(side * side);
        for row in 0..side {
            // Clamp guards against the last node landing a rounding error
            // outside the source extent.
            let ly = (row as f64 * cell - half).clamp(-half, half);
            for col in 0..side {
                let lx = (col as f64 * cell - half).clamp(-half, half);
                cells.push(self.elevation_at_local(lx, ly)? as f32);
            }
        }
        Self::new(side, cell, self.origin, cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> ElevationMap {
        ElevationMap::from_fn(5, 1.0, (0.0, 0.0), |x, y| 10.0 * x + y).unwrap()
    }

    #[test]
    fn node_queries_return_stored_values() {
        let m = ramp();
        for row in 0..5 {
            for col in 0..5 {
                let (x, y) = m.node_world(row, col);
                assert_eq!(m.elevation_at(x, y).unwrap(), m.get(row, col) as f64);
            }
        }
    }

    #[test]
    fn midpoint_between_nodes_is_the_average() {
        let mut m = ElevationMap::flat(3, 1.0, 0.0);
        m.set(1, 1, 1.0);
        assert_eq!(m.elevation_at(-0.5, 0.0).unwrap(), 0.5);
        assert_eq!(m.elevation_at(0.0, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn outside_the_extent_is_rejected() {
        let m = ElevationMap::flat(129, DEFAULT_CELL_SIZE, 0.0);
        assert_eq!(m.extent(), 8.0);
        assert!(m.elevation_at(4.0, -4.0).is_ok());
        assert!(matches!(m.elevation_at(4.0001, 0.0), Err(Error::OutOfBounds { .. })));
        assert!(matches!(m.elevation_at(0.0, -4.5), Err(Error::OutOfBounds { .. })));
        assert!(m.elevation_at(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn origin_shifts_the_lookup_frame() {
        let m = ramp().with_origin((100.0, -3.0));
        assert_eq!(m.elevation_at(101.0, -3.0).unwrap(), 10.0);
        assert!(m.elevation_at(1.0, 0.0).is_err());
    }

    #[test]
    fn bilinear_is_exact_on_planes() {
        let m = ramp();
        for &(x, y) in &[(0.3, 0.7), (-1.9, 1.25), (2.0, -2.0), (0.01, -0.99)] {
            assert!((m.elevation_at(x, y).unwrap() - (10.0 * x + y)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(
            ElevationMap::new(3, 1.0, (0.0, 0.0), vec![0.0; 8]),
            Err(Error::NonSquareGrid { .. })
        ));
        assert!(ElevationMap::new(2, 1.0, (0.0, 0.0), vec![0.0, 1.0, f32::NAN, 0.0]).is_err());
        assert!(ElevationMap::new(2, 0.0, (0.0, 0.0), vec![0.0; 4]).is_err());
    }

    #[test]
    fn quarter_turn_is_counter_clockwise() {
        // z = x rotated by +90° becomes z = y.
        let m = ElevationMap::from_fn(5, 1.0, (0.0, 0.0), |x, _| x).unwrap();
        let r = m.rotated_quarter(1);
        for row in 0..5 {
            for col in 0..5 {
                let (_, y) = r.node_local(row, col);
                assert_eq!(r.get(row, col) as f64, y);
            }
        }
    }

    #[test]
    fn quarter_turns_compose() {
        let m = ElevationMap::from_fn(7, 0.5, (0.0, 0.0), |x, y| x * x - 0.3 * y + x * y).unwrap();
        assert_eq!(m.rotated_quarter(1).rotated_quarter(1), m.rotated_quarter(2));
        assert_eq!(m.rotated_quarter(4), m);
        assert_eq!(m.rotated_quarter(3).rotated_quarter(1), m);
    }
}
