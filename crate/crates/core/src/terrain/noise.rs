//! Two-dimensional OpenSimplex gradient noise.
//!
//! This is the original (2014) lattice scheme with the stretch/squish
//! constants of the equilateral triangle lattice and an 8-direction gradient
//! set. The permutation table is built from a 64-bit seed with the same LCG
//! shuffle as the widely used Python `opensimplex` package, so for a given
//! seed the field matches that implementation to floating-point rounding.

const STRETCH_2D: f64 = -0.211324865405187; // (1/sqrt(3) - 1) / 2
const SQUISH_2D: f64 = 0.366025403784439; // (sqrt(3) - 1) / 2
const NORM_2D: f64 = 47.0;

const LCG_MUL: i64 = 6364136223846793005;
const LCG_INC: i64 = 1442695040888963407;

// Unit-octagon directions, stored as (gx, gy) pairs.
const GRADIENTS_2D: [f64; 16] = [
    5.0, 2.0, 2.0, 5.0, //
    -5.0, 2.0, -2.0, 5.0, //
    5.0, -2.0, 2.0, -5.0, //
    -5.0, -2.0, -2.0, -5.0,
];

/// Seeded OpenSimplex field. Cheap to clone; immutable after construction.
#[derive(Clone)]
pub struct NoiseSource {
    seed: i64,
    perm: [u8; 256],
}

impl std::fmt::Debug for NoiseSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NoiseSource").field("seed", &self.seed).finish()
    }
}

impl NoiseSource {
    pub fn new(seed: i64) -> Self {
        let mut perm = [0u8; 256];
        let mut source: [u8; 256] = std::array::from_fn(|i| i as u8);
        let mut state = seed;
        for _ in 0..3 {
            state = state.wrapping_mul(LCG_MUL).wrapping_add(LCG_INC);
        }
        for i in (0..256usize).rev() {
            state = state.wrapping_mul(LCG_MUL).wrapping_add(LCG_INC);
            // Floored modulo on the unwrapped sum, as in the Python reference.
            let r = (state as i128 + 31).rem_euclid(i as i128 + 1) as usize;
            perm[i] = source[r];
            source[r] = source[i];
        }
        Self { seed, perm }
    }

    pub fn seed(&self) -> i64 {
        self.seed
    }

    #[inline]
    fn extrapolate(&self, xsb: i64, ysb: i64, dx: f64, dy: f64) -> f64 {
        let inner = self.perm[(xsb & 0xFF) as usize] as i64;
        let index = (self.perm[((inner + ysb) & 0xFF) as usize] & 0x0E) as usize;
        GRADIENTS_2D[index] * dx + GRADIENTS_2D[index + 1] * dy
    }

    /// Noise value at `(x, y)`, always within `[-1, 1]`.
    pub fn noise2d(&self, x: f64, y: f64) -> f64 {
        // Skew onto the square lattice.
        let stretch = (x + y) * STRETCH_2D;
        let xs = x + stretch;
        let ys = y + stretch;

        let mut xsb = xs.floor() as i64;
        let mut ysb = ys.floor() as i64;

        let squish = (xsb + ysb) as f64 * SQUISH_2D;
        let xb = xsb as f64 + squish;
        let yb = ysb as f64 + squish;

        let xins = xs - xsb as f64;
        let yins = ys - ysb as f64;
        let in_sum = xins + yins;

        let mut dx0 = x - xb;
        let mut dy0 = y - yb;

        let mut value = 0.0;

        // (1, 0)
        let dx1 = dx0 - 1.0 - SQUISH_2D;
        let dy1 = dy0 - SQUISH_2D;
        let attn1 = 2.0 - dx1 * dx1 - dy1 * dy1;
        if attn1 > 0.0 {
            let a = attn1 * attn1;
            value += a * a * self.extrapolate(xsb + 1, ysb, dx1, dy1);
        }

        // (0, 1)
        let dx2 = dx0 - SQUISH_2D;
        let dy2 = dy0 - 1.0 - SQUISH_2D;
        let attn2 = 2.0 - dx2 * dx2 - dy2 * dy2;
        if attn2 > 0.0 {
            let a = attn2 * attn2;
            value += a * a * self.extrapolate(xsb, ysb + 1, dx2, dy2);
        }

        let (xsv_ext, ysv_ext, dx_ext, dy_ext);
        if in_sum <= 1.0 {
            // Lower triangle, anchored at (0, 0).
            let zins = 1.0 - in_sum;
            if zins > xins || zins > yins {
                if xins > yins {
                    xsv_ext = xsb + 1;
                    ysv_ext = ysb - 1;
                    dx_ext = dx0 - 1.0;
                    dy_ext = dy0 + 1.0;
                } else {
                    xsv_ext = xsb - 1;
                    ysv_ext = ysb + 1;
                    dx_ext = dx0 + 1.0;
                    dy_ext = dy0 - 1.0;
                }
            } else {
                xsv_ext = xsb + 1;
                ysv_ext = ysb + 1;
                dx_ext = dx0 - 1.0 - 2.0 * SQUISH_2D;
                dy_ext = dy0 - 1.0 - 2.0 * SQUISH_2D;
            }
        } else {
            // Upper triangle, anchored at (1, 1).
            let zins = 2.0 - in_sum;
            if zins < xins || zins < yins {
                if xins > yins {
                    xsv_ext = xsb + 2;
                    ysv_ext = ysb;
                    dx_ext = dx0 - 2.0 - 2.0 * SQUISH_2D;
                    dy_ext = dy0 - 2.0 * SQUISH_2D;
                } else {
                    xsv_ext = xsb;
                    ysv_ext = ysb + 2;
                    dx_ext = dx0 - 2.0 * SQUISH_2D;
                    dy_ext = dy0 - 2.0 - 2.0 * SQUISH_2D;
                }
            } else {
                xsv_ext = xsb;
                ysv_ext = ysb;
                dx_ext = dx0;
                dy_ext = dy0;
            }
            xsb += 1;
            ysb += 1;
            dx0 = dx0 - 1.0 - 2.0 * SQUISH_2D;
            dy0 = dy0 - 1.0 - 2.0 * SQUISH_2D;
        }

        // (0, 0) or (1, 1)
        let attn0 = 2.0 - dx0 * dx0 - dy0 * dy0;
        if attn0 > 0.0 {
            let a = attn0 * attn0;
            value += a * a * self.extrapolate(xsb, ysb, dx0, dy0);
        }

        let attn_ext = 2.0 - dx_ext * dx_ext - dy_ext * dy_ext;
        if attn_ext > 0.0 {
            let a = attn_ext * attn_ext;
            value += a * a * self.extrapolate(xsv_ext, ysv_ext, dx_ext, dy_ext);
        }

        (value / NORM_2D).clamp(-1.0, 1.0)
    }
}
