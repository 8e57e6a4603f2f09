//! Bilinear sampling with analytic spatial derivatives.
//!
//! A position is in-bounds iff it lies in `[0, W-1] x [0, H-1]`; there is no
//! zero-padding. At the right/bottom lattice edge the cell index is clamped
//! so every in-bounds position owns a full 4-neighbor cell (fields must be
//! at least 2x2).

use ndarray::Array2;

/// The 2x2 interpolation cell of a sub-pixel position.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Cell {
    pub x0: usize,
    pub y0: usize,
    pub fx: f64,
    pub fy: f64,
}

impl Cell {
    /// Returns `None` when the position is out of bounds.
    pub(crate) fn locate(x: f64, y: f64, w: usize, h: usize) -> Option<Cell> {
        debug_assert!(w >= 2 && h >= 2, "bilinear fields must be at least 2x2");
        if !(x >= 0.0 && x <= (w - 1) as f64 && y >= 0.0 && y <= (h - 1) as f64) {
            return None;
        }
        let x0 = (x.floor() as usize).min(w - 2);
        let y0 = (y.floor() as usize).min(h - 2);
        Some(Cell { x0, y0, fx: x - x0 as f64, fy: y - y0 as f64 })
    }

    /// Neighbor weights in the order (x0,y0), (x0+1,y0), (x0,y0+1), (x0+1,y0+1).
    pub(crate) fn weights(&self) -> [f64; 4] {
        let (fx, fy) = (self.fx, self.fy);
        [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy]
    }

    /// d(weight)/dx per neighbor, same order as [`Cell::weights`].
    pub(crate) fn dweights_dx(&self) -> [f64; 4] {
        let fy = self.fy;
        [-(1.0 - fy), 1.0 - fy, -fy, fy]
    }

    /// d(weight)/dy per neighbor.
    pub(crate) fn dweights_dy(&self) -> [f64; 4] {
        let fx = self.fx;
        [-(1.0 - fx), -fx, 1.0 - fx, fx]
    }

    /// Flat row-major indices of the 4 neighbors for an image of width `w`.
    pub(crate) fn indices(&self, w: usize) -> [u32; 4] {
        let base = (self.y0 * w + self.x0) as u32;
        [base, base + 1, base + w as u32, base + w as u32 + 1]
    }

    pub(crate) fn gather(&self, field: &Array2<f32>) -> [f64; 4] {
        [
            field[(self.y0, self.x0)] as f64,
            field[(self.y0, self.x0 + 1)] as f64,
            field[(self.y0 + 1, self.x0)] as f64,
            field[(self.y0 + 1, self.x0 + 1)] as f64,
        ]
    }
}

/// A bilinear sample together with its spatial derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampled {
    pub value: f64,
    /// d(value)/dx, piecewise constant per cell.
    pub dx: f64,
    /// d(value)/dy.
    pub dy: f64,
}

/// Samples `field` at sub-pixel `(x, y)`. Out-of-bounds positions return
/// `None`; they are never silently zero-filled.
pub fn sample_bilinear(field: &Array2<f32>, x: f64, y: f64) -> Option<Sampled> {
    let (h, w) = field.dim();
    let cell = Cell::locate(x, y, w, h)?;
    let v = cell.gather(field);
    let ws = cell.weights();
    let dxs = cell.dweights_dx();
    let dys = cell.dweights_dy();
    let mut value = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for i in 0..4 {
        value += ws[i] * v[i];
        dx += dxs[i] * v[i];
        dy += dys[i] * v[i];
    }
    Some(Sampled { value, dx, dy })
}

/// Samples with replicate-border extension; always defined.
pub fn sample_bilinear_clamped(field: &Array2<f32>, x: f64, y: f64) -> f64 {
    let (h, w) = field.dim();
    let xc = x.clamp(0.0, (w - 1) as f64);
    let yc = y.clamp(0.0, (h - 1) as f64);
    let cell = Cell::locate(xc, yc, w, h).expect("clamped position is in bounds");
    let v = cell.gather(field);
    let ws = cell.weights();
    (0..4).map(|i| ws[i] * v[i]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_interior() {
        let f = Array2::from_elem((6, 7), 3.25f32);
        let s = sample_bilinear(&f, 2.3, 4.7).unwrap();
        assert!((s.value - 3.25).abs() < 1e-12);
        assert!(s.dx.abs() < 1e-12 && s.dy.abs() < 1e-12);
    }

    #[test]
    fn linear_ramp_reproduced_exactly() {
        let f = Array2::from_shape_fn((5, 8), |(_, x)| x as f32);
        let s = sample_bilinear(&f, 3.5, 2.2).unwrap();
        assert!((s.value - 3.5).abs() < 1e-12);
        assert!((s.dx - 1.0).abs() < 1e-12);
        assert!(s.dy.abs() < 1e-12);
    }

    #[test]
    fn out_of_bounds_is_none() {
        let f = Array2::zeros((4, 4));
        assert!(sample_bilinear(&f, -0.01, 1.0).is_none());
        assert!(sample_bilinear(&f, 3.01, 1.0).is_none());
        assert!(sample_bilinear(&f, 1.0, 4.0).is_none());
        assert!(sample_bilinear(&f, 3.0, 3.0).is_some());
    }

    // Finite-difference oracle for the analytic derivative, away from the
    // integer grid lines where the derivative is discontinuous.
    #[test]
    fn derivative_matches_central_differences() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let f = Array2::from_shape_fn((12, 14), |_| rng.gen_range(-1.0..1.0f32));
        let h = 1e-3;
        for _ in 0..200 {
            let x = rng.gen_range(0i32..13) as f64 + rng.gen_range(0.1..0.9);
            let y = rng.gen_range(0i32..11) as f64 + rng.gen_range(0.1..0.9);
            if x > 13.0 - 0.1 || y > 11.0 - 0.1 {
                continue;
            }
            let s = sample_bilinear(&f, x, y).unwrap();
            let fd_x = (sample_bilinear(&f, x + h, y).unwrap().value
                - sample_bilinear(&f, x - h, y).unwrap().value)
                / (2.0 * h);
            let fd_y = (sample_bilinear(&f, x, y + h).unwrap().value
                - sample_bilinear(&f, x, y - h).unwrap().value)
                / (2.0 * h);
            assert!((s.dx - fd_x).abs() < 1e-4, "dx {} vs fd {}", s.dx, fd_x);
            assert!((s.dy - fd_y).abs() < 1e-4, "dy {} vs fd {}", s.dy, fd_y);
        }
    }

    #[test]
    fn clamped_extends_borders() {
        let f = Array2::from_shape_fn((4, 4), |(_, x)| x as f32);
        assert!((sample_bilinear_clamped(&f, -2.0, 1.0) - 0.0).abs() < 1e-12);
        assert!((sample_bilinear_clamped(&f, 9.0, 1.0) - 3.0).abs() < 1e-12);
    }
}
