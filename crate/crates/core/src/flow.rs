//! Dense optical-flow fields parameterized by a coarse grid.
//!
//! Flow values are pixel displacements over the owning slice's duration. The
//! dense field is the bilinear upsampling of a coarse parameter grid whose
//! cell centers sit at the centers of `stride x stride` pixel blocks; with
//! stride 1 the upsampling is the identity.

use ndarray::Array2;

/// Coarse flow parameter grid (`ceil(H/s) x ceil(W/s)` per component).
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseFlow {
    pub u: Array2<f32>,
    pub v: Array2<f32>,
    pub stride: usize,
}

impl CoarseFlow {
    pub fn zeros(height: usize, width: usize, stride: usize) -> Self {
        assert!(stride >= 1, "stride must be >= 1");
        let ch = height.div_ceil(stride);
        let cw = width.div_ceil(stride);
        Self { u: Array2::zeros((ch, cw)), v: Array2::zeros((ch, cw)), stride }
    }

    pub fn constant(height: usize, width: usize, stride: usize, (fu, fv): (f32, f32)) -> Self {
        let mut c = Self::zeros(height, width, stride);
        c.u.fill(fu);
        c.v.fill(fv);
        c
    }

    pub fn dims(&self) -> (usize, usize) {
        self.u.dim()
    }
}

/// Interpolation geometry shared by the upsampling and its transpose.
#[derive(Debug, Clone, Copy)]
pub(crate) struct UpsamplePlan {
    stride: usize,
    ch: usize,
    cw: usize,
}

impl UpsamplePlan {
    pub(crate) fn new(stride: usize, ch: usize, cw: usize) -> Self {
        Self { stride, ch, cw }
    }

    /// Coarse neighbors and weights of dense pixel `(x, y)`, replicate-clamped
    /// at the borders. Weights sum to 1.
    pub(crate) fn weights(&self, y: usize, x: usize) -> [(usize, usize, f64); 4] {
        let center = (self.stride as f64 - 1.0) / 2.0;
        let gx = ((x as f64 - center) / self.stride as f64).clamp(0.0, (self.cw - 1) as f64);
        let gy = ((y as f64 - center) / self.stride as f64).clamp(0.0, (self.ch - 1) as f64);
        let x0 = (gx.floor() as usize).min(self.cw.saturating_sub(2));
        let y0 = (gy.floor() as usize).min(self.ch.saturating_sub(2));
        let x1 = (x0 + 1).min(self.cw - 1);
        let y1 = (y0 + 1).min(self.ch - 1);
        let fx = gx - x0 as f64;
        let fy = gy - y0 as f64;
        [
            (y0, x0, (1.0 - fx) * (1.0 - fy)),
            (y0, x1, fx * (1.0 - fy)),
            (y1, x0, (1.0 - fx) * fy),
            (y1, x1, fx * fy),
        ]
    }
}

/// Dense 2-channel displacement field, optionally backed by coarse parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub u: Array2<f32>,
    pub v: Array2<f32>,
    coarse: Option<CoarseFlow>,
}

impl FlowField {
    /// Bilinearly upsamples a coarse parameter grid to `height x width`.
    pub fn from_coarse(coarse: CoarseFlow, height: usize, width: usize) -> Self {
        let mut f = Self { u: Array2::zeros((height, width)), v: Array2::zeros((height, width)), coarse: Some(coarse) };
        f.sync_dense();
        f
    }

    /// Wraps an existing dense field (no coarse backing).
    pub fn from_dense(u: Array2<f32>, v: Array2<f32>) -> Self {
        assert_eq!(u.dim(), v.dim());
        Self { u, v, coarse: None }
    }

    pub fn constant(height: usize, width: usize, (fu, fv): (f32, f32)) -> Self {
        Self {
            u: Array2::from_elem((height, width), fu),
            v: Array2::from_elem((height, width), fv),
            coarse: None,
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::constant(height, width, (0.0, 0.0))
    }

    pub fn width(&self) -> usize {
        self.u.dim().1
    }

    pub fn height(&self) -> usize {
        self.u.dim().0
    }

    /// Dense flow at an integer pixel.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        (self.u[(y, x)] as f64, self.v[(y, x)] as f64)
    }

    pub fn coarse(&self) -> Option<&CoarseFlow> {
        self.coarse.as_ref()
    }

    pub fn coarse_mut(&mut self) -> Option<&mut CoarseFlow> {
        self.coarse.as_mut()
    }

    /// Recomputes the dense field from the coarse parameters. No-op for
    /// dense-only fields.
    pub fn sync_dense(&mut self) {
        let Some(coarse) = &self.coarse else { return };
        let (ch, cw) = coarse.dims();
        let plan = UpsamplePlan::new(coarse.stride, ch, cw);
        let (h, w) = self.u.dim();
        for y in 0..h {
            for x in 0..w {
                let mut du = 0.0f64;
                let mut dv = 0.0f64;
                for (cy, cx, wt) in plan.weights(y, x) {
                    du += wt * coarse.u[(cy, cx)] as f64;
                    dv += wt * coarse.v[(cy, cx)] as f64;
                }
                self.u[(y, x)] = du as f32;
                self.v[(y, x)] = dv as f32;
            }
        }
    }

    /// Transpose of the upsampling: scatters dense-flow gradients into
    /// coarse-parameter gradients. Returns `None` for dense-only fields.
    pub fn scatter_to_coarse(
        &self,
        grad_u: &Array2<f64>,
        grad_v: &Array2<f64>,
    ) -> Option<(Array2<f64>, Array2<f64>)> {
        let coarse = self.coarse.as_ref()?;
        let (ch, cw) = coarse.dims();
        let plan = UpsamplePlan::new(coarse.stride, ch, cw);
        let mut gu = Array2::<f64>::zeros((ch, cw));
        let mut gv = Array2::<f64>::zeros((ch, cw));
        let (h, w) = self.u.dim();
        for y in 0..h {
            for x in 0..w {
                let (du, dv) = (grad_u[(y, x)], grad_v[(y, x)]);
                if du == 0.0 && dv == 0.0 {
                    continue;
                }
                for (cy, cx, wt) in plan.weights(y, x) {
                    gu[(cy, cx)] += wt * du;
                    gv[(cy, cx)] += wt * dv;
                }
            }
        }
        Some((gu, gv))
    }
}
