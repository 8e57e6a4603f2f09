//! Motion compensation: event warping, IWE splatting and backward image
//! warping.

use ndarray::Array2;

use crate::event::{EventSlice, PredecessorPair};
use crate::flow::FlowField;
use crate::interp::{sample_bilinear, Cell};
use crate::par::{self, Exec};

/// Events transported to a common reference time. Positions may lie outside
/// the image; downstream consumers mask them out.
#[derive(Debug, Clone)]
pub struct WarpedEvents {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub polarities: Vec<i8>,
    pub t_ref: f64,
}

impl WarpedEvents {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

/// Warps every event to `t_ref` along the flow sampled at its original
/// integer pixel: `x' = x + ((t_ref - t) / span) * F(x)`.
pub fn warp_events(slice: &EventSlice, flow: &FlowField, t_ref: f64) -> WarpedEvents {
    warp_events_exec(Exec::preferred(), slice, flow, t_ref)
}

pub fn warp_events_exec(exec: Exec, slice: &EventSlice, flow: &FlowField, t_ref: f64) -> WarpedEvents {
    let span = slice.duration();
    let parts = par::chunk_map(exec, slice.events(), |_, chunk| {
        let mut xs = Vec::with_capacity(chunk.len());
        let mut ys = Vec::with_capacity(chunk.len());
        let mut ps = Vec::with_capacity(chunk.len());
        for e in chunk {
            let alpha = (t_ref - e.t) / span;
            let (fu, fv) = flow.at(e.x as usize, e.y as usize);
            xs.push(e.x as f64 + alpha * fu);
            ys.push(e.y as f64 + alpha * fv);
            ps.push(e.p);
        }
        (xs, ys, ps)
    });
    let n = slice.len();
    let mut out = WarpedEvents {
        xs: Vec::with_capacity(n),
        ys: Vec::with_capacity(n),
        polarities: Vec::with_capacity(n),
        t_ref,
    };
    for (xs, ys, ps) in parts {
        out.xs.extend(xs);
        out.ys.extend(ys);
        out.polarities.extend(ps);
    }
    out
}

/// Warps an event and its same-pixel predecessor to `t_ref`, both along the
/// flow at the event's pixel. The returned positions satisfy
/// `pos_prev - pos_k == (dt / span) * F(x_k)` exactly.
pub fn warp_pair_positions(
    pair: &PredecessorPair,
    slice: &EventSlice,
    flow: &FlowField,
    t_ref: f64,
) -> ((f64, f64), (f64, f64)) {
    let e = slice.events()[pair.index_k];
    let span = slice.duration();
    let (fu, fv) = flow.at(e.x as usize, e.y as usize);
    let alpha = (t_ref - e.t) / span;
    let pos_k = (e.x as f64 + alpha * fu, e.y as f64 + alpha * fv);
    let beta = pair.dt / span;
    let pos_prev = (pos_k.0 + beta * fu, pos_k.1 + beta * fv);
    (pos_k, pos_prev)
}

/// Spatial deposit kernel for the image of warped events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IweKernel {
    /// Four-neighbor bilinear split; exact piecewise-linear derivatives.
    Bilinear,
    /// Truncated Gaussian, renormalized over its in-image support so every
    /// in-bounds event deposits unit mass. Evaluation only.
    Gaussian { sigma: f64, radius: usize },
}

impl IweKernel {
    pub fn gaussian() -> Self {
        IweKernel::Gaussian { sigma: 1.0, radius: 3 }
    }
}

/// Image of warped events: per-pixel polarity-agnostic accumulation.
#[derive(Debug, Clone)]
pub struct Iwe {
    pub data: Array2<f32>,
}

impl Iwe {
    pub fn total_mass(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }
}

/// Accumulates in-bounds warped events into a `height x width` image. Each
/// in-bounds event deposits weights summing to 1; out-of-bounds events are
/// excluded entirely.
pub fn splat_iwe(warped: &WarpedEvents, width: usize, height: usize, kernel: IweKernel) -> Iwe {
    splat_iwe_exec(Exec::preferred(), warped, width, height, kernel)
}

pub fn splat_iwe_exec(
    exec: Exec,
    warped: &WarpedEvents,
    width: usize,
    height: usize,
    kernel: IweKernel,
) -> Iwe {
    let acc = splat_accumulate(exec, warped, width, height, kernel);
    let data = Array2::from_shape_vec((height, width), acc.iter().map(|&v| v as f32).collect())
        .expect("accumulator has height*width entries");
    Iwe { data }
}

/// f64 accumulation grid used by both the public splat and the CMax loss.
pub(crate) fn splat_accumulate(
    exec: Exec,
    warped: &WarpedEvents,
    width: usize,
    height: usize,
    kernel: IweKernel,
) -> Vec<f64> {
    let idx: Vec<usize> = (0..warped.len()).collect();
    let parts = par::chunk_map(exec, &idx, |_, chunk| {
        let mut adds: Vec<(u32, f64)> = Vec::with_capacity(chunk.len() * 4);
        for &k in chunk {
            deposit(warped.xs[k], warped.ys[k], width, height, kernel, &mut adds);
        }
        adds
    });
    let mut acc = vec![0.0f64; width * height];
    par::merge_sparse(&mut acc, &parts);
    acc
}

fn deposit(x: f64, y: f64, width: usize, height: usize, kernel: IweKernel, adds: &mut Vec<(u32, f64)>) {
    match kernel {
        IweKernel::Bilinear => {
            if let Some(cell) = Cell::locate(x, y, width, height) {
                let ws = cell.weights();
                let ids = cell.indices(width);
                for i in 0..4 {
                    if ws[i] != 0.0 {
                        adds.push((ids[i], ws[i]));
                    }
                }
            }
        }
        IweKernel::Gaussian { sigma, radius } => {
            let inside = x >= 0.0 && x <= (width - 1) as f64 && y >= 0.0 && y <= (height - 1) as f64;
            if !inside {
                return;
            }
            let r = radius as i64;
            let cx = x.round() as i64;
            let cy = y.round() as i64;
            let inv2s2 = 1.0 / (2.0 * sigma * sigma);
            let mut stencil: Vec<(u32, f64)> = Vec::with_capacity((2 * radius + 1).pow(2));
            let mut total = 0.0;
            for yy in (cy - r).max(0)..=(cy + r).min(height as i64 - 1) {
                for xx in (cx - r).max(0)..=(cx + r).min(width as i64 - 1) {
                    let d2 = (xx as f64 - x).powi(2) + (yy as f64 - y).powi(2);
                    let w = (-d2 * inv2s2).exp();
                    total += w;
                    stencil.push(((yy * width as i64 + xx) as u32, w));
                }
            }
            if total > 0.0 {
                for (i, w) in stencil {
                    adds.push((i, w / total));
                }
            }
        }
    }
}

/// Backward image warping for the temporal-consistency loss:
/// `output(x) = sample(image, x - F(x))`. The mask marks pixels whose source
/// sample fell inside the image.
pub fn warp_image_backward(image: &Array2<f32>, flow: &FlowField) -> (Array2<f32>, Array2<bool>) {
    warp_image_backward_exec(Exec::preferred(), image, flow)
}

pub fn warp_image_backward_exec(
    exec: Exec,
    image: &Array2<f32>,
    flow: &FlowField,
) -> (Array2<f32>, Array2<bool>) {
    let (h, w) = image.dim();
    assert_eq!((h, w), (flow.height(), flow.width()), "image/flow shape mismatch");
    let mut out = vec![0.0f32; h * w];
    let mask_parts = par::band_map_mut(exec, h, w, &mut out, |rows, band| {
        let base = rows.start * w;
        let mut mask_band = vec![false; band.len()];
        for (off, px) in band.iter_mut().enumerate() {
            let i = base + off;
            let (y, x) = (i / w, i % w);
            let (fu, fv) = flow.at(x, y);
            if let Some(s) = sample_bilinear(image, x as f64 - fu, y as f64 - fv) {
                *px = s.value as f32;
                mask_band[off] = true;
            }
        }
        mask_band
    });
    let mask: Vec<bool> = mask_parts.into_iter().flatten().collect();
    (
        Array2::from_shape_vec((h, w), out).unwrap(),
        Array2::from_shape_vec((h, w), mask).unwrap(),
    )
}
