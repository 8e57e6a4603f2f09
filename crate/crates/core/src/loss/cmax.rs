//! Contrast-maximization term: inverse mean L1 magnitude of the IWE gradient.
//!
//! The IWE gradient uses forward differences with a replicate boundary, so
//! the last row/column contributes zero. Gradient mode differentiates through
//! bilinear splatting; the Gaussian kernel is evaluation-only.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::event::EventSlice;
use crate::flow::FlowField;
use crate::interp::Cell;
use crate::par::{self, Exec};
use crate::warp::{splat_accumulate, warp_events_exec, IweKernel};

/// Mean gradient magnitudes below this are degenerate (flat or empty IWE).
const DEGENERATE_MEAN: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct CmaxResult {
    pub value: f64,
    /// Gradients with respect to the dense flow components.
    pub d_flow_u: Array2<f64>,
    pub d_flow_v: Array2<f64>,
}

/// Loss value only, with either splat kernel.
pub fn cmax_value(flow: &FlowField, slice: &EventSlice, t_ref: f64, kernel: IweKernel) -> Result<f64> {
    let exec = Exec::preferred();
    let (h, w) = (slice.height, slice.width);
    let warped = warp_events_exec(exec, slice, flow, t_ref);
    let iwe = splat_accumulate(exec, &warped, w, h, kernel);
    let sum = gradient_l1_sum(exec, &iwe, w, h);
    let mean = sum / (w * h) as f64;
    if mean < DEGENERATE_MEAN {
        return Err(Error::DegenerateIwe);
    }
    Ok(1.0 / mean)
}

/// Loss value and flow gradient (bilinear splat kernel).
pub fn cmax_loss(flow: &FlowField, slice: &EventSlice, t_ref: f64) -> Result<CmaxResult> {
    cmax_loss_exec(Exec::preferred(), flow, slice, t_ref)
}

pub fn cmax_loss_exec(exec: Exec, flow: &FlowField, slice: &EventSlice, t_ref: f64) -> Result<CmaxResult> {
    let (h, w) = (slice.height, slice.width);
    assert_eq!((h, w), (flow.height(), flow.width()), "flow/slice shape mismatch");
    let warped = warp_events_exec(exec, slice, flow, t_ref);
    let iwe = splat_accumulate(exec, &warped, w, h, IweKernel::Bilinear);

    let sum = gradient_l1_sum(exec, &iwe, w, h);
    let pixels = (w * h) as f64;
    let mean = sum / pixels;
    if mean < DEGENERATE_MEAN {
        return Err(Error::DegenerateIwe);
    }
    let value = 1.0 / mean;

    // d(value)/d(IWE) = -(value^2 / |Omega|) * d(sum)/d(IWE)
    let scale = -(value * value) / pixels;
    let mut d_iwe = vec![0.0f64; w * h];
    par::band_map_mut(exec, h, w, &mut d_iwe, |rows, band| {
        let at = |y: usize, x: usize| iwe[y * w + x];
        let sgn = |d: f64| {
            if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            }
        };
        for y in rows.clone() {
            for x in 0..w {
                let mut g = 0.0;
                if x + 1 < w {
                    g -= sgn(at(y, x + 1) - at(y, x));
                }
                if y + 1 < h {
                    g -= sgn(at(y + 1, x) - at(y, x));
                }
                if x > 0 {
                    g += sgn(at(y, x) - at(y, x - 1));
                }
                if y > 0 {
                    g += sgn(at(y, x) - at(y - 1, x));
                }
                band[(y - rows.start) * w + x] = g * scale;
            }
        }
    });

    // back-propagate through the bilinear deposits into the flow at each
    // event's source pixel
    let span = slice.duration();
    let events = slice.events();
    let idx: Vec<usize> = (0..warped.len()).collect();
    let parts = par::chunk_map(exec, &idx, |_, chunk| {
        let mut adds: Vec<(u32, f64, f64)> = Vec::with_capacity(chunk.len());
        for &k in chunk {
            let Some(cell) = Cell::locate(warped.xs[k], warped.ys[k], w, h) else {
                continue;
            };
            let ids = cell.indices(w);
            let dwx = cell.dweights_dx();
            let dwy = cell.dweights_dy();
            let mut gx = 0.0;
            let mut gy = 0.0;
            for i in 0..4 {
                let up = d_iwe[ids[i] as usize];
                gx += up * dwx[i];
                gy += up * dwy[i];
            }
            let e = events[k];
            let alpha = (t_ref - e.t) / span;
            adds.push(((e.y as usize * w + e.x as usize) as u32, gx * alpha, gy * alpha));
        }
        adds
    });
    let mut d_u = vec![0.0f64; w * h];
    let mut d_v = vec![0.0f64; w * h];
    for part in &parts {
        for &(i, du, dv) in part {
            d_u[i as usize] += du;
            d_v[i as usize] += dv;
        }
    }
    Ok(CmaxResult {
        value,
        d_flow_u: Array2::from_shape_vec((h, w), d_u).unwrap(),
        d_flow_v: Array2::from_shape_vec((h, w), d_v).unwrap(),
    })
}

/// Sum over pixels of |dx| + |dy| with forward differences.
fn gradient_l1_sum(exec: Exec, image: &[f64], w: usize, h: usize) -> f64 {
    let sums = par::band_map(exec, h, |rows| {
        let at = |y: usize, x: usize| image[y * w + x];
        let mut s = 0.0;
        for y in rows {
            for x in 0..w {
                if x + 1 < w {
                    s += (at(y, x + 1) - at(y, x)).abs();
                }
                if y + 1 < h {
                    s += (at(y + 1, x) - at(y, x)).abs();
                }
            }
        }
        s
    });
    sums.iter().sum()
}
