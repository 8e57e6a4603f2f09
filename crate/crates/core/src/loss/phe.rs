//! Photometric error over predecessor pairs.
//!
//! For event `e_k` with a same-pixel predecessor `dt` earlier, both are
//! warped to the reference time with the flow at the event's pixel, and the
//! residual is the predicted intensity increment minus the measured one:
//! `eps_k = L(x'_k) - L(x'_{k-1}) - p_k * C`. The loss is the mean absolute
//! residual over pairs whose two warped positions are both in bounds; the
//! normalizer counts only those pairs.

use ndarray::Array2;

use crate::event::{EventSlice, PredecessorPair};
use crate::flow::FlowField;
use crate::intensity::LogIntensity;
use crate::interp::Cell;
use crate::par::{self, Exec};

#[derive(Debug, Clone)]
pub struct PheResult {
    pub value: f64,
    /// Pairs with both warped positions in bounds; 0 flags an empty term.
    pub n_valid: usize,
    pub d_intensity: Array2<f64>,
    /// Gradients with respect to the dense flow components.
    pub d_flow_u: Array2<f64>,
    pub d_flow_v: Array2<f64>,
}

pub fn phe_loss(
    intensity: &LogIntensity,
    flow: &FlowField,
    slice: &EventSlice,
    pairs: &[PredecessorPair],
    contrast: f64,
    t_ref: f64,
) -> PheResult {
    phe_loss_exec(Exec::preferred(), intensity, flow, slice, pairs, contrast, t_ref)
}

struct Partial {
    abs_sum: f64,
    n_valid: usize,
    d_intensity: Vec<(u32, f64)>,
    d_flow: Vec<(u32, f64, f64)>,
}

pub fn phe_loss_exec(
    exec: Exec,
    intensity: &LogIntensity,
    flow: &FlowField,
    slice: &EventSlice,
    pairs: &[PredecessorPair],
    contrast: f64,
    t_ref: f64,
) -> PheResult {
    let (h, w) = intensity.data.dim();
    assert_eq!((h, w), (flow.height(), flow.width()), "intensity/flow shape mismatch");
    assert_eq!((h, w), (slice.height, slice.width), "intensity/slice shape mismatch");
    let span = slice.duration();
    let events = slice.events();

    let parts = par::chunk_map(exec, pairs, |_, chunk| {
        let mut p = Partial {
            abs_sum: 0.0,
            n_valid: 0,
            d_intensity: Vec::with_capacity(chunk.len() * 8),
            d_flow: Vec::with_capacity(chunk.len()),
        };
        for pair in chunk {
            let e = events[pair.index_k];
            let (ex, ey) = (e.x as usize, e.y as usize);
            let (fu, fv) = flow.at(ex, ey);
            let alpha_k = (t_ref - e.t) / span;
            let beta = pair.dt / span;
            let alpha_prev = alpha_k + beta;
            let pos_k = (e.x as f64 + alpha_k * fu, e.y as f64 + alpha_k * fv);
            let pos_prev = (pos_k.0 + beta * fu, pos_k.1 + beta * fv);
            let (Some(cell_k), Some(cell_prev)) = (
                Cell::locate(pos_k.0, pos_k.1, w, h),
                Cell::locate(pos_prev.0, pos_prev.1, w, h),
            ) else {
                continue;
            };
            p.n_valid += 1;

            let vk = cell_k.gather(&intensity.data);
            let vp = cell_prev.gather(&intensity.data);
            let wk = cell_k.weights();
            let wp = cell_prev.weights();
            let lk: f64 = (0..4).map(|i| wk[i] * vk[i]).sum();
            let lp: f64 = (0..4).map(|i| wp[i] * vp[i]).sum();
            let eps = lk - lp - e.p as f64 * contrast;
            p.abs_sum += eps.abs();
            let s = if eps > 0.0 {
                1.0
            } else if eps < 0.0 {
                -1.0
            } else {
                continue; // sign(0) = 0: no gradient contribution
            };

            let ik = cell_k.indices(w);
            let ip = cell_prev.indices(w);
            for i in 0..4 {
                p.d_intensity.push((ik[i], s * wk[i]));
                p.d_intensity.push((ip[i], -s * wp[i]));
            }

            let dkx = cell_k.dweights_dx();
            let dky = cell_k.dweights_dy();
            let dpx = cell_prev.dweights_dx();
            let dpy = cell_prev.dweights_dy();
            let gkx: f64 = (0..4).map(|i| dkx[i] * vk[i]).sum();
            let gky: f64 = (0..4).map(|i| dky[i] * vk[i]).sum();
            let gpx: f64 = (0..4).map(|i| dpx[i] * vp[i]).sum();
            let gpy: f64 = (0..4).map(|i| dpy[i] * vp[i]).sum();
            let du = s * (gkx * alpha_k - gpx * alpha_prev);
            let dv = s * (gky * alpha_k - gpy * alpha_prev);
            p.d_flow.push(((ey * w + ex) as u32, du, dv));
        }
        p
    });

    let n_valid: usize = parts.iter().map(|p| p.n_valid).sum();
    let mut d_intensity = vec![0.0f64; h * w];
    let mut d_flow_u = vec![0.0f64; h * w];
    let mut d_flow_v = vec![0.0f64; h * w];
    let mut abs_sum = 0.0;
    if n_valid > 0 {
        let inv_n = 1.0 / n_valid as f64;
        for p in &parts {
            abs_sum += p.abs_sum;
            for &(idx, g) in &p.d_intensity {
                d_intensity[idx as usize] += g * inv_n;
            }
            for &(idx, du, dv) in &p.d_flow {
                d_flow_u[idx as usize] += du * inv_n;
                d_flow_v[idx as usize] += dv * inv_n;
            }
        }
        abs_sum *= inv_n;
    }
    PheResult {
        value: abs_sum,
        n_valid,
        d_intensity: Array2::from_shape_vec((h, w), d_intensity).unwrap(),
        d_flow_u: Array2::from_shape_vec((h, w), d_flow_u).unwrap(),
        d_flow_v: Array2::from_shape_vec((h, w), d_flow_v).unwrap(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{predecessor_pairs, Event};

    #[test]
    fn constant_intensity_zero_flow_gives_contrast() {
        // eps_k = -p_k * C for every pair, so the mean |eps| is exactly C.
        let (w, h) = (16, 16);
        let events = vec![
            Event { t: 0.1, x: 4, y: 4, p: 1 },
            Event { t: 0.3, x: 4, y: 4, p: 1 },
            Event { t: 0.2, x: 9, y: 7, p: -1 },
            Event { t: 0.6, x: 9, y: 7, p: -1 },
            Event { t: 0.9, x: 9, y: 7, p: 1 },
        ];
        let slice = EventSlice::new(events, 0.0, 1.0, w, h).unwrap();
        let pairs = predecessor_pairs(&slice);
        assert_eq!(pairs.len(), 3);
        let intensity = LogIntensity::constant(h, w, 0.7);
        let flow = FlowField::zeros(h, w);
        let r = phe_loss(&intensity, &flow, &slice, &pairs, 0.2, slice.t_end);
        assert_eq!(r.n_valid, 3);
        assert!((r.value - 0.2).abs() < 1e-12);
    }

    #[test]
    fn no_pairs_flagged_with_zero_value() {
        let slice = EventSlice::new(vec![Event { t: 0.5, x: 1, y: 1, p: 1 }], 0.0, 1.0, 8, 8).unwrap();
        let pairs = predecessor_pairs(&slice);
        let r = phe_loss(
            &LogIntensity::constant(8, 8, 0.0),
            &FlowField::zeros(8, 8),
            &slice,
            &pairs,
            0.2,
            1.0,
        );
        assert_eq!(r.n_valid, 0);
        assert_eq!(r.value, 0.0);
        assert!(r.d_intensity.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn out_of_bounds_pairs_dropped_from_normalizer() {
        // Flow pushes the border pixel's warped positions outside the image;
        // only the interior pair remains.
        let (w, h) = (16, 16);
        let events = vec![
            Event { t: 0.1, x: 15, y: 8, p: 1 },
            Event { t: 0.2, x: 15, y: 8, p: 1 },
            Event { t: 0.1, x: 8, y: 8, p: 1 },
            Event { t: 0.2, x: 8, y: 8, p: 1 },
        ];
        let slice = EventSlice::new(events, 0.0, 1.0, w, h).unwrap();
        let pairs = predecessor_pairs(&slice);
        assert_eq!(pairs.len(), 2);
        let flow = FlowField::constant(h, w, (4.0, 0.0));
        let r = phe_loss(
            &LogIntensity::constant(h, w, 0.0),
            &flow,
            &slice,
            &pairs,
            0.2,
            slice.t_end,
        );
        assert_eq!(r.n_valid, 1);
        assert!((r.value - 0.2).abs() < 1e-12);
    }
}
