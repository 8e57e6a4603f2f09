//! Temporal-consistency term between consecutive intensity estimates.
//!
//! `value = mean over valid pixels of |L_{i+1}(x) - sample(L_i, x - F(x))|`,
//! where `F` is the flow of the second sample (it transports the first
//! window's intensity to the second window's reference time). Pixels whose
//! source sample falls outside the image are excluded from the mean.

use ndarray::Array2;

use crate::flow::FlowField;
use crate::intensity::LogIntensity;
use crate::interp::Cell;
use crate::par::{self, Exec};

#[derive(Debug, Clone)]
pub struct TcResult {
    pub value: f64,
    /// Pixels with an in-bounds source sample; 0 flags a fully invalid mask.
    pub n_valid: usize,
    pub d_intensity_i: Array2<f64>,
    pub d_intensity_ip1: Array2<f64>,
    pub d_flow_u: Array2<f64>,
    pub d_flow_v: Array2<f64>,
}

pub fn tc_loss(l_i: &LogIntensity, l_ip1: &LogIntensity, flow: &FlowField) -> TcResult {
    tc_loss_exec(Exec::preferred(), l_i, l_ip1, flow)
}

struct BandOut {
    abs_sum: f64,
    n_valid: usize,
    d_l_i: Vec<(u32, f64)>,
    // row-local planes for the band, unnormalized
    d_l_ip1: Vec<f64>,
    d_u: Vec<f64>,
    d_v: Vec<f64>,
}

pub fn tc_loss_exec(exec: Exec, l_i: &LogIntensity, l_ip1: &LogIntensity, flow: &FlowField) -> TcResult {
    let (h, w) = l_i.data.dim();
    assert_eq!((h, w), l_ip1.data.dim(), "intensity shape mismatch");
    assert_eq!((h, w), (flow.height(), flow.width()), "intensity/flow shape mismatch");

    let bands = par::band_map(exec, h, |rows| {
        let n = (rows.end - rows.start) * w;
        let mut out = BandOut {
            abs_sum: 0.0,
            n_valid: 0,
            d_l_i: Vec::new(),
            d_l_ip1: vec![0.0; n],
            d_u: vec![0.0; n],
            d_v: vec![0.0; n],
        };
        for y in rows.clone() {
            for x in 0..w {
                let (fu, fv) = flow.at(x, y);
                let Some(cell) = Cell::locate(x as f64 - fu, y as f64 - fv, w, h) else {
                    continue;
                };
                out.n_valid += 1;
                let vals = cell.gather(&l_i.data);
                let ws = cell.weights();
                let warped: f64 = (0..4).map(|i| ws[i] * vals[i]).sum();
                let r = l_ip1.data[(y, x)] as f64 - warped;
                out.abs_sum += r.abs();
                let s = if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    continue;
                };
                let local = (y - rows.start) * w + x;
                out.d_l_ip1[local] += s;
                let ids = cell.indices(w);
                for i in 0..4 {
                    out.d_l_i.push((ids[i], -s * ws[i]));
                }
                let dwx = cell.dweights_dx();
                let dwy = cell.dweights_dy();
                let gx: f64 = (0..4).map(|i| dwx[i] * vals[i]).sum();
                let gy: f64 = (0..4).map(|i| dwy[i] * vals[i]).sum();
                // d(pos)/dF = -1, d(r)/dF = +grad(sample)
                out.d_u[local] += s * gx;
                out.d_v[local] += s * gy;
            }
        }
        out
    });

    let n_valid: usize = bands.iter().map(|b| b.n_valid).sum();
    let mut d_l_i = vec![0.0f64; h * w];
    let mut d_l_ip1 = Vec::with_capacity(h * w);
    let mut d_u = Vec::with_capacity(h * w);
    let mut d_v = Vec::with_capacity(h * w);
    let mut value = 0.0;
    let inv_n = if n_valid > 0 { 1.0 / n_valid as f64 } else { 0.0 };
    for b in &bands {
        value += b.abs_sum;
        for &(idx, g) in &b.d_l_i {
            d_l_i[idx as usize] += g * inv_n;
        }
        d_l_ip1.extend(b.d_l_ip1.iter().map(|g| g * inv_n));
        d_u.extend(b.d_u.iter().map(|g| g * inv_n));
        d_v.extend(b.d_v.iter().map(|g| g * inv_n));
    }
    TcResult {
        value: value * inv_n,
        n_valid,
        d_intensity_i: Array2::from_shape_vec((h, w), d_l_i).unwrap(),
        d_intensity_ip1: Array2::from_shape_vec((h, w), d_l_ip1).unwrap(),
        d_flow_u: Array2::from_shape_vec((h, w), d_u).unwrap(),
        d_flow_v: Array2::from_shape_vec((h, w), d_v).unwrap(),
    }
}
