//! Flow and intensity evaluation metrics, and robust output normalization.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::event::EventSlice;
use crate::flow::FlowField;
use crate::intensity::LogIntensity;
use crate::warp::{splat_iwe, warp_events, IweKernel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowMetrics {
    /// Mean endpoint error in pixels.
    pub epe: f64,
    /// Mean space-time angular error in degrees, between `(u, v, 1)` vectors.
    pub ae_deg: f64,
    /// Percentage of pixels with endpoint error above 3 px.
    pub pct_out: f64,
    /// Flow warp loss; filled by [`fwl`], not by [`flow_metrics`].
    pub fwl: Option<f64>,
    pub n_valid: usize,
}

/// Compares an estimated flow against ground truth over `mask` (all pixels
/// when `None`).
pub fn flow_metrics(
    est: &FlowField,
    gt: &FlowField,
    mask: Option<&Array2<bool>>,
) -> Result<FlowMetrics> {
    let dims = (est.height(), est.width());
    if dims != (gt.height(), gt.width()) {
        return Err(Error::ShapeMismatch {
            expected: format!("{dims:?}"),
            got: format!("{:?}", (gt.height(), gt.width())),
        });
    }
    if let Some(m) = mask {
        if m.dim() != dims {
            return Err(Error::ShapeMismatch { expected: format!("{dims:?}"), got: format!("{:?}", m.dim()) });
        }
    }
    let mut n = 0usize;
    let mut epe_sum = 0.0;
    let mut ae_sum = 0.0;
    let mut outliers = 0usize;
    for y in 0..dims.0 {
        for x in 0..dims.1 {
            if let Some(m) = mask {
                if !m[(y, x)] {
                    continue;
                }
            }
            n += 1;
            let (eu, ev) = est.at(x, y);
            let (gu, gv) = gt.at(x, y);
            let epe = ((eu - gu).powi(2) + (ev - gv).powi(2)).sqrt();
            epe_sum += epe;
            if epe > 3.0 {
                outliers += 1;
            }
            let dot = eu * gu + ev * gv + 1.0;
            let na = (eu * eu + ev * ev + 1.0).sqrt();
            let nb = (gu * gu + gv * gv + 1.0).sqrt();
            ae_sum += (dot / (na * nb)).clamp(-1.0, 1.0).acos();
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(FlowMetrics {
        epe: epe_sum / n as f64,
        ae_deg: (ae_sum / n as f64).to_degrees(),
        pct_out: 100.0 * outliers as f64 / n as f64,
        fwl: None,
        n_valid: n,
    })
}

/// Flow warp loss: variance of the motion-compensated IWE over the variance
/// of the zero-flow IWE. Warps to the window midpoint with the bilinear
/// kernel; identically 1 for zero flow.
pub fn fwl(slice: &EventSlice, flow: &FlowField) -> Result<f64> {
    if slice.is_empty() {
        return Err(Error::ZeroVarianceBaseline);
    }
    let t_ref = 0.5 * (slice.t_start + slice.t_end);
    let (w, h) = (slice.width, slice.height);
    let compensated = splat_iwe(&warp_events(slice, flow, t_ref), w, h, IweKernel::Bilinear);
    let baseline = splat_iwe(
        &warp_events(slice, &FlowField::zeros(h, w), t_ref),
        w,
        h,
        IweKernel::Bilinear,
    );
    let base_var = variance(&baseline.data);
    if base_var < 1e-12 {
        return Err(Error::ZeroVarianceBaseline);
    }
    Ok(variance(&compensated.data) / base_var)
}

fn variance(img: &Array2<f32>) -> f64 {
    let n = img.len() as f64;
    let mean = img.iter().map(|&v| v as f64).sum::<f64>() / n;
    img.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n
}

/// Converts log intensity to a display/evaluation image in [0, 1]:
/// `clamp((exp(L) - m) / (M - m), 0, 1)` with `m`, `M` the 1% and 99%
/// percentiles of `exp(L)`. Degenerate ranges map everything to 0.5.
pub fn normalize_robust(l: &LogIntensity) -> Array2<f32> {
    let linear: Vec<f64> = l.data.iter().map(|&v| (v as f64).exp()).collect();
    let mut sorted = linear.clone();
    sorted.sort_by(f64::total_cmp);
    let m = percentile_linear(&sorted, 0.01);
    let big_m = percentile_linear(&sorted, 0.99);
    let span = big_m - m;
    let (h, w) = l.data.dim();
    if span < 1e-9 {
        return Array2::from_elem((h, w), 0.5);
    }
    Array2::from_shape_vec(
        (h, w),
        linear.iter().map(|&v| (((v - m) / span).clamp(0.0, 1.0)) as f32).collect(),
    )
    .unwrap()
}

/// Percentile by linear interpolation on the sorted sample.
fn percentile_linear(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = q * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageMetrics {
    pub mse: f64,
    pub ssim: f64,
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Mean squared error and mean SSIM (11x11 Gaussian window, sigma 1.5,
/// standard stability constants for unit dynamic range). SSIM averages over
/// window positions fully inside the image.
pub fn image_metrics(est: &Array2<f32>, reference: &Array2<f32>) -> Result<ImageMetrics> {
    if est.dim() != reference.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", reference.dim()),
            got: format!("{:?}", est.dim()),
        });
    }
    let (h, w) = est.dim();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidConfig(format!(
            "images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM"
        )));
    }
    let n = (h * w) as f64;
    let mse = est
        .iter()
        .zip(reference.iter())
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum::<f64>()
        / n;

    // separable Gaussian-weighted local statistics
    let kernel = gaussian_kernel();
    let maps: Vec<Vec<f64>> = [
        est.iter().map(|&v| v as f64).collect::<Vec<f64>>(),
        reference.iter().map(|&v| v as f64).collect(),
        est.iter().map(|&v| (v as f64) * (v as f64)).collect(),
        reference.iter().map(|&v| (v as f64) * (v as f64)).collect(),
        est.iter().zip(reference.iter()).map(|(&a, &b)| a as f64 * b as f64).collect(),
    ]
    .into_iter()
    .map(|m| filter_valid(&m, w, h, &kernel))
    .collect();

    let vw = w - SSIM_WINDOW + 1;
    let vh = h - SSIM_WINDOW + 1;
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut ssim_sum = 0.0;
    for i in 0..vw * vh {
        let (mx, my, exx, eyy, exy) = (maps[0][i], maps[1][i], maps[2][i], maps[3][i], maps[4][i]);
        let sxx = exx - mx * mx;
        let syy = eyy - my * my;
        let sxy = exy - mx * my;
        ssim_sum += ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
    }
    Ok(ImageMetrics { mse, ssim: ssim_sum / (vw * vh) as f64 })
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        *v = (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in k.iter_mut() {
        *v /= sum;
    }
    k
}

/// Separable valid-mode Gaussian filtering; output is (h-10) x (w-10).
fn filter_valid(img: &[f64], w: usize, h: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let vw = w - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; vw * h];
    for y in 0..h {
        for x in 0..vw {
            let mut s = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                s += kv * img[y * w + x + k];
            }
            horiz[y * vw + x] = s;
        }
    }
    let vh = h - SSIM_WINDOW + 1;
    let mut out = vec![0.0; vw * vh];
    for y in 0..vh {
        for x in 0..vw {
            let mut s = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                s += kv * horiz[(y + k) * vw + x];
            }
            out[y * vw + x] = s;
        }
    }
    out
}
