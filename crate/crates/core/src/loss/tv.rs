//! Total-variation smoothness term.
//!
//! `value = (1/|Omega|) * sum ||grad f||_1` with forward differences and a
//! replicate boundary (the last row/column contributes zero difference). For
//! multi-channel fields the channel sums share one `|Omega| = H*W`
//! normalizer. The gradient is the exact sub-gradient with `sign(0) = 0`.

use ndarray::Array2;

use crate::par::{self, Exec};

#[derive(Debug, Clone)]
pub struct TvResult {
    pub value: f64,
    /// One gradient plane per input channel.
    pub grads: Vec<Array2<f64>>,
}

pub fn tv_loss(channels: &[&Array2<f32>]) -> TvResult {
    tv_loss_exec(Exec::preferred(), channels)
}

pub fn tv_loss_exec(exec: Exec, channels: &[&Array2<f32>]) -> TvResult {
    assert!(!channels.is_empty());
    let (h, w) = channels[0].dim();
    assert!(h >= 2 && w >= 2, "tv_loss needs at least a 2x2 field");
    let norm = 1.0 / (h * w) as f64;

    let mut value = 0.0;
    let mut grads = Vec::with_capacity(channels.len());
    for field in channels {
        assert_eq!(field.dim(), (h, w), "tv channels must share a shape");
        let mut grad = vec![0.0f64; h * w];
        let sums = par::band_map_mut(exec, h, w, &mut grad, |rows, band| {
            let f = |y: usize, x: usize| field[(y, x)] as f64;
            let sgn = |d: f64| {
                if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            };
            let mut sum = 0.0;
            for y in rows.clone() {
                for x in 0..w {
                    let dx = if x + 1 < w { f(y, x + 1) - f(y, x) } else { 0.0 };
                    let dy = if y + 1 < h { f(y + 1, x) - f(y, x) } else { 0.0 };
                    sum += dx.abs() + dy.abs();
                    // gather form of the sub-gradient: terms owning pixel (y, x)
                    let mut g = -sgn(dx) - sgn(dy);
                    if x > 0 {
                        g += sgn(f(y, x) - f(y, x - 1));
                    }
                    if y > 0 {
                        g += sgn(f(y, x) - f(y - 1, x));
                    }
                    band[(y - rows.start) * w + x] = g * norm;
                }
            }
            sum
        });
        value += sums.iter().sum::<f64>();
        grads.push(Array2::from_shape_vec((h, w), grad).unwrap());
    }
    TvResult { value: value * norm, grads }
}
