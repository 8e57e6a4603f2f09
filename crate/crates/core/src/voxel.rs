//! Polarity-signed voxel-grid representation of an event slice.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::event::EventSlice;

/// A `bins x height x width` grid of temporally interpolated polarity mass.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub data: Array3<f32>,
    pub t_start: f64,
    pub t_end: f64,
}

impl VoxelGrid {
    pub fn bins(&self) -> usize {
        self.data.dim().0
    }

    /// Total signed mass; equals the sum of deposited polarities.
    pub fn total_mass(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }
}

/// Deposits each event's polarity with temporal bilinear weighting across the
/// two nearest bins, at the event's integer pixel. Signed deposits share a
/// single grid; there is no per-polarity channel doubling.
pub fn build_voxel_grid(slice: &EventSlice, bins: usize) -> Result<VoxelGrid> {
    if bins == 0 {
        return Err(Error::InvalidConfig("voxel grid needs at least 1 bin".into()));
    }
    let (w, h) = (slice.width, slice.height);
    let mut data = Array3::<f32>::zeros((bins, h, w));
    let span = slice.duration();
    for e in slice.events() {
        // normalized bin coordinate in [0, bins-1]
        let tn = if bins == 1 { 0.0 } else { (e.t - slice.t_start) / span * (bins - 1) as f64 };
        let b0 = (tn.floor() as usize).min(bins - 1);
        let w1 = tn - b0 as f64;
        let (x, y) = (e.x as usize, e.y as usize);
        data[(b0, y, x)] += ((1.0 - w1) * e.p as f64) as f32;
        if w1 > 0.0 && b0 + 1 < bins {
            data[(b0 + 1, y, x)] += (w1 * e.p as f64) as f32;
        }
    }
    Ok(VoxelGrid { data, t_start: slice.t_start, t_end: slice.t_end })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Event;

    fn slice_of(events: Vec<Event>, bins_span: f64) -> EventSlice {
        EventSlice::new(events, 0.0, bins_span, 8, 8).unwrap()
    }

    #[test]
    fn event_at_start_fills_bin_zero() {
        let s = slice_of(vec![Event { t: 0.0, x: 3, y: 2, p: 1 }], 1.0);
        let g = build_voxel_grid(&s, 5).unwrap();
        assert_eq!(g.data[(0, 2, 3)], 1.0);
        assert_eq!(g.total_mass(), 1.0);
    }

    #[test]
    fn fractional_bin_splits_bilinearly() {
        // bins = 4, normalized coordinate 2.25 => t = 0.75 over a unit span
        let s = slice_of(vec![Event { t: 0.75, x: 1, y: 1, p: 1 }], 1.0);
        let g = build_voxel_grid(&s, 4).unwrap();
        assert!((g.data[(2, 1, 1)] - 0.75).abs() < 1e-6);
        assert!((g.data[(3, 1, 1)] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn event_at_end_fills_last_bin() {
        let s = slice_of(vec![Event { t: 1.0, x: 0, y: 0, p: -1 }], 1.0);
        let g = build_voxel_grid(&s, 3).unwrap();
        assert_eq!(g.data[(2, 0, 0)], -1.0);
    }

    // Sum-preservation oracle: temporal weights sum to 1 per event, so the
    // grid total equals the summed polarities.
    #[test]
    fn total_mass_matches_polarity_sum() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let evs: Vec<Event> = (0..2000)
            .map(|_| Event {
                t: rng.gen_range(0.0..=1.0),
                x: rng.gen_range(0..8),
                y: rng.gen_range(0..8),
                p: if rng.gen_bool(0.5) { 1 } else { -1 },
            })
            .collect();
        let expected: f64 = evs.iter().map(|e| e.p as f64).sum();
        let s = slice_of(evs, 1.0);
        let g = build_voxel_grid(&s, 15).unwrap();
        let rel = (g.total_mass() - expected).abs() / expected.abs().max(1.0);
        assert!(rel < 1e-4, "mass {} vs {}", g.total_mass(), expected);
    }
}
