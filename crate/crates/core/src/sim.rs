//! Event-stream synthesis from a known intensity pattern and flow.
//!
//! Each pixel tracks the log intensity along its backward trajectory
//! `L(x, t) = L0(x - (t / duration) * F(x))` (replicate-border sampling) and
//! emits one event per crossed contrast-threshold multiple, with the
//! timestamp interpolated linearly within the substep. The running reference
//! level advances by the emitted multiples rather than resetting, matching an
//! idealized integrate-and-fire pixel.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::event::{Event, EventSlice};
use crate::flow::FlowField;
use crate::intensity::LogIntensity;
use crate::interp::sample_bilinear_clamped;
use crate::par::{self, Exec};

/// Deterministic test patterns in log-intensity units, valued in [0, 1.5].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pattern {
    /// Two-level checkerboard with the given tile period.
    Checker { period: usize },
    /// Smoothed uniform noise stretched to a fixed range; `scale` is the
    /// blur radius in pixels.
    SmoothedNoise { scale: usize, seed: u64 },
    /// Horizontal step of the given height at column `position`.
    StepEdge { position: f64, height: f64 },
}

pub fn render_pattern(pattern: Pattern, height: usize, width: usize) -> LogIntensity {
    assert!(height > 0 && width > 0);
    let data = match pattern {
        Pattern::Checker { period } => {
            let p = period.max(1);
            Array2::from_shape_fn((height, width), |(y, x)| {
                if (x / p + y / p) % 2 == 0 {
                    0.2
                } else {
                    1.2
                }
            })
        }
        Pattern::SmoothedNoise { scale, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut grid: Vec<f64> = (0..height * width).map(|_| rng.gen_range(0.0..1.0)).collect();
            for _ in 0..3 {
                grid = box_blur(&grid, width, height, scale.max(1));
            }
            let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            Array2::from_shape_fn((height, width), |(y, x)| {
                let v = grid[y * width + x];
                if span < 1e-12 {
                    0.75
                } else {
                    (0.1 + 1.3 * (v - lo) / span) as f32
                }
            })
        }
        Pattern::StepEdge { position, height: step } => Array2::from_shape_fn((height, width), |(_, x)| {
            let v = if (x as f64) < position { 0.2 } else { 0.2 + step };
            v.clamp(0.0, 1.5) as f32
        }),
    };
    LogIntensity::new(data)
}

fn box_blur(grid: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let clamp_w = |v: i64| v.clamp(0, w as i64 - 1) as usize;
    let clamp_h = |v: i64| v.clamp(0, h as i64 - 1) as usize;
    let k = (2 * r + 1) as f64;
    let mut horiz = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for d in -(r as i64)..=(r as i64) {
                s += grid[y * w + clamp_w(x as i64 + d)];
            }
            horiz[y * w + x] = s / k;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for d in -(r as i64)..=(r as i64) {
                s += horiz[clamp_h(y as i64 + d) * w + x];
            }
            out[y * w + x] = s / k;
        }
    }
    out
}

/// Ground-truth scene: an initial pattern transported by a known flow.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub intensity0: LogIntensity,
    /// Per-pixel displacement over the full duration.
    pub flow: FlowField,
    pub duration: f64,
    pub contrast: f64,
    /// Dead time after an emitted event during which crossings are absorbed
    /// without emission. Robustness experiments only.
    pub refractory: f64,
    /// Relative per-pixel threshold jitter; 0 disables it.
    pub threshold_jitter: f64,
    pub jitter_seed: u64,
}

impl SyntheticScene {
    pub fn new(intensity0: LogIntensity, flow: FlowField, duration: f64, contrast: f64) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::InvalidConfig("scene duration must be > 0".into()));
        }
        if !(contrast > 0.0) {
            return Err(Error::InvalidConfig("contrast threshold must be > 0".into()));
        }
        if (flow.height(), flow.width()) != intensity0.data.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", intensity0.data.dim()),
                got: format!("{:?}", (flow.height(), flow.width())),
            });
        }
        Ok(Self {
            intensity0,
            flow,
            duration,
            contrast,
            refractory: 0.0,
            threshold_jitter: 0.0,
            jitter_seed: 0,
        })
    }

    pub fn width(&self) -> usize {
        self.intensity0.width()
    }

    pub fn height(&self) -> usize {
        self.intensity0.height()
    }
}

/// Ground-truth log intensity at time `t` along the scene trajectory.
pub fn intensity_at(scene: &SyntheticScene, t: f64) -> LogIntensity {
    let frac = t / scene.duration;
    let (h, w) = scene.intensity0.data.dim();
    let data = Array2::from_shape_fn((h, w), |(y, x)| {
        let (fu, fv) = scene.flow.at(x, y);
        sample_bilinear_clamped(&scene.intensity0.data, x as f64 - frac * fu, y as f64 - frac * fv) as f32
    });
    LogIntensity::new(data)
}

/// Simulates the scene with `substeps` uniform time intervals per pixel.
///
/// Errors with `UndersampledSimulation` when any per-substep brightness
/// change exceeds `4 * contrast`.
pub fn simulate_events(scene: &SyntheticScene, substeps: usize) -> Result<EventSlice> {
    simulate_events_exec(Exec::preferred(), scene, substeps)
}

pub fn simulate_events_exec(exec: Exec, scene: &SyntheticScene, substeps: usize) -> Result<EventSlice> {
    if substeps < 2 {
        return Err(Error::InvalidConfig("simulation needs at least 2 substeps".into()));
    }
    let (h, w) = scene.intensity0.data.dim();
    let jitter = per_pixel_thresholds(scene, w, h);

    let bands = par::band_map(exec, h, |rows| -> Result<Vec<Event>> {
        let mut events = Vec::new();
        for y in rows {
            for x in 0..w {
                simulate_pixel(scene, &jitter, x, y, substeps, &mut events)?;
            }
        }
        Ok(events)
    });

    let mut all = Vec::new();
    for band in bands {
        all.extend(band?);
    }
    all.sort_by(|a, b| a.t.total_cmp(&b.t));
    EventSlice::new(all, 0.0, scene.duration, w, h)
}

fn per_pixel_thresholds(scene: &SyntheticScene, w: usize, h: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(scene.jitter_seed);
    (0..w * h)
        .map(|_| {
            let j = if scene.threshold_jitter > 0.0 {
                rng.gen_range(-scene.threshold_jitter..=scene.threshold_jitter)
            } else {
                0.0
            };
            (scene.contrast * (1.0 + j)).max(0.05 * scene.contrast)
        })
        .collect()
}

fn simulate_pixel(
    scene: &SyntheticScene,
    thresholds: &[f64],
    x: usize,
    y: usize,
    substeps: usize,
    events: &mut Vec<Event>,
) -> Result<()> {
    let c = thresholds[y * scene.width() + x];
    let (fu, fv) = scene.flow.at(x, y);
    let level = |t: f64| {
        let frac = t / scene.duration;
        sample_bilinear_clamped(&scene.intensity0.data, x as f64 - frac * fu, y as f64 - frac * fv)
    };
    let dt = scene.duration / substeps as f64;
    let mut reference = level(0.0);
    let mut prev = reference;
    let mut last_emit = f64::NEG_INFINITY;
    for j in 1..=substeps {
        let t0 = (j - 1) as f64 * dt;
        let t1 = if j == substeps { scene.duration } else { j as f64 * dt };
        let cur = level(t1);
        if (cur - prev).abs() > 4.0 * scene.contrast {
            return Err(Error::UndersampledSimulation);
        }
        loop {
            let (target, polarity) = if cur - reference >= c {
                (reference + c, 1i8)
            } else if reference - cur >= c {
                (reference - c, -1i8)
            } else {
                break;
            };
            let s = if (cur - prev).abs() < f64::MIN_POSITIVE {
                1.0
            } else {
                ((target - prev) / (cur - prev)).clamp(0.0, 1.0)
            };
            let t_cross = t0 + s * (t1 - t0);
            if t_cross >= last_emit + scene.refractory {
                events.push(Event { t: t_cross.min(scene.duration), x: x as u16, y: y as u16, p: polarity });
                last_emit = t_cross;
            }
            reference = target;
        }
        prev = cur;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checker_extremes() {
        let l = render_pattern(Pattern::Checker { period: 8 }, 32, 32);
        assert_eq!(l.data[(0, 0)], 0.2);
        assert_eq!(l.data[(0, 8)], 1.2);
        assert_eq!(l.data[(8, 0)], 1.2);
    }

    #[test]
    fn noise_is_deterministic() {
        let a = render_pattern(Pattern::SmoothedNoise { scale: 3, seed: 42 }, 24, 24);
        let b = render_pattern(Pattern::SmoothedNoise { scale: 3, seed: 42 }, 24, 24);
        assert_eq!(a.data, b.data);
        let c = render_pattern(Pattern::SmoothedNoise { scale: 3, seed: 43 }, 24, 24);
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn step_edge_single_transition_column() {
        let l = render_pattern(Pattern::StepEdge { position: 16.0, height: 1.0 }, 8, 32);
        let mut transitions = 0;
        for x in 0..31 {
            let d = (l.data[(0, x + 1)] - l.data[(0, x)]).abs();
            if d > 0.0 {
                transitions += 1;
                assert!((d - 1.0).abs() < 1e-6);
            }
        }
        assert_eq!(transitions, 1);
    }

    #[test]
    fn constant_pattern_emits_nothing() {
        let scene = SyntheticScene::new(
            LogIntensity::constant(16, 16, 0.8),
            FlowField::constant(16, 16, (4.0, 2.0)),
            0.1,
            0.2,
        )
        .unwrap();
        let slice = simulate_events(&scene, 32).unwrap();
        assert!(slice.is_empty());
    }

    #[test]
    fn intensity_at_zero_is_initial_pattern() {
        let l0 = render_pattern(Pattern::Checker { period: 4 }, 16, 16);
        let scene =
            SyntheticScene::new(l0.clone(), FlowField::constant(16, 16, (3.0, 1.0)), 0.1, 0.2).unwrap();
        assert_eq!(intensity_at(&scene, 0.0).data, l0.data);
    }

    #[test]
    fn intensity_at_end_integer_flow_is_shift() {
        let l0 = render_pattern(Pattern::Checker { period: 4 }, 16, 16);
        let scene =
            SyntheticScene::new(l0.clone(), FlowField::constant(16, 16, (3.0, 1.0)), 0.1, 0.2).unwrap();
        let end = intensity_at(&scene, 0.1);
        for y in 1..16 {
            for x in 3..16 {
                assert_eq!(end.data[(y, x)], l0.data[(y - 1, x - 3)]);
            }
        }
    }

    // Closed-form oracle: mid-time field equals half-displacement bilinear
    // sampling of the initial pattern.
    #[test]
    fn intensity_midtime_matches_direct_bilinear() {
        let l0 = render_pattern(Pattern::SmoothedNoise { scale: 2, seed: 5 }, 20, 20);
        let scene =
            SyntheticScene::new(l0.clone(), FlowField::constant(20, 20, (3.0, 1.0)), 0.2, 0.2).unwrap();
        let mid = intensity_at(&scene, 0.1);
        for y in 0..20 {
            for x in 0..20 {
                let want = sample_bilinear_clamped(&l0.data, x as f64 - 1.5, y as f64 - 0.5) as f32;
                assert_eq!(mid.data[(y, x)], want);
            }
        }
    }

    #[test]
    fn undersampled_simulation_rejected() {
        // A full-range checker edge crossing a pixel within one substep.
        let l0 = render_pattern(Pattern::StepEdge { position: 8.0, height: 1.3 }, 8, 16);
        let scene = SyntheticScene::new(l0, FlowField::constant(8, 16, (8.0, 0.0)), 0.1, 0.2).unwrap();
        let err = simulate_events(&scene, 2).unwrap_err();
        assert!(matches!(err, Error::UndersampledSimulation));
    }

    // Closed-form threshold-crossing oracle: a step edge of height 3C sweeping
    // across a pixel leaves exactly 3 events of one polarity there.
    #[test]
    fn step_edge_crossing_count() {
        let c = 0.2;
        let l0 = render_pattern(Pattern::StepEdge { position: 10.0, height: 3.0 * c }, 6, 24);
        let scene = SyntheticScene::new(l0.clone(), FlowField::constant(6, 24, (-3.0, 0.0)), 0.1, c).unwrap();
        let slice = simulate_events(&scene, 256).unwrap();
        // pixel x = 8 samples positions 8..11 and so sweeps the full bilinear
        // ramp between columns 9 and 10
        let target: Vec<&Event> = slice.events().iter().filter(|e| e.x == 8 && e.y == 2).collect();
        let start = sample_bilinear_clamped(&l0.data, 8.0, 2.0);
        let end = sample_bilinear_clamped(&l0.data, 8.0 + 3.0, 2.0);
        let expected = crossing_count_oracle(start, end, c);
        assert_eq!(target.len(), expected, "events at (11,2): {:?}", target);
        assert!(target.iter().all(|e| e.p == 1));
        assert_eq!(expected, 3);
    }

    fn crossing_count_oracle(start: f64, end: f64, c: f64) -> usize {
        let mut reference = start;
        let mut n = 0;
        while end - reference >= c {
            reference += c;
            n += 1;
        }
        while reference - end >= c {
            reference -= c;
            n += 1;
        }
        n
    }

    #[test]
    fn polarity_histogram_swaps_under_flow_reversal() {
        let l0 = render_pattern(Pattern::Checker { period: 8 }, 32, 32);
        let fwd = SyntheticScene::new(l0.clone(), FlowField::constant(32, 32, (3.0, 0.0)), 0.1, 0.2).unwrap();
        let bwd = SyntheticScene::new(l0, FlowField::constant(32, 32, (-3.0, 0.0)), 0.1, 0.2).unwrap();
        let count = |s: &EventSlice| {
            let pos = s.events().iter().filter(|e| e.p == 1).count();
            (pos, s.len() - pos)
        };
        let (fp, fneg) = count(&simulate_events(&fwd, 128).unwrap());
        let (bp, bneg) = count(&simulate_events(&bwd, 128).unwrap());
        assert_eq!((fp, fneg), (bneg, bp));
    }

    #[test]
    fn event_count_scales_inversely_with_contrast() {
        // strong checker: the 1.25 edge height dwarfs the tested thresholds,
        // keeping threshold-quantization losses small
        let l0 = LogIntensity::new(Array2::from_shape_fn((48, 48), |(y, x)| {
            if (x / 8 + y / 8) % 2 == 0 {
                0.1
            } else {
                1.35
            }
        }));
        let mut masses = Vec::new();
        for c in [0.1, 0.2, 0.4] {
            let scene = SyntheticScene::new(l0.clone(), FlowField::constant(48, 48, (3.0, 1.0)), 0.1, c).unwrap();
            let n = simulate_events(&scene, 256).unwrap().len();
            masses.push(n as f64 * c);
        }
        for m in &masses {
            let rel = (m - masses[1]).abs() / masses[1];
            assert!(rel < 0.15, "N*C values {:?}", masses);
        }
    }

    #[test]
    fn substep_doubling_converged() {
        let l0 = render_pattern(Pattern::Checker { period: 8 }, 32, 32);
        let scene = SyntheticScene::new(l0, FlowField::constant(32, 32, (3.0, 1.0)), 0.1, 0.2).unwrap();
        let a = simulate_events(&scene, 256).unwrap().len() as f64;
        let b = simulate_events(&scene, 512).unwrap().len() as f64;
        assert!((a - b).abs() / b < 0.01, "counts {a} vs {b}");
    }
}
