//! Cross-checks between the event simulator and the loss terms: the losses
//! must recognize the generating flow and intensity as near-optimal.

use evjoint_core::event::{predecessor_pairs, EventSlice};
use evjoint_core::loss::{cmax_value, phe_loss};
use evjoint_core::sim::{intensity_at, render_pattern, simulate_events, Pattern, SyntheticScene};
use evjoint_core::warp::IweKernel;
use evjoint_core::{fwl, slice_events, FlowField, SlicePolicy};

const SIZE: usize = 64;
const WINDOW_FLOW: (f32, f32) = (3.0, 1.0);

/// A scene moving (3, 1) px per 0.1 s window, simulated over two windows.
fn two_window_scene(pattern: Pattern, contrast: f64) -> (SyntheticScene, Vec<EventSlice>) {
    let l0 = render_pattern(pattern, SIZE, SIZE);
    let scene = SyntheticScene::new(
        l0,
        FlowField::constant(SIZE, SIZE, (2.0 * WINDOW_FLOW.0, 2.0 * WINDOW_FLOW.1)),
        0.2,
        contrast,
    )
    .unwrap();
    let events = simulate_events(&scene, 512).unwrap();
    let windows = slice_events(&events, SlicePolicy::FixedDuration(0.1)).unwrap();
    assert_eq!(windows.len(), 2);
    (scene, windows)
}

fn phe_at(window: &EventSlice, scene: &SyntheticScene, t_ref: f64, flow: &FlowField, c: f64) -> f64 {
    let pairs = predecessor_pairs(window);
    assert!(pairs.len() > 150, "window too sparse: {} pairs", pairs.len());
    let l_ref = intensity_at(scene, t_ref);
    phe_loss(&l_ref, flow, window, &pairs, c, window.t_end).value
}

#[test]
fn phe_near_zero_at_ground_truth_checker() {
    let c = 0.2;
    let (scene, windows) = two_window_scene(Pattern::Checker { period: 8 }, c);
    let gt = FlowField::constant(SIZE, SIZE, WINDOW_FLOW);
    for (w, t_ref) in windows.iter().zip([0.1, 0.2]) {
        let v = phe_at(w, &scene, t_ref, &gt, c);
        assert!(v < 0.1 * c, "phe at ground truth = {v}");
    }
}

#[test]
fn phe_near_zero_at_ground_truth_noise() {
    let c = 0.2;
    let (scene, windows) = two_window_scene(Pattern::SmoothedNoise { scale: 1, seed: 11 }, c);
    let gt = FlowField::constant(SIZE, SIZE, WINDOW_FLOW);
    for (w, t_ref) in windows.iter().zip([0.1, 0.2]) {
        let v = phe_at(w, &scene, t_ref, &gt, c);
        assert!(v < 0.1 * c, "phe at ground truth = {v}");
    }
}

#[test]
fn phe_prefers_ground_truth_over_perturbed_flow() {
    let c = 0.2;
    for pattern in [Pattern::Checker { period: 8 }, Pattern::SmoothedNoise { scale: 1, seed: 11 }] {
        let (scene, windows) = two_window_scene(pattern, c);
        let gt = FlowField::constant(SIZE, SIZE, WINDOW_FLOW);
        let off = FlowField::constant(SIZE, SIZE, (WINDOW_FLOW.0 + 1.0, WINDOW_FLOW.1));
        let v_gt = phe_at(&windows[0], &scene, 0.1, &gt, c);
        let v_off = phe_at(&windows[0], &scene, 0.1, &off, c);
        assert!(v_gt < v_off, "phe {v_gt} !< perturbed {v_off}");
    }
}

#[test]
fn cmax_orders_ground_truth_below_zero_flow() {
    let (_, windows) = two_window_scene(Pattern::Checker { period: 8 }, 0.2);
    let gt = FlowField::constant(SIZE, SIZE, WINDOW_FLOW);
    let zero = FlowField::zeros(SIZE, SIZE);
    for w in &windows {
        let t_ref = 0.5 * (w.t_start + w.t_end);
        let v_gt = cmax_value(&gt, w, t_ref, IweKernel::Bilinear).unwrap();
        let v_zero = cmax_value(&zero, w, t_ref, IweKernel::Bilinear).unwrap();
        assert!(v_gt < v_zero, "cmax gt {v_gt} !< zero {v_zero}");
    }
}

#[test]
fn cmax_gaussian_kernel_orders_the_same_way() {
    let (_, windows) = two_window_scene(Pattern::Checker { period: 8 }, 0.2);
    let gt = FlowField::constant(SIZE, SIZE, WINDOW_FLOW);
    let zero = FlowField::zeros(SIZE, SIZE);
    let w = &windows[0];
    let t_ref = 0.5 * (w.t_start + w.t_end);
    let v_gt = cmax_value(&gt, w, t_ref, IweKernel::gaussian()).unwrap();
    let v_zero = cmax_value(&zero, w, t_ref, IweKernel::gaussian()).unwrap();
    assert!(v_gt < v_zero);
}

#[test]
fn fwl_sharpens_at_ground_truth() {
    for pattern in [Pattern::Checker { period: 8 }, Pattern::SmoothedNoise { scale: 1, seed: 11 }] {
        let (_, windows) = two_window_scene(pattern, 0.2);
        let gt = FlowField::constant(SIZE, SIZE, WINDOW_FLOW);
        for w in &windows {
            let ratio_gt = fwl(w, &gt).unwrap();
            let ratio_zero = fwl(w, &FlowField::zeros(SIZE, SIZE)).unwrap();
            assert_eq!(ratio_zero, 1.0);
            assert!(ratio_gt > 1.0, "fwl at gt = {ratio_gt}");
        }
    }
}
