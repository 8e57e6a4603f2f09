//! Joint recovery of dense optical flow and log intensity from event-camera
//! streams, by direct first-order optimization of a combined objective:
//! photometric error over warped event pairs, contrast maximization of the
//! image of warped events, total-variation smoothness and temporal
//! consistency across consecutive windows.
//!
//! The crate also ships an event-generation simulator that provides ground
//! truth for verification, evaluation metrics, and the file formats used by
//! the command-line frontend.
//!
//! The data-parallel kernels run on rayon when the default `parallel`
//! feature is enabled and fall back to sequential execution otherwise; both
//! paths chunk and merge identically, so results are bit-stable across
//! thread counts.

pub mod error;
pub mod event;
pub mod flow;
pub mod intensity;
pub mod interp;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod par;
pub mod sim;
pub mod solver;
pub mod voxel;
pub mod warp;

pub use error::{Error, Result};
pub use event::{predecessor_pairs, slice_events, Event, EventSlice, PredecessorPair, SlicePolicy};
pub use flow::{CoarseFlow, FlowField};
pub use intensity::LogIntensity;
pub use interp::{sample_bilinear, sample_bilinear_clamped, Sampled};
pub use loss::{
    cmax_loss, cmax_value, phe_loss, tc_loss, total_loss, tv_loss, LossConfig, LossReport,
    PairState, PreparedSlice, TRefPolicy,
};
pub use metrics::{flow_metrics, fwl, image_metrics, normalize_robust, FlowMetrics, ImageMetrics};
pub use par::Exec;
pub use sim::{intensity_at, render_pattern, simulate_events, Pattern, SyntheticScene};
pub use solver::{estimate_pair, estimate_sequence, Adam, PairEstimate, SolverConfig, TraceEntry};
pub use voxel::{build_voxel_grid, VoxelGrid};
pub use warp::{splat_iwe, warp_events, warp_image_backward, warp_pair_positions, Iwe, IweKernel, WarpedEvents};
