//! The combined objective over a pair of consecutive event windows.

pub mod cmax;
pub mod phe;
pub mod tc;
pub mod tv;

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::event::{predecessor_pairs, EventSlice, PredecessorPair};
use crate::flow::FlowField;
use crate::intensity::LogIntensity;
use crate::warp::IweKernel;

pub use cmax::{cmax_loss, cmax_value, CmaxResult};
pub use phe::{phe_loss, PheResult};
pub use tc::{tc_loss, TcResult};
pub use tv::{tv_loss, TvResult};

/// Reference-time policy for the contrast-maximization term. The photometric
/// term always uses the end time of its sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TRefPolicy {
    /// Uniformly random within the window span, drawn from the caller's
    /// generator once per sample per evaluation.
    #[default]
    RandomInSpan,
    Midpoint,
    End,
}

/// Weights and shared constants of the combined objective.
#[derive(Debug, Clone)]
pub struct LossConfig {
    /// Term weights: photometric, contrast, flow TV, intensity TV, temporal
    /// consistency.
    pub weights: [f64; 5],
    /// Contrast threshold in log-intensity units.
    pub contrast: f64,
    pub iwe_kernel: IweKernel,
    /// Pooling stride of the coarse flow parameterization.
    pub stride: usize,
    pub t_ref_policy: TRefPolicy,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            weights: [30.0, 1.0, 10.0, 0.001, 1.0],
            contrast: 0.2,
            iwe_kernel: IweKernel::Bilinear,
            stride: 16,
            t_ref_policy: TRefPolicy::RandomInSpan,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.contrast > 0.0) {
            return Err(Error::InvalidConfig("contrast threshold must be > 0".into()));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidConfig("loss weights must be non-negative".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidConfig("stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// An event window with its predecessor pairs precomputed.
#[derive(Debug, Clone)]
pub struct PreparedSlice {
    pub slice: EventSlice,
    pub pairs: Vec<PredecessorPair>,
}

impl PreparedSlice {
    pub fn new(slice: EventSlice) -> Self {
        let pairs = predecessor_pairs(&slice);
        Self { slice, pairs }
    }
}

/// Optimization variables for a pair of consecutive windows. Flow fields must
/// be coarse-backed so gradients can be projected onto the parameter grids.
#[derive(Debug, Clone)]
pub struct PairState {
    pub flow_i: FlowField,
    pub intensity_i: LogIntensity,
    pub flow_ip1: FlowField,
    pub intensity_ip1: LogIntensity,
}

/// Per-term values (summed over the two samples), the weighted total, and
/// gradients with respect to the coarse flow parameters and the dense
/// intensity fields.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub phe: f64,
    pub cmax: f64,
    pub tv_flow: f64,
    pub tv_intensity: f64,
    pub tc: f64,
    pub total: f64,
    pub d_coarse_u_i: Array2<f64>,
    pub d_coarse_v_i: Array2<f64>,
    pub d_coarse_u_ip1: Array2<f64>,
    pub d_coarse_v_ip1: Array2<f64>,
    pub d_intensity_i: Array2<f64>,
    pub d_intensity_ip1: Array2<f64>,
    pub warnings: Vec<String>,
}

/// Draws the contrast-term reference time for one sample.
fn cmax_t_ref<R: Rng>(policy: TRefPolicy, slice: &EventSlice, rng: &mut R) -> f64 {
    match policy {
        TRefPolicy::RandomInSpan => rng.gen_range(slice.t_start..slice.t_end),
        TRefPolicy::Midpoint => 0.5 * (slice.t_start + slice.t_end),
        TRefPolicy::End => slice.t_end,
    }
}

struct SampleTerms {
    phe: f64,
    cmax: f64,
    tv_flow: f64,
    tv_intensity: f64,
    d_flow_u: Array2<f64>,
    d_flow_v: Array2<f64>,
    d_intensity: Array2<f64>,
}

fn check_finite(term: &str, value: f64, grads: &[&Array2<f64>]) -> Result<()> {
    if !value.is_finite() || grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFiniteGradient { term: term.into() });
    }
    Ok(())
}

fn sample_terms<R: Rng>(
    label: &str,
    flow: &FlowField,
    intensity: &LogIntensity,
    prep: &PreparedSlice,
    config: &LossConfig,
    rng: &mut R,
    warnings: &mut Vec<String>,
) -> Result<SampleTerms> {
    let (h, w) = intensity.data.dim();
    let [l_phe, l_cmax, l_ftv, l_itv, _] = config.weights;
    let mut out = SampleTerms {
        phe: 0.0,
        cmax: 0.0,
        tv_flow: 0.0,
        tv_intensity: 0.0,
        d_flow_u: Array2::zeros((h, w)),
        d_flow_v: Array2::zeros((h, w)),
        d_intensity: Array2::zeros((h, w)),
    };

    if l_phe > 0.0 {
        let r = phe_loss(intensity, flow, &prep.slice, &prep.pairs, config.contrast, prep.slice.t_end);
        check_finite("phe", r.value, &[&r.d_intensity, &r.d_flow_u, &r.d_flow_v])?;
        if r.n_valid == 0 {
            warnings.push(format!("photometric term empty for sample {label}"));
        }
        out.phe = r.value;
        out.d_intensity.scaled_add(l_phe, &r.d_intensity);
        out.d_flow_u.scaled_add(l_phe, &r.d_flow_u);
        out.d_flow_v.scaled_add(l_phe, &r.d_flow_v);
    }

    if l_cmax > 0.0 {
        let t_ref = cmax_t_ref(config.t_ref_policy, &prep.slice, rng);
        match cmax_loss(flow, &prep.slice, t_ref) {
            Ok(r) => {
                check_finite("cmax", r.value, &[&r.d_flow_u, &r.d_flow_v])?;
                out.cmax = r.value;
                out.d_flow_u.scaled_add(l_cmax, &r.d_flow_u);
                out.d_flow_v.scaled_add(l_cmax, &r.d_flow_v);
            }
            Err(Error::DegenerateIwe) => {
                warnings.push(format!("degenerate IWE for sample {label}; contrast term skipped"));
            }
            Err(e) => return Err(e),
        }
    }

    if l_ftv > 0.0 {
        let r = tv_loss(&[&flow.u, &flow.v]);
        check_finite("tv_flow", r.value, &[&r.grads[0], &r.grads[1]])?;
        out.tv_flow = r.value;
        out.d_flow_u.scaled_add(l_ftv, &r.grads[0]);
        out.d_flow_v.scaled_add(l_ftv, &r.grads[1]);
    }

    if l_itv > 0.0 {
        let r = tv_loss(&[&intensity.data]);
        check_finite("tv_intensity", r.value, &[&r.grads[0]])?;
        out.tv_intensity = r.value;
        out.d_intensity.scaled_add(l_itv, &r.grads[0]);
    }

    Ok(out)
}

/// Evaluates the full objective over a slice pair and accumulates gradients.
///
/// Photometric, contrast and both TV terms are evaluated per sample and
/// summed; the temporal-consistency term couples the pair once through the
/// second sample's flow. Degenerate terms (no valid pairs, flat IWE, fully
/// invalid warp mask) contribute zero with a warning instead of aborting.
pub fn total_loss<R: Rng>(
    state: &PairState,
    prep_i: &PreparedSlice,
    prep_ip1: &PreparedSlice,
    config: &LossConfig,
    rng: &mut R,
) -> Result<LossReport> {
    config.validate()?;
    if state.flow_i.coarse().is_none() || state.flow_ip1.coarse().is_none() {
        return Err(Error::InvalidConfig("pair-state flow fields must be coarse-backed".into()));
    }
    if let IweKernel::Gaussian { .. } = config.iwe_kernel {
        return Err(Error::InvalidConfig(
            "gradient-mode contrast term requires the bilinear IWE kernel".into(),
        ));
    }
    let mut warnings = Vec::new();
    let [_, _, _, _, l_tc] = config.weights;

    let mut s_i = sample_terms("i", &state.flow_i, &state.intensity_i, prep_i, config, rng, &mut warnings)?;
    let mut s_ip1 = sample_terms(
        "i+1",
        &state.flow_ip1,
        &state.intensity_ip1,
        prep_ip1,
        config,
        rng,
        &mut warnings,
    )?;

    let mut tc_value = 0.0;
    let mut d_int_i_tc: Option<Array2<f64>> = None;
    if l_tc > 0.0 {
        let r = tc_loss(&state.intensity_i, &state.intensity_ip1, &state.flow_ip1);
        check_finite(
            "tc",
            r.value,
            &[&r.d_intensity_i, &r.d_intensity_ip1, &r.d_flow_u, &r.d_flow_v],
        )?;
        if r.n_valid == 0 {
            warnings.push("temporal-consistency mask fully invalid; term skipped".into());
        }
        tc_value = r.value;
        s_ip1.d_flow_u.scaled_add(l_tc, &r.d_flow_u);
        s_ip1.d_flow_v.scaled_add(l_tc, &r.d_flow_v);
        s_ip1.d_intensity.scaled_add(l_tc, &r.d_intensity_ip1);
        let mut d = r.d_intensity_i;
        d.mapv_inplace(|v| v * l_tc);
        d_int_i_tc = Some(d);
    }
    if let Some(d) = d_int_i_tc {
        s_i.d_intensity += &d;
    }

    let (d_coarse_u_i, d_coarse_v_i) = state
        .flow_i
        .scatter_to_coarse(&s_i.d_flow_u, &s_i.d_flow_v)
        .expect("flow_i is coarse-backed");
    let (d_coarse_u_ip1, d_coarse_v_ip1) = state
        .flow_ip1
        .scatter_to_coarse(&s_ip1.d_flow_u, &s_ip1.d_flow_v)
        .expect("flow_ip1 is coarse-backed");

    let [l1, l2, l3, l4, l5] = config.weights;
    let phe = s_i.phe + s_ip1.phe;
    let cmax = s_i.cmax + s_ip1.cmax;
    let tv_flow = s_i.tv_flow + s_ip1.tv_flow;
    let tv_intensity = s_i.tv_intensity + s_ip1.tv_intensity;
    let total = l1 * phe + l2 * cmax + l3 * tv_flow + l4 * tv_intensity + l5 * tc_value;

    Ok(LossReport {
        phe,
        cmax,
        tv_flow,
        tv_intensity,
        tc: tc_value,
        total,
        d_coarse_u_i,
        d_coarse_v_i,
        d_coarse_u_ip1,
        d_coarse_v_ip1,
        d_intensity_i: s_i.d_intensity,
        d_intensity_ip1: s_ip1.d_intensity,
        warnings,
    })
}
