use crate::error::{Error, Result};
use crate::network::ChannelRealization;
use crate::optimizers::{run_iwf, run_mxl, StepPolicy};

/// Default per-round improvement tolerance of the water-filling oracle.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
/// Default length of the exact-gradient cross-check run.
pub const DEFAULT_MXL_ITERATIONS: usize = 100_000;
/// Relative agreement required between the two oracles.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-4;
/// Round cap of the water-filling oracle.
pub const MAX_ROUNDS: usize = 10_000;

/// Optimal sum rate from two independent solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceOptimum {
    /// The larger of the two estimates.
    pub value: f64,
    pub iwf: f64,
    pub iwf_rounds: usize,
    /// Last-iterate rate of exact-gradient learning, if it was run.
    pub mxl: Option<f64>,
    /// Whether the two agree within [`CONSISTENCY_TOLERANCE`] relative.
    pub consistent: bool,
}

/// Step schedule of the exact-gradient cross-check.
pub fn cross_check_policy() -> StepPolicy {
    StepPolicy::power_law(1.0, 0.0, 0.0, 0.0)
}

/// Optimal sum rate via iterative water-filling to `tol`, cross-checked by
/// `mxl_iterations` of exact-gradient learning (skipped when zero).
pub fn reference_optimum_with(ch: &ChannelRealization, tol: f64, mxl_iterations: usize) -> Result<ReferenceOptimum> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let iwf_tr = run_iwf(ch, MAX_ROUNDS, tol)?;
    let iwf = iwf_tr.last().map(|r| r.base_rate).unwrap_or(0.0);
    let (mxl, consistent) = if mxl_iterations > 0 {
        let tr = run_mxl(ch, &cross_check_policy(), mxl_iterations)?;
        let m = tr.last().map(|r| r.base_rate).unwrap_or(0.0);
        let scale = iwf.abs().max(m.abs()).max(f64::MIN_POSITIVE);
        (Some(m), (iwf - m).abs() <= CONSISTENCY_TOLERANCE * scale || (iwf == 0.0 && m == 0.0))
    } else {
        (None, true)
    };
    Ok(ReferenceOptimum {
        value: mxl.map_or(iwf, |m| m.max(iwf)),
        iwf,
        iwf_rounds: iwf_tr.len(),
        mxl,
        consistent,
    })
}

/// [`reference_optimum_with`] using the default cross-check length.
pub fn reference_optimum(ch: &ChannelRealization, tol: f64) -> Result<ReferenceOptimum> {
    reference_optimum_with(ch, tol, DEFAULT_MXL_ITERATIONS)
}
