//! Iterative schemes over the product of spectrahedra.
//!
//! The learning methods keep a score matrix `Y_k` per user, map it to a
//! covariance through [`exp_map`] and add scaled gradient estimates to the
//! scores. Water-filling baselines live in [`waterfill`].

mod learning;
mod policy;
mod regularizer;
pub mod waterfill;

pub use learning::{run_amxl0_plus, run_mxl, run_mxl0, run_mxl0_plus, RunStreams};
pub use policy::{
    heuristic_constants, validate_policy, ConditionCheck, HorizonVariant, PolicyMode, StepPolicy, UpdateLaw,
    ValidationReport, Verdict,
};
pub use regularizer::{entropy, fenchel_coupling, log_trace_exp};
pub use waterfill::{kkt_residual, run_iwf, run_swf, water_fill};

use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::network::CovarianceProfile;

/// Trace-normalised matrix exponential `exp(Y) / tr exp(Y)`.
///
/// The largest eigenvalue is subtracted first, so no entry of the
/// exponentiated spectrum exceeds one.
pub fn exp_map(y: &HermitianMatrix) -> Result<HermitianMatrix> {
    if !y.is_finite() {
        return Err(Error::InvalidInput("score matrix is not finite".into()));
    }
    let e = y.eig()?;
    let top = e.max();
    let w: Vec<f64> = e.eigenvalues.iter().map(|&l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|x| x / total).collect();
    let q = HermitianMatrix::from_spectrum(&p, &e.vectors);
    // Rounding in the reconstruction can move the trace off one by a few ulps.
    let tr = q.trace();
    Ok(q.scaled(1.0 / tr))
}

/// Per-user score matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreProfile {
    pub scores: Vec<HermitianMatrix>,
}

impl ScoreProfile {
    pub fn zeros(antennas: &[usize]) -> Self {
        Self {
            scores: antennas.iter().map(|&m| HermitianMatrix::zeros(m)).collect(),
        }
    }

    pub fn num_users(&self) -> usize {
        self.scores.len()
    }

    pub fn is_finite(&self) -> bool {
        self.scores.iter().all(HermitianMatrix::is_finite)
    }

    /// Covariance profile `(exp_map(Y_1), ..., exp_map(Y_K))`.
    pub fn to_profile(&self) -> Result<CovarianceProfile> {
        let blocks = self.scores.iter().map(exp_map).collect::<Result<Vec<_>>>()?;
        Ok(CovarianceProfile::from_blocks(blocks))
    }
}

/// `Y_k <- Y_k + gamma v_k` for every user.
pub fn dual_averaging_step(y: &mut ScoreProfile, v: &[HermitianMatrix], gamma: f64) -> Result<()> {
    if v.len() != y.scores.len() {
        return Err(Error::dims(format!("{} users", y.scores.len()), format!("{} users", v.len())));
    }
    for (k, (yk, vk)) in y.scores.iter_mut().zip(v).enumerate() {
        if yk.dim() != vk.dim() {
            return Err(Error::dims(
                format!("user {k}: {}x{}", yk.dim(), yk.dim()),
                format!("{}x{}", vk.dim(), vk.dim()),
            ));
        }
    }
    for (yk, vk) in y.scores.iter_mut().zip(v) {
        yk.add_scaled(gamma, vk);
    }
    Ok(())
}

/// Running mean update `Q_bar <- ((t - 1) Q_bar + Q_t) / t`.
pub fn update_ergodic_average(avg: &mut CovarianceProfile, q: &CovarianceProfile, t: usize) -> Result<()> {
    if t == 0 {
        return Err(Error::InvalidInput("ergodic averaging starts at t = 1".into()));
    }
    if avg.num_users() != q.num_users() {
        return Err(Error::dims(avg.num_users(), q.num_users()));
    }
    let w = 1.0 / t as f64;
    for k in 0..q.num_users() {
        let b = avg.block_mut(k);
        if b.dim() != q.block(k).dim() {
            return Err(Error::dims(b.dim(), q.block(k).dim()));
        }
        *b = b.scaled(1.0 - w);
        b.add_scaled(w, q.block(k));
    }
    Ok(())
}

/// One logged iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    /// Rate at the transmitted profile.
    pub realized_rate: f64,
    /// Rate at the unperturbed iterate `Q_t`.
    pub base_rate: f64,
    /// Rate at the running mean of `Q_1, ..., Q_t`.
    pub ergodic_rate: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Users that updated at this iteration, ascending.
    pub active_users: Vec<usize>,
}

/// Output of every iterative scheme.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<IterationRecord>,
    pub final_profile: CovarianceProfile,
    pub ergodic_average: CovarianceProfile,
    /// Sum rate after each single-user update (water-filling schemes only).
    pub update_rates: Vec<f64>,
    /// Wall-clock nanoseconds from the start of the run to the end of each
    /// iteration. Never part of [`Trajectory::same_path`].
    pub elapsed_ns: Vec<u64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Equality of everything except wall-clock timings.
    pub fn same_path(&self, other: &Trajectory) -> bool {
        self.records == other.records
            && self.final_profile == other.final_profile
            && self.ergodic_average == other.ergodic_average
            && self.update_rates == other.update_rates
    }

    /// `(t, R* - ergodic rate)` pairs.
    pub fn ergodic_gaps(&self, r_star: f64) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .map(|r| (r.t as f64, r_star - r.ergodic_rate))
            .collect()
    }
}
