//! The MIMO multiple-access channel: channel draws, sum and individual rates,
//! rate gradients, and the per-user interference and effective channels used
//! by water-filling.
//!
//! Noise at the receiver is normalised to identity covariance. Rates are in
//! nats. User indices are zero-based throughout.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hermitian::{logdet_psd, tangent_project, CMatrix, Complex, HermitianMatrix};

const FEASIBILITY_TOL: f64 = 1e-10;

/// One transmitter: its `N x m_k` channel matrix and power budget.
#[derive(Clone, Debug, PartialEq)]
pub struct UserChannel {
    pub channel: CMatrix,
    pub power: f64,
}

/// Static channel state for a run.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    rx_antennas: usize,
    users: Vec<UserChannel>,
}

impl ChannelRealization {
    pub fn new(rx_antennas: usize, users: Vec<UserChannel>) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::config("users", "at least one user is required"));
        }
        if rx_antennas == 0 {
            return Err(Error::config("rx_antennas", "must be positive"));
        }
        for (k, u) in users.iter().enumerate() {
            if u.channel.rows() != rx_antennas {
                return Err(Error::dims(
                    format!("{rx_antennas} channel rows for user {k}"),
                    u.channel.rows(),
                ));
            }
            if u.channel.cols() < 2 {
                return Err(Error::config(
                    "tx_antennas",
                    format!("user {k} must have at least two antennas"),
                ));
            }
            if !u.channel.is_finite() {
                return Err(Error::InvalidInput(format!("channel of user {k} is not finite")));
            }
            if !(u.power > 0.0 && u.power.is_finite()) {
                return Err(Error::config("power", format!("user {k} power must be positive")));
            }
        }
        Ok(Self { rx_antennas, users })
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn rx_antennas(&self) -> usize {
        self.rx_antennas
    }

    pub fn tx_antennas(&self, k: usize) -> usize {
        self.users[k].channel.cols()
    }

    pub fn antennas(&self) -> Vec<usize> {
        self.users.iter().map(|u| u.channel.cols()).collect()
    }

    pub fn user(&self, k: usize) -> &UserChannel {
        &self.users[k]
    }

    pub fn users(&self) -> &[UserChannel] {
        &self.users
    }

    /// Same geometry with every channel matrix multiplied by `factor`.
    pub fn with_channel_scale(&self, factor: f64) -> Self {
        Self {
            rx_antennas: self.rx_antennas,
            users: self
                .users
                .iter()
                .map(|u| UserChannel {
                    channel: u.channel.scaled(factor),
                    power: u.power,
                })
                .collect(),
        }
    }

    pub fn with_powers(&self, powers: &[f64]) -> Result<Self> {
        if powers.len() != self.users.len() {
            return Err(Error::dims(self.users.len(), powers.len()));
        }
        let users = self
            .users
            .iter()
            .zip(powers)
            .map(|(u, &p)| UserChannel {
                channel: u.channel.clone(),
                power: p,
            })
            .collect();
        Self::new(self.rx_antennas, users)
    }
}

/// Draws i.i.d. circularly-symmetric complex Gaussian channels with
/// per-entry variance `scale^2`.
pub fn generate_channels(
    num_users: usize,
    rx_antennas: usize,
    antennas: &[usize],
    powers: &[f64],
    scale: f64,
    seed: u64,
) -> Result<ChannelRealization> {
    if num_users == 0 {
        return Err(Error::config("users", "must be at least 1"));
    }
    if rx_antennas == 0 {
        return Err(Error::config("rx_antennas", "must be at least 1"));
    }
    if antennas.len() != num_users {
        return Err(Error::config(
            "tx_antennas",
            format!("expected {num_users} entries, found {}", antennas.len()),
        ));
    }
    if powers.len() != num_users {
        return Err(Error::config(
            "powers",
            format!("expected {num_users} entries, found {}", powers.len()),
        ));
    }
    if let Some(k) = antennas.iter().position(|&m| m < 2) {
        return Err(Error::config(
            "tx_antennas",
            format!("user {k} must possess at least two antennas"),
        ));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::config("channel_scale", "must be positive and finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = scale / std::f64::consts::SQRT_2;
    let users = antennas
        .iter()
        .zip(powers)
        .map(|(&m, &power)| {
            let channel = CMatrix::from_fn(rx_antennas, m, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex::new(sigma * re, sigma * im)
            });
            UserChannel { channel, power }
        })
        .collect();
    ChannelRealization::new(rx_antennas, users)
}

/// Per-user input covariance matrices `Q = (Q_1, ..., Q_K)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceProfile {
    blocks: Vec<HermitianMatrix>,
}

impl CovarianceProfile {
    /// Checked constructor: every block must have unit trace and be PSD
    /// (both within `1e-10`).
    pub fn new(blocks: Vec<HermitianMatrix>) -> Result<Self> {
        let profile = Self { blocks };
        profile.check_feasible()?;
        Ok(profile)
    }

    /// Wraps blocks without the feasibility check. Rates are defined on any
    /// profile keeping the aggregate covariance positive definite.
    pub fn from_blocks(blocks: Vec<HermitianMatrix>) -> Self {
        Self { blocks }
    }

    /// `I / m_k` for every user.
    pub fn uniform(antennas: &[usize]) -> Self {
        Self {
            blocks: antennas
                .iter()
                .map(|&m| HermitianMatrix::scaled_identity(m, 1.0 / m as f64))
                .collect(),
        }
    }

    pub fn check_feasible(&self) -> Result<()> {
        for (k, q) in self.blocks.iter().enumerate() {
            let tr = q.trace();
            if (tr - 1.0).abs() > FEASIBILITY_TOL {
                return Err(Error::InvalidInput(format!(
                    "block {k} has trace {tr}, expected 1"
                )));
            }
            let min = q.eig()?.min();
            if min < -FEASIBILITY_TOL {
                return Err(Error::InvalidInput(format!(
                    "block {k} has negative eigenvalue {min:e}"
                )));
            }
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, k: usize) -> &HermitianMatrix {
        &self.blocks[k]
    }

    pub fn block_mut(&mut self, k: usize) -> &mut HermitianMatrix {
        &mut self.blocks[k]
    }

    pub fn blocks(&self) -> &[HermitianMatrix] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<HermitianMatrix> {
        self.blocks
    }

    /// Random feasible profile: each block is `A A^H / tr(A A^H)` for a
    /// complex Gaussian `A`.
    pub fn random<R: rand::Rng + ?Sized>(antennas: &[usize], rng: &mut R) -> Self {
        Self {
            blocks: antennas.iter().map(|&m| random_density(m, rng)).collect(),
        }
    }

    /// Copy with user `k`'s block replaced.
    pub fn with_block(&self, k: usize, block: HermitianMatrix) -> Self {
        let mut out = self.clone();
        out.blocks[k] = block;
        out
    }
}

/// Random unit-trace PSD matrix of full rank (almost surely).
pub fn random_density<R: rand::Rng + ?Sized>(m: usize, rng: &mut R) -> HermitianMatrix {
    let a = CMatrix::from_fn(m, m, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex::new(re, im)
    });
    let gram = HermitianMatrix::identity(m).congruence(&a).expect("square");
    let tr = gram.trace();
    gram.scaled(1.0 / tr)
}

/// Euclidean rate gradients `G_k` and their traceless projections.
#[derive(Clone, Debug)]
pub struct GradientProfile {
    pub euclidean: Vec<HermitianMatrix>,
    pub tangent: Vec<HermitianMatrix>,
}

fn check_dims(q: &CovarianceProfile, ch: &ChannelRealization) -> Result<()> {
    if q.num_users() != ch.num_users() {
        return Err(Error::dims(
            format!("{} user blocks", ch.num_users()),
            q.num_users(),
        ));
    }
    for (k, block) in q.blocks().iter().enumerate() {
        if block.dim() != ch.tx_antennas(k) {
            return Err(Error::dims(
                format!("block {k} of size {}", ch.tx_antennas(k)),
                block.dim(),
            ));
        }
    }
    Ok(())
}

fn interference_sum(
    q: &CovarianceProfile,
    ch: &ChannelRealization,
    skip: Option<usize>,
) -> Result<HermitianMatrix> {
    check_dims(q, ch)?;
    let mut w = HermitianMatrix::identity(ch.rx_antennas());
    for (k, (user, block)) in ch.users().iter().zip(q.blocks()).enumerate() {
        if Some(k) == skip {
            continue;
        }
        let term = block.congruence(&user.channel)?;
        w.add_scaled(user.power, &term);
    }
    Ok(w)
}

/// `W(Q) = I + sum_k P_k H_k Q_k H_k^H`.
pub fn aggregate_covariance(
    q: &CovarianceProfile,
    ch: &ChannelRealization,
) -> Result<HermitianMatrix> {
    interference_sum(q, ch, None)
}

/// `R(Q) = log det W(Q)` in nats.
pub fn sum_rate(q: &CovarianceProfile, ch: &ChannelRealization) -> Result<f64> {
    logdet_psd(&aggregate_covariance(q, ch)?)
}

/// Rate of user `k` under single-user decoding: `R(Q) - R(Q with Q_k = 0)`.
pub fn individual_rate(k: usize, q: &CovarianceProfile, ch: &ChannelRealization) -> Result<f64> {
    if k >= ch.num_users() {
        return Err(Error::InvalidInput(format!(
            "user index {k} out of range for {} users",
            ch.num_users()
        )));
    }
    let total = sum_rate(q, ch)?;
    let without = logdet_psd(&mui_matrix(k, q, ch)?)?;
    Ok(total - without)
}

// Inverse of a positive definite matrix via its spectrum, rejecting
// eigenvalues at or below 1e-14 * ||W||_inf.
fn pd_spectral_map(w: &HermitianMatrix, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
    let eig = w.eig()?;
    let threshold = 1e-14 * w.inf_norm();
    if !(eig.min() > threshold) {
        return Err(Error::NotPositiveDefinite {
            pivot: eig.min(),
            threshold,
        });
    }
    let values: Vec<f64> = eig.eigenvalues.iter().map(|&l| f(l)).collect();
    Ok(HermitianMatrix::from_spectrum(&values, &eig.vectors))
}

/// `G_k = P_k H_k^H W(Q)^{-1} H_k` for every user, with traceless parts.
pub fn rate_gradient(q: &CovarianceProfile, ch: &ChannelRealization) -> Result<GradientProfile> {
    let w = aggregate_covariance(q, ch)?;
    let w_inv = pd_spectral_map(&w, |l| 1.0 / l)?;
    let euclidean = ch
        .users()
        .iter()
        .map(|u| {
            w_inv
                .adjoint_congruence(&u.channel)
                .map(|g| g.scaled(u.power))
        })
        .collect::<Result<Vec<_>>>()?;
    let tangent = euclidean.iter().map(tangent_project).collect();
    Ok(GradientProfile { euclidean, tangent })
}

/// Interference-plus-noise covariance seen by user `k`:
/// `W_k = I + sum_{j != k} P_j H_j Q_j H_j^H`.
pub fn mui_matrix(k: usize, q: &CovarianceProfile, ch: &ChannelRealization) -> Result<HermitianMatrix> {
    if k >= ch.num_users() {
        return Err(Error::InvalidInput(format!("user index {k} out of range")));
    }
    interference_sum(q, ch, Some(k))
}

/// Whitened channel `W_k^{-1/2} H_k`.
pub fn effective_channel(k: usize, q: &CovarianceProfile, ch: &ChannelRealization) -> Result<CMatrix> {
    let wk = mui_matrix(k, q, ch)?;
    let inv_sqrt = pd_spectral_map(&wk, |l| 1.0 / l.sqrt())?;
    inv_sqrt.as_matrix().matmul(&ch.user(k).channel)
}
