use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    dual_averaging_step, update_ergodic_average, IterationRecord, ScoreProfile, StepPolicy,
    Trajectory, UpdateLaw,
};
use crate::error::{Error, Result};
use crate::estimators::{sample_traceless_sphere, safety_perturb, spsa_estimate, spsa_plus_estimate, SphereDirection};
use crate::hermitian::HermitianMatrix;
use crate::network::{rate_gradient, sum_rate, ChannelRealization, CovarianceProfile};

/// Independent random streams of one run.
///
/// All streams are ChaCha8 seeded from the same 64-bit seed. Stream 0 draws
/// the active user sets and stream `k + 1` the directions of user `k`, so a
/// user's directions do not depend on how many other users there are or on
/// the update law.
#[derive(Clone, Debug)]
pub struct RunStreams {
    pub law: ChaCha8Rng,
    pub users: Vec<ChaCha8Rng>,
}

impl RunStreams {
    pub const ALGORITHM: &'static str = "chacha8-rand_chacha-0.9/stream-per-user";

    pub fn new(seed: u64, num_users: usize) -> Self {
        let stream = |s: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(s);
            r
        };
        Self {
            law: stream(0),
            users: (0..num_users as u64).map(|k| stream(k + 1)).collect(),
        }
    }
}

fn check_horizon(iterations: usize) -> Result<()> {
    if iterations == 0 {
        return Err(Error::InvalidInput("at least one iteration is required".into()));
    }
    Ok(())
}

fn check_streams(streams: &RunStreams, ch: &ChannelRealization) -> Result<()> {
    if streams.users.len() != ch.num_users() {
        return Err(Error::dims(
            format!("{} user streams", ch.num_users()),
            streams.users.len(),
        ));
    }
    Ok(())
}

pub(super) fn all_users(k: usize) -> Vec<usize> {
    (0..k).collect()
}

/// Bookkeeping shared by the learning loops.
pub(super) struct Recorder {
    avg: CovarianceProfile,
    records: Vec<IterationRecord>,
    start: Instant,
    elapsed_ns: Vec<u64>,
}

impl Recorder {
    pub(super) fn new(first: &CovarianceProfile, iterations: usize) -> Self {
        Self {
            avg: first.clone(),
            records: Vec::with_capacity(iterations),
            start: Instant::now(),
            elapsed_ns: Vec::with_capacity(iterations),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub(super) fn push(
        &mut self,
        ch: &ChannelRealization,
        t: usize,
        q: &CovarianceProfile,
        base_rate: f64,
        realized_rate: f64,
        gamma: f64,
        delta: f64,
        active_users: Vec<usize>,
    ) -> Result<()> {
        update_ergodic_average(&mut self.avg, q, t)?;
        let ergodic_rate = sum_rate(&self.avg, ch)?;
        self.records.push(IterationRecord {
            t,
            realized_rate,
            base_rate,
            ergodic_rate,
            gamma,
            delta,
            active_users,
        });
        self.elapsed_ns.push(self.start.elapsed().as_nanos() as u64);
        Ok(())
    }

    pub(super) fn finish(self, final_profile: CovarianceProfile) -> Trajectory {
        Trajectory {
            records: self.records,
            final_profile,
            ergodic_average: self.avg,
            update_rates: Vec::new(),
            elapsed_ns: self.elapsed_ns,
        }
    }
}

/// Matrix exponential learning with exact gradients.
///
/// Deterministic: `Y_(t+1) = Y_t + gamma_t * P(grad R(Q_t))` with `P` the
/// traceless projection and `Y_1 = 0`. The query radius is unused.
pub fn run_mxl(ch: &ChannelRealization, policy: &StepPolicy, iterations: usize) -> Result<Trajectory> {
    policy.check()?;
    check_horizon(iterations)?;
    let antennas = ch.antennas();
    let mut y = ScoreProfile::zeros(&antennas);
    let mut q = y.to_profile()?;
    let mut rec = Recorder::new(&q, iterations);
    for t in 1..=iterations {
        if t > 1 {
            q = y.to_profile()?;
        }
        let gamma = policy.gamma(t);
        let base = sum_rate(&q, ch)?;
        let grad = rate_gradient(&q, ch)?;
        dual_averaging_step(&mut y, &grad.tangent, gamma)?;
        rec.push(ch, t, &q, base, base, gamma, 0.0, all_users(antennas.len()))?;
    }
    Ok(rec.finish(q))
}

fn draw_directions(antennas: &[usize], streams: &mut RunStreams) -> Result<Vec<SphereDirection>> {
    antennas
        .iter()
        .zip(streams.users.iter_mut())
        .map(|(&m, rng)| sample_traceless_sphere(m, rng))
        .collect()
}

fn perturb_all(q: &CovarianceProfile, delta: f64, z: &[SphereDirection]) -> Result<CovarianceProfile> {
    let blocks = q
        .blocks()
        .iter()
        .zip(z)
        .map(|(qk, zk)| safety_perturb(qk, delta, zk))
        .collect::<Result<Vec<_>>>()?;
    Ok(CovarianceProfile::from_blocks(blocks))
}

/// Gradient-free matrix exponential learning with the plain one-point
/// estimator `(d_k / delta_t) R(X_t) Z_k`.
pub fn run_mxl0(
    ch: &ChannelRealization,
    policy: &StepPolicy,
    iterations: usize,
    streams: &mut RunStreams,
) -> Result<Trajectory> {
    let antennas = ch.antennas();
    policy.require_feasible_queries(&antennas)?;
    check_horizon(iterations)?;
    check_streams(streams, ch)?;
    let mut y = ScoreProfile::zeros(&antennas);
    let mut q = y.to_profile()?;
    let mut rec = Recorder::new(&q, iterations);
    for t in 1..=iterations {
        if t > 1 {
            q = y.to_profile()?;
        }
        let (gamma, delta) = (policy.gamma(t), policy.delta(t));
        let z = draw_directions(&antennas, streams)?;
        let x = perturb_all(&q, delta, &z)?;
        let observed = sum_rate(&x, ch)?;
        let v = z
            .iter()
            .map(|zk| spsa_estimate(observed, delta, zk))
            .collect::<Result<Vec<_>>>()?;
        dual_averaging_step(&mut y, &v, gamma)?;
        let base = sum_rate(&q, ch)?;
        rec.push(ch, t, &q, base, observed, gamma, delta, all_users(antennas.len()))?;
    }
    Ok(rec.finish(q))
}

/// Gradient-free learning with the offset estimator
/// `(d_k / delta_t) (R(X_t) - R(X_(t-1))) Z_k`; the first offset is the
/// rate of the uniform starting profile.
pub fn run_mxl0_plus(
    ch: &ChannelRealization,
    policy: &StepPolicy,
    iterations: usize,
    streams: &mut RunStreams,
) -> Result<Trajectory> {
    let antennas = ch.antennas();
    policy.require_feasible_queries(&antennas)?;
    check_horizon(iterations)?;
    check_streams(streams, ch)?;
    let mut y = ScoreProfile::zeros(&antennas);
    let mut q = y.to_profile()?;
    let mut offset = sum_rate(&q, ch)?;
    let mut rec = Recorder::new(&q, iterations);
    for t in 1..=iterations {
        if t > 1 {
            q = y.to_profile()?;
        }
        let (gamma, delta) = (policy.gamma(t), policy.delta(t));
        let z = draw_directions(&antennas, streams)?;
        let x = perturb_all(&q, delta, &z)?;
        let observed = sum_rate(&x, ch)?;
        let v = z
            .iter()
            .map(|zk| spsa_plus_estimate(observed, offset, delta, zk))
            .collect::<Result<Vec<_>>>()?;
        offset = observed;
        dual_averaging_step(&mut y, &v, gamma)?;
        let base = sum_rate(&q, ch)?;
        rec.push(ch, t, &q, base, observed, gamma, delta, all_users(antennas.len()))?;
    }
    Ok(rec.finish(q))
}

fn draw_active_set(law: &UpdateLaw, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match law {
        UpdateLaw::Full => all_users(k),
        UpdateLaw::UniformSingle => vec![rng.random_range(0..k)],
        UpdateLaw::Bernoulli(p) => (0..k).filter(|&j| rng.random_bool(p[j])).collect(),
    }
}

/// Asynchronous variant of [`run_mxl0_plus`].
///
/// At each iteration a random subset of users drawn from `law` perturbs and
/// updates; the others transmit their current covariance unchanged. The
/// receiver broadcasts the single rate of that mixed profile, and every user
/// (active or idle) stores it as its next offset.
pub fn run_amxl0_plus(
    ch: &ChannelRealization,
    policy: &StepPolicy,
    law: &UpdateLaw,
    iterations: usize,
    streams: &mut RunStreams,
) -> Result<Trajectory> {
    let antennas = ch.antennas();
    let num_users = antennas.len();
    law.check(num_users)?;
    policy.require_feasible_queries(&antennas)?;
    check_horizon(iterations)?;
    check_streams(streams, ch)?;
    let mut y = ScoreProfile::zeros(&antennas);
    let mut q = y.to_profile()?;
    let mut offsets = vec![sum_rate(&q, ch)?; num_users];
    let mut rec = Recorder::new(&q, iterations);
    for t in 1..=iterations {
        if t > 1 {
            q = y.to_profile()?;
        }
        let (gamma, delta) = (policy.gamma(t), policy.delta(t));
        let active = draw_active_set(law, num_users, &mut streams.law);
        let mut directions: Vec<Option<SphereDirection>> = vec![None; num_users];
        for &k in &active {
            directions[k] = Some(sample_traceless_sphere(antennas[k], &mut streams.users[k])?);
        }
        let blocks = q
            .blocks()
            .iter()
            .zip(&directions)
            .map(|(qk, zk)| match zk {
                Some(z) => safety_perturb(qk, delta, z),
                None => Ok(qk.clone()),
            })
            .collect::<Result<Vec<HermitianMatrix>>>()?;
        let observed = sum_rate(&CovarianceProfile::from_blocks(blocks), ch)?;
        for (k, zk) in directions.iter().enumerate() {
            if let Some(z) = zk {
                let v = spsa_plus_estimate(observed, offsets[k], delta, z)?;
                y.scores[k].add_scaled(gamma, &v);
            }
            offsets[k] = observed;
        }
        let base = sum_rate(&q, ch)?;
        rec.push(ch, t, &q, base, observed, gamma, delta, active)?;
    }
    Ok(rec.finish(q))
}
