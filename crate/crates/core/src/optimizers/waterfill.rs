//! Water-filling: the closed-form single-user best response and the
//! iterative (round-robin) and simultaneous schemes built on it.

use super::learning::{all_users, Recorder};
use super::Trajectory;
use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::network::{effective_channel, sum_rate, ChannelRealization, CovarianceProfile};

/// Relative eigenvalue threshold below which a channel mode is treated as
/// unusable.
const MODE_TOL: f64 = 1e-13;

/// Maximiser of `log det(I + P H Q H^dagger)` over `Q >= 0`, `tr Q = budget`,
/// given the Gram matrix `G = H^dagger H`.
///
/// Powers are `max(0, mu - 1 / (P lambda_i))` along the eigenvectors of `G`.
/// The water level `mu` is found exactly by scanning the sorted noise
/// levels. A zero `G` yields the uniform allocation.
pub fn water_fill(g: &HermitianMatrix, power: f64, budget: f64) -> Result<HermitianMatrix> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::InvalidInput(format!("power must be positive, got {power}")));
    }
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::InvalidInput(format!("budget must be positive, got {budget}")));
    }
    let m = g.dim();
    let e = g.eig()?;
    let top = e.max();
    if !(top > 0.0) {
        return Ok(HermitianMatrix::scaled_identity(m, budget / m as f64));
    }
    // (noise level, eigen index) for usable modes, ascending noise.
    let mut modes: Vec<(f64, usize)> = e
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|&(_, &l)| l > MODE_TOL * top)
        .map(|(i, &l)| (1.0 / (power * l), i))
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut level = 0.0;
    let mut active = 0;
    for n in (1..=modes.len()).rev() {
        let mu = (budget + modes[..n].iter().map(|x| x.0).sum::<f64>()) / n as f64;
        if mu > modes[n - 1].0 {
            level = mu;
            active = n;
            break;
        }
    }
    let mut p = vec![0.0; m];
    for &(noise, i) in &modes[..active] {
        p[i] = level - noise;
    }
    Ok(HermitianMatrix::from_spectrum(&p, &e.vectors))
}

/// Best response of user `k` to the interference of the others in `q`.
fn best_response(k: usize, q: &CovarianceProfile, ch: &ChannelRealization) -> Result<HermitianMatrix> {
    let h_eff = effective_channel(k, q, ch)?;
    let g = HermitianMatrix::new(h_eff.adjoint_matmul(&h_eff)?)?;
    water_fill(&g, ch.user(k).power, 1.0)
}

/// Iterative water-filling.
///
/// Users update one after another in index order, each water-filling
/// against the current interference. One record per round; the sum rate
/// after every single update is kept in `update_rates`. Stops after the
/// first round improving the sum rate by less than `tol`, or after
/// `max_rounds`.
pub fn run_iwf(ch: &ChannelRealization, max_rounds: usize, tol: f64) -> Result<Trajectory> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    if max_rounds == 0 {
        return Err(Error::InvalidInput("at least one round is required".into()));
    }
    let antennas = ch.antennas();
    let mut q = CovarianceProfile::uniform(&antennas);
    let mut rate = sum_rate(&q, ch)?;
    let mut rec = Recorder::new(&q, max_rounds);
    let mut update_rates = vec![rate];
    for round in 1..=max_rounds {
        let before = rate;
        for k in 0..antennas.len() {
            let qk = best_response(k, &q, ch)?;
            *q.block_mut(k) = qk;
            rate = sum_rate(&q, ch)?;
            update_rates.push(rate);
        }
        rec.push(ch, round, &q, rate, rate, 0.0, 0.0, all_users(antennas.len()))?;
        if rate - before < tol {
            break;
        }
    }
    let mut tr = rec.finish(q);
    tr.update_rates = update_rates;
    Ok(tr)
}

/// Simultaneous water-filling: every user best-responds to the previous
/// profile at once. No convergence is implied.
pub fn run_swf(ch: &ChannelRealization, iterations: usize) -> Result<Trajectory> {
    if iterations == 0 {
        return Err(Error::InvalidInput("at least one iteration is required".into()));
    }
    let antennas = ch.antennas();
    let mut q = CovarianceProfile::uniform(&antennas);
    let mut rec = Recorder::new(&q, iterations);
    for t in 1..=iterations {
        let next = (0..antennas.len())
            .map(|k| best_response(k, &q, ch))
            .collect::<Result<Vec<_>>>()?;
        q = CovarianceProfile::from_blocks(next);
        let rate = sum_rate(&q, ch)?;
        rec.push(ch, t, &q, rate, rate, 0.0, 0.0, all_users(antennas.len()))?;
    }
    Ok(rec.finish(q))
}

/// Largest violation of the water-filling optimality conditions of `q` for
/// Gram matrix `g`: stationarity on the support, dual feasibility off it.
pub fn kkt_residual(g: &HermitianMatrix, power: f64, q: &HermitianMatrix) -> Result<f64> {
    // Gradient of log det(I + P G^(1/2) Q G^(1/2)) is P G^(1/2) (I + ...)^(-1) G^(1/2).
    let sqrt_g = g.spectral_map(|l| l.max(0.0).sqrt())?;
    let inner = q.congruence(sqrt_g.as_matrix())?.scaled(power).shifted(1.0);
    let inv = inner.spectral_map(|l| 1.0 / l)?;
    let grad = inv.congruence(sqrt_g.as_matrix())?.scaled(power);
    // Multiplier: the mean gradient along the support of q.
    let mu = grad.inner_product(q) / q.trace();
    let slack = grad.shifted(-mu);
    // Complementary slackness: (mu I - grad) Q = 0; dual feasibility: mu I - grad >= 0.
    let comp = slack.as_matrix().matmul(q.as_matrix())?.frobenius_norm();
    let dual = slack.eig()?.max().max(0.0);
    Ok(comp.max(dual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::CMatrix;
    use crate::network::{generate_channels, UserChannel};

    #[test]
    fn isotropic_gram_gives_uniform() {
        for &l in &[0.1, 1.0, 7.5] {
            let q = water_fill(&HermitianMatrix::scaled_identity(3, l), 2.0, 1.0).unwrap();
            assert!((&q - &HermitianMatrix::scaled_identity(3, 1.0 / 3.0)).frobenius_norm() < 1e-14);
        }
    }

    #[test]
    fn single_mode_takes_everything() {
        let q = water_fill(&HermitianMatrix::from_real_diagonal(&[3.0, 0.0]), 1.0, 1.0).unwrap();
        assert!((&q - &HermitianMatrix::from_real_diagonal(&[1.0, 0.0])).frobenius_norm() < 1e-14);
    }

    #[test]
    fn two_mode_waterline() {
        let q = water_fill(&HermitianMatrix::from_real_diagonal(&[4.0, 1.0]), 1.0, 1.0).unwrap();
        let want = HermitianMatrix::from_real_diagonal(&[0.875, 0.125]);
        assert!((&q - &want).frobenius_norm() < 1e-12);
        assert!(kkt_residual(&HermitianMatrix::from_real_diagonal(&[4.0, 1.0]), 1.0, &q).unwrap() < 1e-12);
    }

    #[test]
    fn zero_gram_is_uniform() {
        let q = water_fill(&HermitianMatrix::zeros(4), 1.0, 1.0).unwrap();
        assert_eq!(q, HermitianMatrix::scaled_identity(4, 0.25));
    }

    #[test]
    fn single_user_iwf_stops_after_two_rounds() {
        let ch = generate_channels(1, 3, &[3], &[1.5], 1.0, 4).unwrap();
        let tr = run_iwf(&ch, 50, 1e-10).unwrap();
        assert_eq!(tr.len(), 2);
        let h = &ch.user(0).channel;
        let g = HermitianMatrix::new(h.adjoint_matmul(h).unwrap()).unwrap();
        let direct = water_fill(&g, 1.5, 1.0).unwrap();
        assert!((tr.final_profile.block(0) - &direct).frobenius_norm() < 1e-12);

        let swf = run_swf(&ch, 1).unwrap();
        assert_eq!(swf.records[0].base_rate, tr.records[0].base_rate);
    }

    #[test]
    fn iwf_is_monotone() {
        for seed in 0..10 {
            let ch = generate_channels(4, 4, &[2, 3, 2, 4], &[1.0, 0.5, 2.0, 1.0], 1.0, seed).unwrap();
            let tr = run_iwf(&ch, 200, 1e-12).unwrap();
            for w in tr.update_rates.windows(2) {
                assert!(w[1] >= w[0] - 1e-12);
            }
        }
    }

    #[test]
    fn swf_is_deterministic() {
        let ch = generate_channels(3, 2, &[2; 3], &[1.0; 3], 2.0, 1).unwrap();
        assert!(run_swf(&ch, 20).unwrap().same_path(&run_swf(&ch, 20).unwrap()));
    }

    #[test]
    fn zero_channel_user_stays_uniform() {
        let ch = ChannelRealization::new(
            2,
            vec![
                UserChannel {
                    channel: CMatrix::zeros(2, 2),
                    power: 1.0,
                },
                UserChannel {
                    channel: CMatrix::identity(2),
                    power: 1.0,
                },
            ],
        )
        .unwrap();
        let tr = run_iwf(&ch, 10, 1e-10).unwrap();
        assert_eq!(tr.final_profile.block(0), &HermitianMatrix::scaled_identity(2, 0.5));
    }
}
