mod common;

use mxlearn::estimators::{
    estimate_constants, safety_perturb, sample_traceless_sphere, spsa_estimate, spsa_plus_estimate,
    traceless_dimension,
};
use mxlearn::harness::{cross_check_policy, reference_optimum_with};
use mxlearn::hermitian::{eig_hermitian, norm, CMatrix, HermitianMatrix, NormKind};
use mxlearn::network::{sum_rate, CovarianceProfile};
use mxlearn::optimizers::{
    exp_map, run_amxl0_plus, run_iwf, run_mxl, run_mxl0_plus, run_swf, HorizonVariant, RunStreams,
    StepPolicy, UpdateLaw,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

#[test]
fn frozen_optimum_matches_fresh_water_filling() {
    let fresh = run_iwf(&accept_channels(), 10_000, 1e-10).unwrap();
    let r = fresh.last().unwrap().base_rate;
    assert!((r - ACCEPT_R_STAR).abs() <= 1e-8, "{r} vs {ACCEPT_R_STAR}");
    let refo = reference_optimum_with(&accept_channels(), 1e-10, 0).unwrap();
    assert!((refo.value - ACCEPT_R_STAR).abs() <= 1e-8);
}

#[test]
fn exact_gradient_learning_closes_the_gap() {
    let tr = run_mxl(&accept_channels(), &cross_check_policy(), 10_000).unwrap();
    let gap = ACCEPT_R_STAR - tr.last().unwrap().ergodic_rate;
    assert!((-1e-8..1e-3).contains(&gap), "ergodic gap {gap}");
}

#[test]
fn water_filling_agrees_with_long_learning_run() {
    let ch = accept_channels();
    let iwf = run_iwf(&ch, 10_000, 1e-10).unwrap().last().unwrap().base_rate;
    let mxl = run_mxl(&ch, &cross_check_policy(), 100_000).unwrap().last().unwrap().base_rate;
    assert!((iwf - mxl).abs() <= 1e-6, "{iwf} vs {mxl}");
}

#[test]
fn simultaneous_water_filling_is_logged_without_convergence_claims() {
    let tr = run_swf(&accept_channels(), 200).unwrap();
    let steps: Vec<f64> = tr.records.windows(2).map(|w| (w[1].base_rate - w[0].base_rate).abs()).collect();
    assert_eq!(steps.len(), 199);
    assert!(steps.iter().all(|s| s.is_finite()));
    assert!(tr.records.iter().all(|r| r.base_rate <= ACCEPT_R_STAR + 1e-9));
}

#[test]
fn single_user_activation_counts_concentrate() {
    let ch = accept_channels();
    let k = ch.num_users();
    let t = 10_000;
    let policy = StepPolicy::horizon(3.0, 3.0, t, HorizonVariant::Sqrt);
    for seed in 1..=3 {
        let tr = run_amxl0_plus(&ch, &policy, &UpdateLaw::UniformSingle, t, &mut RunStreams::new(seed, k)).unwrap();
        let mut counts = vec![0usize; k];
        for r in &tr.records {
            assert_eq!(r.active_users.len(), 1);
            counts[r.active_users[0]] += 1;
        }
        let expect = (t / k) as f64;
        let slack = 4.0 * (t as f64 / k as f64).sqrt();
        for c in counts {
            assert!((c as f64 - expect).abs() <= slack, "count {c}, expected {expect} +- {slack}");
        }
    }
}

#[test]
fn bernoulli_activation_frequencies_match_marginals() {
    let ch = accept_channels();
    let k = ch.num_users();
    let p = vec![0.2, 0.4, 0.6, 0.8];
    let t = 10_000;
    let policy = StepPolicy::horizon(3.0, 3.0, t, HorizonVariant::Sqrt);
    let tr = run_amxl0_plus(&ch, &policy, &UpdateLaw::Bernoulli(p.clone()), t, &mut RunStreams::new(5, k)).unwrap();
    for (j, pj) in p.iter().enumerate() {
        let c = tr.records.iter().filter(|r| r.active_users.contains(&j)).count() as f64;
        let sd = (t as f64 * pj * (1.0 - pj)).sqrt();
        assert!((c - t as f64 * pj).abs() <= 4.0 * sd);
    }
}

/// Replays the offset learner from its building blocks and checks the
/// pointwise bound `|R(X_t) - R(X_(t-1))| <= L sum_k ||X_k,t - X_k,(t-1)||_nuclear`
/// on every estimate, with `L = max_k P_k ||H_k||^2_spectral`.
#[test]
fn offset_estimates_stay_bounded_along_a_run() {
    let ch = accept_channels();
    let k = ch.num_users();
    let antennas = ch.antennas();
    let t_max = 10_000;
    let policy = StepPolicy::horizon(3.0, 3.0, t_max, HorizonVariant::Sqrt);
    let l_bound = ch
        .users()
        .iter()
        .map(|u| {
            let g = HermitianMatrix::new(u.channel.adjoint_matmul(&u.channel).unwrap()).unwrap();
            u.power * eig_hermitian(&g).unwrap().max()
        })
        .fold(0.0, f64::max);
    let est = estimate_constants(&ch, 1000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!(est.rate_lipschitz <= l_bound + 1e-12);

    let mut streams = RunStreams::new(9, k);
    let mut y: Vec<HermitianMatrix> = antennas.iter().map(|&m| HermitianMatrix::zeros(m)).collect();
    let mut prev_x = CovarianceProfile::uniform(&antennas);
    let mut prev_r = sum_rate(&prev_x, &ch).unwrap();
    let mut largest: f64 = 0.0;
    let mut observed = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        let (gamma, delta) = (policy.gamma(t), policy.delta(t));
        let q: Vec<_> = y.iter().map(|yk| exp_map(yk).unwrap()).collect();
        let z: Vec<_> = antennas
            .iter()
            .zip(streams.users.iter_mut())
            .map(|(&m, s)| sample_traceless_sphere(m, s).unwrap())
            .collect();
        let x = CovarianceProfile::from_blocks(
            q.iter().zip(&z).map(|(qk, zk)| safety_perturb(qk, delta, zk).unwrap()).collect(),
        );
        let r = sum_rate(&x, &ch).unwrap();
        observed.push(r);
        let moved: f64 = x
            .blocks()
            .iter()
            .zip(prev_x.blocks())
            .map(|(a, b)| norm(&(a - b), NormKind::Nuclear))
            .sum();
        for (kk, zk) in z.iter().enumerate() {
            let v = spsa_plus_estimate(r, prev_r, delta, zk).unwrap();
            let s = norm(&v, NormKind::Spectral);
            let d = traceless_dimension(antennas[kk]) as f64;
            assert!(s.is_finite());
            assert!(s <= d / delta * l_bound * moved * (1.0 + 1e-9) + 1e-12, "t = {t}: {s}");
            largest = largest.max(s);
            y[kk].add_scaled(gamma, &v);
        }
        prev_x = x;
        prev_r = r;
    }
    assert!(largest > 0.0);

    // The replay follows the library trajectory exactly.
    let lib = run_mxl0_plus(&ch, &policy, t_max, &mut RunStreams::new(9, k)).unwrap();
    let lib_rates: Vec<f64> = lib.records.iter().map(|r| r.realized_rate).collect();
    assert_eq!(lib_rates, observed);
}

#[test]
fn sphere_sampler_is_centred() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 1_000_000;
    let mut sum = HermitianMatrix::zeros(2);
    for _ in 0..draws {
        sum.add_scaled(1.0, sample_traceless_sphere(2, &mut rng).unwrap().matrix());
    }
    let mean = sum.scaled(1.0 / draws as f64);
    assert!(mean.frobenius_norm() <= 0.005, "{}", mean.frobenius_norm());
}

/// `E[(d / delta)(R - rho) Z] = E[(d / delta) R Z]` for an offset independent
/// of `Z`: the per-draw difference `(d / delta) rho Z` must average to zero.
#[test]
fn offset_does_not_change_the_mean() {
    let ch = accept_channels();
    let antennas = ch.antennas();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let q = CovarianceProfile::random(&antennas, &mut rng);
    let delta = 0.1;
    let draws = 200_000;
    let m = antennas[0];
    let entries = m * m;
    let (mut s1, mut s2) = (vec![0.0f64; 2 * entries], vec![0.0f64; 2 * entries]);
    for _ in 0..draws {
        let rho: f64 = rng.random_range(0.5..2.0);
        let z: Vec<_> = antennas.iter().map(|&mk| sample_traceless_sphere(mk, &mut rng).unwrap()).collect();
        let x = CovarianceProfile::from_blocks(
            q.blocks().iter().zip(&z).map(|(b, zk)| safety_perturb(b, delta, zk).unwrap()).collect(),
        );
        let r = sum_rate(&x, &ch).unwrap();
        let a = spsa_estimate(r, delta, &z[0]).unwrap();
        let b = spsa_plus_estimate(r, rho, delta, &z[0]).unwrap();
        let diff: CMatrix = sub(a.as_matrix(), b.as_matrix());
        for (i, c) in diff.as_slice().iter().enumerate() {
            for (j, v) in [c.re, c.im].into_iter().enumerate() {
                s1[2 * i + j] += v;
                s2[2 * i + j] += v * v;
            }
        }
    }
    let n = draws as f64;
    for (a, b) in s1.iter().zip(&s2) {
        let mean = a / n;
        let se = ((b / n - mean * mean).max(0.0) / n).sqrt();
        assert!(mean.abs() <= 3.0 * se + 1e-15, "mean {mean}, se {se}");
    }
}

#[test]
fn offset_learning_beats_plain_learning_at_equal_horizon() {
    let ch = accept_channels();
    let k = ch.num_users();
    let t = 10_000;
    let plain_policy = StepPolicy::horizon(10.0, 3.5, t, HorizonVariant::Spsa);
    let plus_policy = StepPolicy::horizon(3.0, 3.0, t, HorizonVariant::Sqrt);
    let (mut plain, mut plus) = (Vec::new(), Vec::new());
    for seed in 1..=5 {
        let a = mxlearn::optimizers::run_mxl0(&ch, &plain_policy, t, &mut RunStreams::new(seed, k)).unwrap();
        let b = run_mxl0_plus(&ch, &plus_policy, t, &mut RunStreams::new(seed, k)).unwrap();
        plain.push(ACCEPT_R_STAR - a.last().unwrap().ergodic_rate);
        plus.push(ACCEPT_R_STAR - b.last().unwrap().ergodic_rate);
    }
    assert!(median(&plain) >= 10.0 * median(&plus), "{} vs {}", median(&plain), median(&plus));
}
