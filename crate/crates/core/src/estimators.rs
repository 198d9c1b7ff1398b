//! Scalar-feedback gradient estimation.
//!
//! Each user perturbs its covariance along a random direction `Z_k` drawn
//! uniformly from the unit Frobenius sphere of traceless Hermitian matrices,
//! after first pulling the pivot towards `I / m_k` so the query stays
//! feasible. The receiver reports one scalar, the realized sum rate, and
//! every user turns it into a gradient estimate `(d_k / delta) (R - rho) Z_k`
//! where `d_k = m_k^2 - 1` and `rho` is an offset chosen independently of
//! `Z_k` (zero for plain SPSA, the previous observation for SPSA+).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hermitian::{norm, CMatrix, Complex, HermitianMatrix, NormKind};
use crate::network::{random_density, rate_gradient, ChannelRealization, CovarianceProfile};

/// Real dimension `m^2 - 1` of the traceless Hermitian space.
pub fn traceless_dimension(m: usize) -> usize {
    m * m - 1
}

/// Largest Frobenius radius around `I / m` that stays inside the
/// spectrahedron: `1 / sqrt(m (m - 1))`.
pub fn safety_radius(m: usize) -> f64 {
    let m = m as f64;
    1.0 / (m * (m - 1.0)).sqrt()
}

/// Smallest safety radius across users; query radii must stay below it.
pub fn min_safety_radius(antennas: &[usize]) -> f64 {
    antennas
        .iter()
        .map(|&m| safety_radius(m))
        .fold(f64::INFINITY, f64::min)
}

/// A unit-Frobenius traceless Hermitian direction.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereDirection(HermitianMatrix);

impl SphereDirection {
    /// Normalises a traceless matrix; fails on a zero or traced input.
    pub fn new(z: HermitianMatrix) -> Result<Self> {
        let tr = z.trace();
        let f = z.frobenius_norm();
        if !(f > 0.0) {
            return Err(Error::InvalidInput("direction must be non-zero".into()));
        }
        if tr.abs() > 1e-12 * f.max(1.0) {
            return Err(Error::InvalidInput(format!("direction has trace {tr}")));
        }
        Ok(Self(z.scaled(1.0 / f)))
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

/// Orthonormal basis of the traceless Hermitian `m x m` matrices.
///
/// Ordering: the `m - 1` normalised diagonal generators, then for every pair
/// `p < q` the symmetric real generator followed by the antisymmetric
/// imaginary one.
pub fn traceless_basis(m: usize) -> Vec<HermitianMatrix> {
    let mut basis = Vec::with_capacity(traceless_dimension(m));
    for j in 1..m {
        let norm = ((j * (j + 1)) as f64).sqrt();
        let mut diag = vec![0.0; m];
        for d in diag.iter_mut().take(j) {
            *d = 1.0 / norm;
        }
        diag[j] = -(j as f64) / norm;
        basis.push(HermitianMatrix::from_real_diagonal(&diag));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for p in 0..m {
        for q in (p + 1)..m {
            let mut re = CMatrix::zeros(m, m);
            re.set(p, q, Complex::new(h, 0.0));
            re.set(q, p, Complex::new(h, 0.0));
            basis.push(HermitianMatrix::new(re).expect("finite"));
            let mut im = CMatrix::zeros(m, m);
            im.set(p, q, Complex::new(0.0, -h));
            im.set(q, p, Complex::new(0.0, h));
            basis.push(HermitianMatrix::new(im).expect("finite"));
        }
    }
    basis
}

/// Uniform draw from the unit sphere of traceless Hermitian `m x m`
/// matrices: i.i.d. Gaussian coordinates in [`traceless_basis`] order,
/// normalised.
pub fn sample_traceless_sphere<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<SphereDirection> {
    if m < 2 {
        return Err(Error::InvalidInput(format!(
            "sphere sampling needs m >= 2, got {m}"
        )));
    }
    let d = traceless_dimension(m);
    let coords: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let mut z = CMatrix::zeros(m, m);
    let mut idx = 0;
    let mut diag = vec![0.0; m];
    for j in 1..m {
        let c = coords[idx] / ((j * (j + 1)) as f64).sqrt();
        idx += 1;
        for d in diag.iter_mut().take(j) {
            *d += c;
        }
        diag[j] -= c * j as f64;
    }
    for (i, &v) in diag.iter().enumerate() {
        z.set(i, i, Complex::new(v, 0.0));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for p in 0..m {
        for q in (p + 1)..m {
            let (a, b) = (coords[idx] * h, coords[idx + 1] * h);
            idx += 2;
            z.set(p, q, Complex::new(a, -b));
            z.set(q, p, Complex::new(a, b));
        }
    }
    let z = HermitianMatrix::new(z)?;
    // Scrub the rounding residue in the trace before normalising.
    let z = crate::hermitian::tangent_project(&z);
    SphereDirection::new(z)
}

/// Feasible query point `Q + (delta / r)(I/m - Q) + delta Z`.
///
/// `delta = 0` returns `Q` unchanged; `delta >= r` is rejected.
pub fn safety_perturb(q: &HermitianMatrix, delta: f64, z: &SphereDirection) -> Result<HermitianMatrix> {
    let m = q.dim();
    if z.dim() != m {
        return Err(Error::dims(m, z.dim()));
    }
    let radius = safety_radius(m);
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!("query radius {delta} is negative")));
    }
    if delta >= radius {
        return Err(Error::QueryRadiusTooLarge { delta, radius });
    }
    if delta == 0.0 {
        return Ok(q.clone());
    }
    let pull = delta / radius;
    let mut x = q.scaled(1.0 - pull);
    x = x.shifted(pull / m as f64);
    x.add_scaled(delta, z.matrix());
    Ok(x)
}

fn check_radius(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "estimators need a positive query radius, got {delta}"
        )));
    }
    Ok(())
}

/// One-shot SPSA estimate `(d / delta) R_hat Z`.
pub fn spsa_estimate(observed_rate: f64, delta: f64, z: &SphereDirection) -> Result<HermitianMatrix> {
    spsa_plus_estimate(observed_rate, 0.0, delta, z)
}

/// SPSA with offset: `(d / delta) (R_hat - rho) Z`.
pub fn spsa_plus_estimate(
    observed_rate: f64,
    offset: f64,
    delta: f64,
    z: &SphereDirection,
) -> Result<HermitianMatrix> {
    check_radius(delta)?;
    let d = traceless_dimension(z.dim()) as f64;
    Ok(z.matrix().scaled(d / delta * (observed_rate - offset)))
}

/// Offsets, query radius and the current directions of a zeroth-order run.
#[derive(Clone, Debug)]
pub struct EstimatorState {
    pub offsets: Vec<f64>,
    pub query_radius: f64,
    pub directions: Vec<Option<SphereDirection>>,
}

impl EstimatorState {
    pub fn new(num_users: usize, initial_offset: f64, query_radius: f64, antennas: &[usize]) -> Result<Self> {
        let r = min_safety_radius(antennas);
        if !(query_radius > 0.0 && query_radius < r) {
            return Err(Error::QueryRadiusTooLarge {
                delta: query_radius,
                radius: r,
            });
        }
        Ok(Self {
            offsets: vec![initial_offset; num_users],
            query_radius,
            directions: vec![None; num_users],
        })
    }
}

/// Empirical Lipschitz-type constants of an instance.
///
/// All values are maxima over finitely many samples and hence lower bounds
/// on the true constants.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzEstimates {
    /// Bound on `max_k ||G_k||_spectral`, the dual-norm Lipschitz constant of the rate.
    pub rate_lipschitz: f64,
    /// `pairwise[k][j]`: Lipschitz constant of `G_k` in user `j`'s block
    /// (spectral norm over Frobenius distance).
    pub pairwise: Vec<Vec<f64>>,
    /// Row means of `pairwise`.
    pub user_mean: Vec<f64>,
    /// Mean of `user_mean`.
    pub mean: f64,
}

const DISPLACEMENT_SCALES: [f64; 3] = [1.0, 0.1, 0.01];

/// Samples feasible profiles and block-wise displacements to estimate the
/// constants entering the step-size conditions.
///
/// The `i`-th sample consumes the same random numbers whatever the total
/// sample count, so estimates are non-decreasing in `num_samples`.
pub fn estimate_constants<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    num_samples: usize,
    rng: &mut R,
) -> Result<LipschitzEstimates> {
    if num_samples < 100 {
        return Err(Error::InvalidInput(format!(
            "at least 100 samples are required, got {num_samples}"
        )));
    }
    let antennas = ch.antennas();
    let k_users = ch.num_users();
    let mut rate_lipschitz: f64 = 0.0;
    let mut pairwise = vec![vec![0.0f64; k_users]; k_users];

    for i in 0..num_samples {
        let q = CovarianceProfile::random(&antennas, rng);
        let grad = rate_gradient(&q, ch)?;
        for g in &grad.euclidean {
            rate_lipschitz = rate_lipschitz.max(norm(g, NormKind::Spectral));
        }
        let step = DISPLACEMENT_SCALES[i % DISPLACEMENT_SCALES.len()];
        for j in 0..k_users {
            let target = random_density(antennas[j], rng);
            let mut moved = q.block(j).scaled(1.0 - step);
            moved.add_scaled(step, &target);
            let dist = (&moved - q.block(j)).frobenius_norm();
            if !(dist > 1e-12) {
                continue;
            }
            let other = rate_gradient(&q.with_block(j, moved), ch)?;
            for k in 0..k_users {
                let diff = &other.euclidean[k] - &grad.euclidean[k];
                let ratio = norm(&diff, NormKind::Spectral) / dist;
                pairwise[k][j] = pairwise[k][j].max(ratio);
            }
        }
    }

    let user_mean: Vec<f64> = pairwise
        .iter()
        .map(|row| row.iter().sum::<f64>() / k_users as f64)
        .collect();
    let mean = user_mean.iter().sum::<f64>() / k_users as f64;
    Ok(LipschitzEstimates {
        rate_lipschitz,
        pairwise,
        user_mean,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::eig_hermitian;
    use crate::network::{generate_channels, UserChannel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn basis_is_orthonormal_and_traceless() {
        for m in 2..=5 {
            let basis = traceless_basis(m);
            assert_eq!(basis.len(), m * m - 1);
            for (i, a) in basis.iter().enumerate() {
                assert!(a.trace().abs() < 1e-15);
                for (j, b) in basis.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((a.inner_product(b) - want).abs() < 1e-14);
                }
            }
        }
        assert_eq!(traceless_basis(2).len(), 3);
    }

    #[test]
    fn sampler_matches_basis_expansion() {
        let m = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = sample_traceless_sphere(m, &mut rng).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coords: Vec<f64> = (0..8).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        let mut want = HermitianMatrix::zeros(m);
        for (c, b) in coords.iter().zip(traceless_basis(m)) {
            want.add_scaled(c / n, &b);
        }
        assert!((z.matrix() - &want).frobenius_norm() < 1e-14);
    }

    #[test]
    fn draws_satisfy_sphere_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in 2..=8 {
            for _ in 0..200 {
                let z = sample_traceless_sphere(m, &mut rng).unwrap();
                assert!(z.matrix().trace().abs() < 1e-12);
                assert!((z.matrix().frobenius_norm() - 1.0).abs() < 1e-12);
            }
        }
        assert!(sample_traceless_sphere(1, &mut rng).is_err());
    }

    #[test]
    fn radius_for_two_antennas() {
        assert!((safety_radius(2) - 0.70711).abs() < 1e-5);
    }

    #[test]
    fn zero_radius_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_density(3, &mut rng);
        let z = sample_traceless_sphere(3, &mut rng).unwrap();
        assert_eq!(safety_perturb(&q, 0.0, &z).unwrap(), q);
    }

    #[test]
    fn radius_at_or_above_safety_is_rejected() {
        let q = HermitianMatrix::scaled_identity(2, 0.5);
        let z = SphereDirection::new(HermitianMatrix::from_real_diagonal(&[1.0, -1.0])).unwrap();
        assert!(matches!(
            safety_perturb(&q, safety_radius(2), &z),
            Err(Error::QueryRadiusTooLarge { .. })
        ));
    }

    // Rank-one vertex pushed along the most negative admissible direction.
    #[test]
    fn worst_case_perturbation_stays_psd() {
        for m in 2..=6 {
            let mut diag = vec![0.0; m];
            diag[0] = 1.0;
            let q = HermitianMatrix::from_real_diagonal(&diag);
            let a = ((m as f64 - 1.0) / m as f64).sqrt();
            let mut zd = vec![a / (m as f64 - 1.0); m];
            zd[m - 1] = -a;
            let z = SphereDirection::new(HermitianMatrix::from_real_diagonal(&zd)).unwrap();
            let x = safety_perturb(&q, 0.999 * safety_radius(m), &z).unwrap();
            let e = eig_hermitian(&x).unwrap();
            assert!(e.min() >= -1e-10, "m={m} min={}", e.min());
            assert!((x.trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn estimator_arithmetic() {
        let z = SphereDirection::new(HermitianMatrix::from_real_diagonal(&[1.0, -1.0])).unwrap();
        let v = spsa_estimate(1.0, 0.1, &z).unwrap();
        assert!((&v - &z.matrix().scaled(30.0)).frobenius_norm() < 1e-12);
        assert_eq!(spsa_estimate(0.0, 0.1, &z).unwrap().frobenius_norm(), 0.0);
        assert_eq!(spsa_plus_estimate(1.3, 1.3, 0.1, &z).unwrap().frobenius_norm(), 0.0);
        let v = spsa_plus_estimate(1.2, 1.0, 0.05, &z).unwrap();
        assert!((&v - &z.matrix().scaled(12.0)).frobenius_norm() < 1e-12);
        assert!(spsa_estimate(1.0, 0.0, &z).is_err());
    }

    #[test]
    fn zero_channels_have_zero_lipschitz() {
        let ch = ChannelRealization::new(
            2,
            vec![UserChannel {
                channel: CMatrix::zeros(2, 2),
                power: 1.0,
            }],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let est = estimate_constants(&ch, 100, &mut rng).unwrap();
        assert_eq!(est.rate_lipschitz, 0.0);
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn isotropic_lipschitz_lower_bound() {
        let ch = ChannelRealization::new(
            2,
            vec![UserChannel {
                channel: CMatrix::identity(2),
                power: 1.0,
            }],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let est = estimate_constants(&ch, 100, &mut rng).unwrap();
        assert!(est.rate_lipschitz >= 2.0 / 3.0);
    }

    #[test]
    fn estimates_grow_with_samples() {
        let ch = generate_channels(3, 4, &[2, 2, 3], &[1.0; 3], 1.0, 9).unwrap();
        let mut prev: Option<LipschitzEstimates> = None;
        for n in [100, 200, 400] {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let est = estimate_constants(&ch, n, &mut rng).unwrap();
            if let Some(p) = &prev {
                assert!(est.rate_lipschitz >= p.rate_lipschitz);
                assert!(est.mean >= p.mean);
                for (a, b) in est.user_mean.iter().zip(&p.user_mean) {
                    assert!(a >= b);
                }
            }
            prev = Some(est);
        }
        assert!(estimate_constants(&ch, 10, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }
}
