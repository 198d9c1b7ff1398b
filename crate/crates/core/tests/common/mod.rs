//! Independent reference computations used by the integration suites.
#![allow(dead_code)]

use mxlearn::hermitian::{eig_hermitian, CMatrix, Complex, HermitianMatrix};
use mxlearn::network::{generate_channels, sum_rate, ChannelRealization, CovarianceProfile};
use rand::Rng;

/// The fixed small instance used by the acceptance criteria.
pub fn accept_channels() -> ChannelRealization {
    generate_channels(4, 4, &[2; 4], &[1.0; 4], 0.3, 42).unwrap()
}

/// Optimal sum rate of [`accept_channels`], frozen from a water-filling run
/// converged to a per-round improvement below 1e-10.
pub const ACCEPT_R_STAR: f64 = 1.5529977257403234;

pub fn random_hermitian<R: Rng>(m: usize, scale: f64, rng: &mut R) -> HermitianMatrix {
    let a = CMatrix::from_fn(m, m, |_, _| {
        Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
    });
    HermitianMatrix::new(a).unwrap()
}

pub fn random_channel_matrix<R: Rng>(n: usize, m: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(n, m, |_, _| {
        Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Density matrix of random rank `rank` (full rank when `rank >= m`).
pub fn random_density_of_rank<R: Rng>(m: usize, rank: usize, rng: &mut R) -> HermitianMatrix {
    let b = random_channel_matrix(m, rank.clamp(1, m), rng);
    let a = HermitianMatrix::new(b.matmul(&b.adjoint()).unwrap()).unwrap();
    let tr = a.trace();
    a.scaled(1.0 / tr)
}

/// Matrix exponential by scaling, 30-term Taylor series and squaring.
pub fn expm_taylor(a: &CMatrix) -> CMatrix {
    let n = a.rows();
    let norm: f64 = a.as_slice().iter().map(|z| z.norm()).sum();
    let mut s = 0;
    while norm / f64::from(1u32 << s.min(30)) > 0.5 && s < 60 {
        s += 1;
    }
    let scaled = a.scaled(0.5f64.powi(s));
    let mut term = CMatrix::identity(n);
    let mut sum = CMatrix::identity(n);
    for k in 1..30 {
        term = term.matmul(&scaled).unwrap().scaled(1.0 / k as f64);
        sum = add(&sum, &term);
    }
    for _ in 0..s {
        sum = sum.matmul(&sum).unwrap();
    }
    sum
}

pub fn add(a: &CMatrix, b: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j) + b.get(i, j))
}

pub fn sub(a: &CMatrix, b: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j) - b.get(i, j))
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Euclidean projection onto the probability simplex scaled to `total`.
pub fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - total) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Frobenius projection onto `{Q >= 0, tr Q = total}`.
pub fn project_spectrahedron(a: &HermitianMatrix, total: f64) -> HermitianMatrix {
    let e = eig_hermitian(a).unwrap();
    let p = project_simplex(&e.eigenvalues, total);
    HermitianMatrix::from_spectrum(&p, &e.vectors)
}

/// Accelerated projected gradient ascent on `log det(I + P G^(1/2) Q G^(1/2))`
/// over the spectrahedron, written as `log det(I + P H Q H^dagger)` with
/// `H = G^(1/2)`.
pub fn water_fill_by_projected_gradient(g: &HermitianMatrix, power: f64) -> HermitianMatrix {
    let m = g.dim();
    let h = g.spectral_map(|l| l.max(0.0).sqrt()).unwrap();
    let top = eig_hermitian(g).unwrap().max();
    let step = 1.0 / (power * top).powi(2).max(1e-12);
    let grad = |q: &HermitianMatrix| {
        let w = q.congruence(h.as_matrix()).unwrap().scaled(power).shifted(1.0);
        let inv = w.spectral_map(|l| 1.0 / l).unwrap();
        inv.congruence(h.as_matrix()).unwrap().scaled(power)
    };
    let mut x = HermitianMatrix::scaled_identity(m, 1.0 / m as f64);
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let mut z = y.clone();
        z.add_scaled(step, &grad(&y));
        let next = project_spectrahedron(&z, 1.0);
        let diff = &next - &x;
        // Restart the momentum whenever it points against the last step.
        if diff.inner_product(&(&y - &next)) > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mut y_next = next.clone();
        y_next.add_scaled((t - 1.0) / t_next, &diff);
        let change = diff.frobenius_norm();
        x = next;
        y = y_next;
        t = t_next;
        if change < 1e-15 {
            break;
        }
    }
    x
}

/// Central finite-difference derivative of the sum rate along a Hermitian
/// direction `e` in user `k`'s block.
pub fn directional_fd(
    q: &CovarianceProfile,
    ch: &ChannelRealization,
    k: usize,
    e: &HermitianMatrix,
    h: f64,
) -> f64 {
    let mut plus = q.blocks().to_vec();
    plus[k].add_scaled(h, e);
    let mut minus = q.blocks().to_vec();
    minus[k].add_scaled(-h, e);
    let rp = sum_rate(&CovarianceProfile::from_blocks(plus), ch).unwrap();
    let rm = sum_rate(&CovarianceProfile::from_blocks(minus), ch).unwrap();
    (rp - rm) / (2.0 * h)
}

/// `e_ij + e_ji` (or `e_ii`) and `i e_ij - i e_ji`.
pub fn real_unit(m: usize, i: usize, j: usize) -> HermitianMatrix {
    let mut a = CMatrix::zeros(m, m);
    a.set(i, j, Complex::new(1.0, 0.0));
    a.set(j, i, Complex::new(1.0, 0.0));
    HermitianMatrix::new(a).unwrap()
}

pub fn imag_unit(m: usize, i: usize, j: usize) -> HermitianMatrix {
    let mut a = CMatrix::zeros(m, m);
    a.set(i, j, Complex::new(0.0, 1.0));
    a.set(j, i, Complex::new(0.0, -1.0));
    HermitianMatrix::new(a).unwrap()
}

/// Gradient of the sum rate in user `k`'s block by central differences,
/// one Hermitian coordinate at a time.
pub fn fd_gradient(q: &CovarianceProfile, ch: &ChannelRealization, k: usize, h: f64) -> CMatrix {
    let m = q.block(k).dim();
    let mut g = CMatrix::zeros(m, m);
    for i in 0..m {
        let d = directional_fd(q, ch, k, &real_unit(m, i, i), h);
        g.set(i, i, Complex::new(d, 0.0));
        for j in (i + 1)..m {
            let re = 0.5 * directional_fd(q, ch, k, &real_unit(m, i, j), h);
            let im = 0.5 * directional_fd(q, ch, k, &imag_unit(m, i, j), h);
            g.set(i, j, Complex::new(re, im));
            g.set(j, i, Complex::new(re, -im));
        }
    }
    g
}

/// Median of a slice.
pub fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
