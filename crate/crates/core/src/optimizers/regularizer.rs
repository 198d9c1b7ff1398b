//! Von Neumann entropy and its Fenchel coupling, the potential used to
//! analyse the learning dynamics.

use crate::error::Result;
use crate::hermitian::HermitianMatrix;

/// `tr(Q log Q)` with eigenvalues clipped at zero and `0 log 0 = 0`.
pub fn entropy(q: &HermitianMatrix) -> Result<f64> {
    let e = q.eig()?;
    Ok(e.eigenvalues
        .iter()
        .map(|&l| if l > 0.0 { l * l.ln() } else { 0.0 })
        .sum())
}

/// `ln tr exp(Y)`, evaluated with the top eigenvalue factored out.
pub fn log_trace_exp(y: &HermitianMatrix) -> Result<f64> {
    let e = y.eig()?;
    let top = e.max();
    let s: f64 = e.eigenvalues.iter().map(|&l| (l - top).exp()).sum();
    Ok(top + s.ln())
}

/// `h(Q*) + ln tr exp(Y) - tr(Y Q*)`; non-negative and zero exactly when
/// `Q*` is the image of `Y` under the exponential map.
pub fn fenchel_coupling(q_star: &HermitianMatrix, y: &HermitianMatrix) -> Result<f64> {
    Ok(entropy(q_star)? + log_trace_exp(y)? - y.inner_product(q_star))
}
