use crate::error::{Error, Result};

/// Least-squares slope of `ln gap` against `ln t` over `window = [lo, hi]`.
///
/// Points outside the window or with non-positive gap are ignored; at least
/// ten must remain.
pub fn fit_loglog_slope(series: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window;
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|&&(t, g)| t >= lo && t <= hi && t > 0.0 && g > 0.0 && g.is_finite())
        .map(|&(t, g)| (t.ln(), g.ln()))
        .collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} usable points in [{lo}, {hi}], need at least 10",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("all points share one abscissa".into()));
    }
    Ok(sxy / sxx)
}
