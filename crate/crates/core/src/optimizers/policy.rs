use std::fmt;

use crate::error::{Error, Result};
use crate::estimators::{min_safety_radius, traceless_dimension, LipschitzEstimates};

/// Exponents of a horizon-tuned constant schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HorizonVariant {
    /// `gamma0 / sqrt(T)` and `delta0 / sqrt(T)`.
    Sqrt,
    /// `gamma0 / T^(3/4)` and `delta0 / T^(1/4)`, tuned for plain SPSA.
    Spsa,
}

/// Step-size and query-radius schedule `(gamma_t, delta_t)`, `t >= 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepPolicy {
    PowerLaw {
        gamma0: f64,
        delta0: f64,
        alpha: f64,
        beta: f64,
    },
    Horizon {
        gamma0: f64,
        delta0: f64,
        horizon: usize,
        variant: HorizonVariant,
    },
}

impl StepPolicy {
    pub fn power_law(gamma0: f64, delta0: f64, alpha: f64, beta: f64) -> Self {
        StepPolicy::PowerLaw {
            gamma0,
            delta0,
            alpha,
            beta,
        }
    }

    pub fn horizon(gamma0: f64, delta0: f64, horizon: usize, variant: HorizonVariant) -> Self {
        StepPolicy::Horizon {
            gamma0,
            delta0,
            horizon,
            variant,
        }
    }

    /// Checks that the schedule is positive and non-increasing.
    pub fn check(&self) -> Result<()> {
        let (g0, d0) = match *self {
            StepPolicy::PowerLaw {
                gamma0,
                delta0,
                alpha,
                beta,
            } => {
                if !(alpha >= 0.0 && alpha.is_finite()) {
                    return Err(Error::config("policy.alpha", "must be finite and non-negative"));
                }
                if !(beta >= 0.0 && beta.is_finite()) {
                    return Err(Error::config("policy.beta", "must be finite and non-negative"));
                }
                (gamma0, delta0)
            }
            StepPolicy::Horizon {
                gamma0,
                delta0,
                horizon,
                ..
            } => {
                if horizon == 0 {
                    return Err(Error::config("policy.horizon", "must be positive"));
                }
                (gamma0, delta0)
            }
        };
        if !(g0 > 0.0 && g0.is_finite()) {
            return Err(Error::config("policy.gamma0", "must be finite and positive"));
        }
        if !(d0 >= 0.0 && d0.is_finite()) {
            return Err(Error::config("policy.delta0", "must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn gamma(&self, t: usize) -> f64 {
        match *self {
            StepPolicy::PowerLaw { gamma0, alpha, .. } => gamma0 * (t as f64).powf(-alpha),
            StepPolicy::Horizon {
                gamma0,
                horizon,
                variant,
                ..
            } => {
                let h = horizon as f64;
                match variant {
                    HorizonVariant::Sqrt => gamma0 / h.sqrt(),
                    HorizonVariant::Spsa => gamma0 / h.powf(0.75),
                }
            }
        }
    }

    pub fn delta(&self, t: usize) -> f64 {
        match *self {
            StepPolicy::PowerLaw { delta0, beta, .. } => delta0 * (t as f64).powf(-beta),
            StepPolicy::Horizon {
                delta0,
                horizon,
                variant,
                ..
            } => {
                let h = horizon as f64;
                match variant {
                    HorizonVariant::Sqrt => delta0 / h.sqrt(),
                    HorizonVariant::Spsa => delta0 / h.powf(0.25),
                }
            }
        }
    }

    /// Fails with `PolicyInfeasible` unless `0 < delta_1 < min_k r_k`.
    pub(crate) fn require_feasible_queries(&self, antennas: &[usize]) -> Result<()> {
        self.check()?;
        let d1 = self.delta(1);
        let r = min_safety_radius(antennas);
        if !(d1 > 0.0) {
            return Err(Error::PolicyInfeasible(format!(
                "initial query radius {d1} must be positive"
            )));
        }
        if d1 >= r {
            return Err(Error::PolicyInfeasible(format!(
                "initial query radius {d1} is not below the safety radius {r}"
            )));
        }
        Ok(())
    }
}

/// Distribution of the set of users updating at an iteration.
#[derive(Clone, Debug, PartialEq)]
pub enum UpdateLaw {
    /// Every user updates at every iteration.
    Full,
    /// Exactly one user, uniformly chosen.
    UniformSingle,
    /// User `k` updates independently with probability `p[k]`.
    Bernoulli(Vec<f64>),
}

impl UpdateLaw {
    /// Marginal activation probability of every user.
    pub fn marginals(&self, num_users: usize) -> Vec<f64> {
        match self {
            UpdateLaw::Full => vec![1.0; num_users],
            UpdateLaw::UniformSingle => vec![1.0 / num_users as f64; num_users],
            UpdateLaw::Bernoulli(p) => p.clone(),
        }
    }

    pub fn check(&self, num_users: usize) -> Result<()> {
        if let UpdateLaw::Bernoulli(p) = self {
            if p.len() != num_users {
                return Err(Error::InvalidUpdateLaw(format!(
                    "{} probabilities for {num_users} users",
                    p.len()
                )));
            }
            for (k, &pk) in p.iter().enumerate() {
                if !(pk > 0.0 && pk <= 1.0) {
                    return Err(Error::InvalidUpdateLaw(format!(
                        "user {k} has update probability {pk}; every user needs 0 < p <= 1"
                    )));
                }
            }
        }
        if num_users == 0 {
            return Err(Error::InvalidUpdateLaw("no users".into()));
        }
        Ok(())
    }
}

/// Which algorithm a schedule is validated for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyMode {
    Mxl0Asymptotic,
    Mxl0Plus,
    Amxl0Plus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Holds with the supplied empirical constants; those are lower bounds,
    /// so this is not a guarantee.
    AdvisoryPass,
    AdvisoryFail,
    NotApplicable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::AdvisoryPass => "advisory-pass",
            Verdict::AdvisoryFail => "advisory-fail",
            Verdict::NotApplicable => "n/a",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionCheck {
    /// Stable identifier, e.g. `H0`, `T1a`, `Ga`.
    pub name: &'static str,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn verdict(&self, name: &str) -> Option<Verdict> {
        self.get(name).map(|c| c.verdict)
    }

    /// True when no hard check failed. Advisory failures do not count.
    pub fn is_feasible(&self) -> bool {
        self.checks.iter().all(|c| c.verdict != Verdict::Fail)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{:<4} {:<14} {}", c.name, c.verdict.to_string(), c.detail)?;
        }
        Ok(())
    }
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Checks a schedule against the feasibility and convergence conditions
/// applicable to `mode`.
///
/// Series conditions of power-law schedules are decided analytically.
/// Conditions involving Lipschitz constants are advisory and reported as
/// not applicable when `constants` is `None`.
pub fn validate_policy(
    policy: &StepPolicy,
    antennas: &[usize],
    mode: PolicyMode,
    constants: Option<&LipschitzEstimates>,
) -> ValidationReport {
    let mut checks = Vec::new();
    if let Err(e) = policy.check() {
        checks.push(ConditionCheck {
            name: "shape",
            verdict: Verdict::Fail,
            detail: e.to_string(),
        });
        return ValidationReport { checks };
    }
    let r = min_safety_radius(antennas);
    let d1 = policy.delta(1);
    checks.push(ConditionCheck {
        name: "H0",
        verdict: verdict(d1 > 0.0 && d1 < r),
        detail: format!("delta_1 = {d1} against min safety radius {r}"),
    });

    match *policy {
        StepPolicy::PowerLaw { alpha, beta, .. } => match mode {
            PolicyMode::Mxl0Asymptotic => {
                checks.push(ConditionCheck {
                    name: "T1a",
                    verdict: verdict(alpha <= 1.0),
                    detail: format!("sum gamma_t diverges iff alpha = {alpha} <= 1"),
                });
                checks.push(ConditionCheck {
                    name: "T1b",
                    verdict: verdict(alpha + beta > 1.0),
                    detail: format!("sum gamma_t delta_t converges iff alpha + beta = {} > 1", alpha + beta),
                });
                checks.push(ConditionCheck {
                    name: "T1c",
                    verdict: verdict(2.0 * (alpha - beta) > 1.0),
                    detail: format!(
                        "sum gamma_t^2 / delta_t^2 converges iff 2(alpha - beta) = {} > 1",
                        2.0 * (alpha - beta)
                    ),
                });
            }
            PolicyMode::Mxl0Plus | PolicyMode::Amxl0Plus => {
                checks.push(ConditionCheck {
                    name: "RMa",
                    verdict: verdict(alpha <= 1.0),
                    detail: format!("sum gamma_t diverges iff alpha = {alpha} <= 1"),
                });
                checks.push(ConditionCheck {
                    name: "RMb",
                    verdict: verdict(alpha > 0.5),
                    detail: format!("sum gamma_t^2 converges iff alpha = {alpha} > 1/2"),
                });
                checks.push(ConditionCheck {
                    name: "Gc",
                    verdict: verdict(alpha + beta > 1.0),
                    detail: format!("sum gamma_t delta_t converges iff alpha + beta = {} > 1", alpha + beta),
                });
                checks.push(ConditionCheck {
                    name: "Gb",
                    verdict: Verdict::Pass,
                    detail: format!("delta_t / delta_(t+1) <= 2^beta = {}", 2f64.powf(beta)),
                });
                checks.push(ConditionCheck {
                    name: "Hb",
                    verdict: verdict(0.0 <= beta && beta <= alpha && alpha <= 1.0 && alpha + beta > 1.0),
                    detail: format!("0 <= beta <= alpha <= 1 and alpha + beta > 1 with (alpha, beta) = ({alpha}, {beta})"),
                });
            }
        },
        StepPolicy::Horizon { horizon, .. } => {
            checks.push(ConditionCheck {
                name: "T1",
                verdict: Verdict::NotApplicable,
                detail: format!("constant schedule tuned for a horizon of {horizon} iterations"),
            });
            if mode != PolicyMode::Mxl0Asymptotic {
                checks.push(ConditionCheck {
                    name: "Gb",
                    verdict: Verdict::Pass,
                    detail: "delta_t / delta_(t+1) = 1".into(),
                });
            }
        }
    }

    if mode != PolicyMode::Mxl0Asymptotic {
        checks.extend(lipschitz_checks(policy, antennas, constants));
    }
    ValidationReport { checks }
}

// The step-ratio condition reads `sup_t gamma_t / delta_(t+1) < 2 / (d L K)`
// with unit strong-convexity modulus. For power laws with beta <= alpha the
// supremum sits at t = 1; otherwise it is infinite.
fn lipschitz_checks(policy: &StepPolicy, antennas: &[usize], constants: Option<&LipschitzEstimates>) -> Vec<ConditionCheck> {
    let sup_ratio = match *policy {
        StepPolicy::PowerLaw { alpha, beta, .. } if beta > alpha => f64::INFINITY,
        _ => policy.gamma(1) / policy.delta(2),
    };
    let Some(c) = constants else {
        let mut out = vec![ConditionCheck {
            name: "Ga",
            verdict: Verdict::NotApplicable,
            detail: "no Lipschitz estimates supplied".into(),
        }];
        if matches!(policy, StepPolicy::PowerLaw { .. }) {
            out.push(ConditionCheck {
                name: "Ha",
                verdict: Verdict::NotApplicable,
                detail: "no Lipschitz estimates supplied".into(),
            });
        }
        return out;
    };
    let d = antennas.iter().map(|&m| traceless_dimension(m)).max().unwrap_or(0) as f64;
    let bound = 2.0 / (d * c.rate_lipschitz * antennas.len() as f64);
    let advisory = |ok: bool| if ok { Verdict::AdvisoryPass } else { Verdict::AdvisoryFail };
    let mut out = vec![ConditionCheck {
        name: "Ga",
        verdict: advisory(sup_ratio < bound),
        detail: format!("sup gamma_t / delta_(t+1) = {sup_ratio} against 2 / (d L K) = {bound}"),
    }];
    if let StepPolicy::PowerLaw { gamma0, delta0, .. } = *policy {
        let r = min_safety_radius(antennas);
        out.push(ConditionCheck {
            name: "Ha",
            verdict: advisory(gamma0 / delta0 < bound && delta0 < r),
            detail: format!("(d L K / 2) gamma0 = {} against delta0 = {delta0} < {r}", gamma0 / bound),
        });
    }
    out
}

/// Heuristic `(gamma0, delta0)` for [`HorizonVariant::Sqrt`] schedules of
/// the offset learner, from estimated constants.
///
/// With `m` the largest antenna count, `d = m^2 - 1`, `L` the rate
/// Lipschitz constant and `lambda` the mean gradient Lipschitz constant:
/// `gamma0 = sqrt(ln m / (d L^2)) / (sqrt(lambda) + sqrt(2 d L))` and
/// `delta0 = sqrt(d L ln m / lambda) / 2`. The estimates are lower bounds,
/// so the result is a starting point, not a guarantee.
pub fn heuristic_constants(constants: &LipschitzEstimates, antennas: &[usize]) -> Result<(f64, f64)> {
    let m = antennas.iter().copied().max().unwrap_or(0);
    if m < 2 {
        return Err(Error::InvalidInput("at least one user with two antennas is required".into()));
    }
    let (l, lambda) = (constants.rate_lipschitz, constants.mean);
    if !(l > 0.0 && lambda > 0.0 && l.is_finite() && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "constants must be positive and finite, got L = {l}, lambda = {lambda}"
        )));
    }
    let d = traceless_dimension(m) as f64;
    let log_m = (m as f64).ln();
    let gamma0 = (log_m / (d * l * l)).sqrt() / (lambda.sqrt() + (2.0 * d * l).sqrt());
    let delta0 = (d * l * log_m / lambda).sqrt() / 2.0;
    Ok((gamma0, delta0))
}
