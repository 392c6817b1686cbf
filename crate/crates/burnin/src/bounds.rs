//! Total-variation upper bounds and sufficient burn-in search.
//!
//! Two bound families are supported. The first combines a `(gamma, b)`
//! drift pair with a minorization constant `epsilon` on a sublevel set of
//! radius `d_R > 2b/(1-gamma)` and yields, for any `0 < r < 1`,
//!
//! ```text
//! ||P^n(x0, .) - pi|| <= (1-eps)^(r n)
//!     + (U^r / alpha^(1-r))^n (1 + b/(1-gamma) + V(x0))
//! ```
//!
//! with `alpha = (1 + d_R)/(1 + 2b + gamma d_R)` and
//! `U = 1 + 2(gamma d_R + b)`. The second consumes a `(rho, L)` drift
//! pair with the indicator supported on `S = {W <= d_RT}`,
//! `d_RT >= L/(1-rho) - 1`, and evaluates the regeneration-time bound
//! through the constants `kappa, J, zeta, eta, beta`.
//!
//! All bound arithmetic is performed term-wise in log space: exponents in
//! this problem legitimately reach magnitudes around `1e52` iterations and
//! minorization constants fall below `1e-48`, so naive evaluation would
//! overflow or underflow long before the interesting regime.

use crate::certificates::CertificateError;
use crate::model::ModelError;
use crate::samplers::SamplerError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("bound precondition violated: {inequality} (slack {slack:.6e})")]
    PreconditionViolated { inequality: String, slack: f64 },
    #[error("J = {j:.6} < 1: this regime is not supported by the implemented bound")]
    JLessThanOne { j: f64 },
    #[error("n' = k - zeta = {n_prime:.6} must exceed eta(1-eps)/eps = {floor:.6e}")]
    NPrimeTooSmall { n_prime: f64, floor: f64 },
    #[error("beta = {beta} outside [1, beta_rt) = [1, {beta_rt})")]
    BetaOutOfRange { beta: f64, beta_rt: f64 },
    #[error("bound is not contractive: per-step factor {factor_name} = {factor} >= 1")]
    NonContractive { factor_name: &'static str, factor: f64 },
    #[error("target {target} unreachable: bound is {bound_at_cap:.6e} at the n = {cap:.1e} search cap")]
    TargetUnreachable { target: f64, bound_at_cap: f64, cap: f64 },
    #[error("target total-variation level must lie in (0, 1), got {0}")]
    InvalidTarget(f64),
    #[error("every grid point was infeasible ({0} evaluated)")]
    AllPointsInfeasible(usize),
    #[error("grid specification invalid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Which bound formula to drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    Rosenthal,
    RobertsTweedie,
}

impl Theorem {
    pub fn as_str(self) -> &'static str {
        match self {
            Theorem::Rosenthal => "rosenthal",
            Theorem::RobertsTweedie => "roberts-tweedie",
        }
    }
}

/// Inputs to the drift/minorization bound in `(gamma, b)` form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RosenthalInputs {
    pub gamma: f64,
    pub b: f64,
    pub epsilon: f64,
    pub d_r: f64,
    pub r: f64,
    /// Drift value at the starting state.
    pub v0: f64,
}

impl RosenthalInputs {
    pub fn validate(&self) -> Result<(), BoundsError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(BoundsError::PreconditionViolated {
                inequality: format!("0 < gamma < 1, got {}", self.gamma),
                slack: f64::NAN,
            });
        }
        if !(self.b >= 0.0) || !self.b.is_finite() {
            return Err(BoundsError::PreconditionViolated {
                inequality: format!("0 <= b < inf, got {}", self.b),
                slack: f64::NAN,
            });
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(BoundsError::PreconditionViolated {
                inequality: format!("0 < epsilon <= 1, got {}", self.epsilon),
                slack: f64::NAN,
            });
        }
        let floor = 2.0 * self.b / (1.0 - self.gamma);
        if !(self.d_r > floor) {
            return Err(BoundsError::PreconditionViolated {
                inequality: format!("d_R > 2b/(1-gamma): {} > {floor}", self.d_r),
                slack: self.d_r - floor,
            });
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(BoundsError::PreconditionViolated {
                inequality: format!("0 < r < 1, got {}", self.r),
                slack: f64::NAN,
            });
        }
        if !(self.v0 >= 0.0) {
            return Err(BoundsError::PreconditionViolated {
                inequality: format!("V(x0) >= 0, got {}", self.v0),
                slack: f64::NAN,
            });
        }
        Ok(())
    }

    /// `alpha = (1 + d_R) / (1 + 2b + gamma d_R)`.
    pub fn alpha(&self) -> f64 {
        (1.0 + self.d_r) / (1.0 + 2.0 * self.b + self.gamma * self.d_r)
    }

    /// `U = 1 + 2(gamma d_R + b)`.
    pub fn u(&self) -> f64 {
        1.0 + 2.0 * (self.gamma * self.d_r + self.b)
    }

    /// Log of the drift term's per-step factor `U^r / alpha^(1-r)`.
    pub fn log_drift_factor(&self) -> f64 {
        self.r * self.u().ln() - (1.0 - self.r) * self.alpha().ln()
    }

    fn coefficient(&self) -> f64 {
        1.0 + self.b / (1.0 - self.gamma) + self.v0
    }
}

/// Evaluates the `(gamma, b)`-form bound at real-valued iteration count `n`.
pub fn rosenthal_bound(inputs: &RosenthalInputs, n: f64) -> Result<f64, BoundsError> {
    inputs.validate()?;
    if !(n >= 0.0) {
        return Err(BoundsError::PreconditionViolated {
            inequality: format!("n >= 0, got {n}"),
            slack: f64::NAN,
        });
    }
    let term1 = (inputs.r * n * (-inputs.epsilon).ln_1p()).exp();
    let term2 = inputs.coefficient() * (n * inputs.log_drift_factor()).exp();
    Ok((term1 + term2).max(0.0))
}

/// Inputs to the regeneration-time bound in `(rho, L)` form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtInputs {
    pub rho: f64,
    pub l: f64,
    pub epsilon: f64,
    pub d_rt: f64,
    /// `W` value at the starting state (`W = 1 + V`, so `w0 >= 1`).
    pub w0: f64,
    /// Optional override for `beta`; when absent the near-optimal
    /// `beta_rt / (1 + eta/n')^(1/eta)` is used at each `n'`.
    pub beta: Option<f64>,
}

/// The derived constants of the regeneration-time bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtConstants {
    pub kappa: f64,
    pub j: f64,
    pub zeta: f64,
    pub eta: f64,
    pub beta_rt: f64,
}

impl RtInputs {
    pub fn validate(&self) -> Result<(), BoundsError> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(BoundsError::PreconditionViolated {
                inequality: format!("0 < rho < 1, got {}", self.rho),
                slack: f64::NAN,
            });
        }
        if !(self.l >= 0.0) || !self.l.is_finite() {
            return Err(BoundsError::PreconditionViolated {
                inequality: format!("0 <= L < inf, got {}", self.l),
                slack: f64::NAN,
            });
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(BoundsError::PreconditionViolated {
                inequality: format!("0 < epsilon <= 1, got {}", self.epsilon),
                slack: f64::NAN,
            });
        }
        let floor = self.l / (1.0 - self.rho) - 1.0;
        if !(self.d_rt >= floor) {
            return Err(BoundsError::PreconditionViolated {
                inequality: format!("d_RT >= L/(1-rho) - 1: {} >= {floor}", self.d_rt),
                slack: self.d_rt - floor,
            });
        }
        if !(self.w0 >= 1.0) {
            return Err(BoundsError::PreconditionViolated {
                inequality: format!("W(x0) >= 1, got {}", self.w0),
                slack: f64::NAN,
            });
        }
        Ok(())
    }

    pub fn constants(&self) -> Result<RtConstants, BoundsError> {
        self.validate()?;
        let kappa = self.rho + self.l / (1.0 + self.d_rt);
        if !(kappa < 1.0) {
            return Err(BoundsError::NonContractive {
                factor_name: "kappa",
                factor: kappa,
            });
        }
        let j = ((kappa * self.d_rt - self.epsilon) * (1.0 + self.d_rt) + self.l * self.d_rt)
            / ((1.0 + self.d_rt) * kappa);
        if j < 1.0 {
            return Err(BoundsError::JLessThanOne { j });
        }
        let log_inv_kappa = -kappa.ln();
        let zeta = (0.5 * (self.l / (1.0 - self.rho) + self.w0)).ln() / log_inv_kappa;
        let log_1m_eps = (-self.epsilon).ln_1p();
        let eta = (j.ln() - log_1m_eps) / log_inv_kappa;
        let beta_rt = (kappa.ln() * log_1m_eps / (j.ln() - log_1m_eps)).exp();
        Ok(RtConstants { kappa, j, zeta, eta, beta_rt })
    }

    /// Smallest admissible real iteration count: `zeta + eta (1-eps)/eps`.
    pub fn min_iterations(&self) -> Result<f64, BoundsError> {
        let c = self.constants()?;
        Ok(c.zeta + c.eta * (1.0 - self.epsilon) / self.epsilon)
    }
}

/// Evaluates the `(rho, L)`-form bound at real-valued iteration count `k`.
pub fn rt_bound(inputs: &RtInputs, k: f64) -> Result<f64, BoundsError> {
    let c = inputs.constants()?;
    let n_prime = k - c.zeta;
    let floor = c.eta * (1.0 - inputs.epsilon) / inputs.epsilon;
    if !(n_prime > floor) {
        return Err(BoundsError::NPrimeTooSmall { n_prime, floor });
    }
    // (1 + eta/n')^(1/eta) in log space.
    let log_growth = (c.eta / n_prime).ln_1p() / c.eta;
    let beta = match inputs.beta {
        Some(beta) => {
            if !(1.0 <= beta && beta < c.beta_rt) {
                return Err(BoundsError::BetaOutOfRange { beta, beta_rt: c.beta_rt });
            }
            beta
        }
        // Near-optimal choice; clamped to the admissible floor when the
        // horizon is so short that the optimizer dips below 1.
        None => (c.beta_rt * (-log_growth).exp()).max(1.0),
    };
    let log_bracket_arg = beta.ln() + (-inputs.epsilon).ln_1p() - log_growth;
    // bracket = 1 - beta(1-eps)/(1+eta/n')^(1/eta)
    if log_bracket_arg >= 0.0 {
        return Ok(0.0);
    }
    let bracket = -log_bracket_arg.exp_m1();
    let log_bound = bracket.ln()
        + (n_prime / c.eta).ln_1p()
        + (n_prime / c.eta) * (c.eta / n_prime).ln_1p()
        - n_prime * beta.ln();
    Ok(log_bound.exp())
}

/// Search cap: beyond this iteration count the target is declared
/// unreachable.
pub const MAX_ITERATIONS: f64 = 1e60;

/// A bound formula viewed as a function of the real iteration count.
pub trait BoundEvaluator {
    /// Bound value at real-valued `n`.
    fn bound(&self, n: f64) -> Result<f64, BoundsError>;
    /// Smallest admissible `n` (exclusive); 0 when every `n >= 0` is valid.
    fn min_n(&self) -> f64;
    /// Verifies every per-step geometric factor is < 1.
    fn check_contractive(&self) -> Result<(), BoundsError>;
    /// Named per-step contraction factors for reporting.
    fn geometric_factors(&self) -> Vec<(&'static str, f64)>;
}

/// [`RosenthalInputs`] as a bound evaluator.
pub struct RosenthalEvaluator(pub RosenthalInputs);

impl BoundEvaluator for RosenthalEvaluator {
    fn bound(&self, n: f64) -> Result<f64, BoundsError> {
        rosenthal_bound(&self.0, n)
    }

    fn min_n(&self) -> f64 {
        -1.0
    }

    fn check_contractive(&self) -> Result<(), BoundsError> {
        self.0.validate()?;
        let f = self.0.log_drift_factor();
        if f >= 0.0 {
            return Err(BoundsError::NonContractive {
                factor_name: "U^r / alpha^(1-r)",
                factor: f.exp(),
            });
        }
        Ok(())
    }

    fn geometric_factors(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("(1-epsilon)^r", (self.0.r * (-self.0.epsilon).ln_1p()).exp()),
            ("U^r / alpha^(1-r)", self.0.log_drift_factor().exp()),
        ]
    }
}

/// [`RtInputs`] as a bound evaluator.
pub struct RtEvaluator(pub RtInputs);

impl BoundEvaluator for RtEvaluator {
    fn bound(&self, n: f64) -> Result<f64, BoundsError> {
        rt_bound(&self.0, n)
    }

    fn min_n(&self) -> f64 {
        self.0.min_iterations().unwrap_or(f64::INFINITY)
    }

    fn check_contractive(&self) -> Result<(), BoundsError> {
        let c = self.0.constants()?;
        let beta = self.0.beta.unwrap_or(c.beta_rt);
        if !(beta > 1.0) {
            return Err(BoundsError::NonContractive { factor_name: "1/beta", factor: 1.0 / beta });
        }
        Ok(())
    }

    fn geometric_factors(&self) -> Vec<(&'static str, f64)> {
        match self.0.constants() {
            Ok(c) => {
                let beta = self.0.beta.unwrap_or(c.beta_rt);
                vec![("1/beta", 1.0 / beta)]
            }
            Err(_) => vec![],
        }
    }
}

/// A sufficient burn-in together with the evidence that produced it.
#[derive(Debug, Clone)]
pub struct BurninResult {
    /// The burn-in as an integer-valued real; beyond 2^53 this is the
    /// ceiling of the real-valued crossing found by bisection.
    pub n_star: f64,
    /// Exact integer value when it fits the exactly-representable range.
    pub n_star_exact: Option<u128>,
    pub bound_at_n_star: f64,
    pub target_tv: f64,
    pub geometric_factors: Vec<(&'static str, f64)>,
}

impl BurninResult {
    /// Exact decimal representation of the burn-in count.
    pub fn n_star_decimal(&self) -> String {
        match self.n_star_exact {
            Some(n) => n.to_string(),
            None => format!("{:.0}", self.n_star),
        }
    }
}

/// Finds the smallest admissible integer `n` with `bound(n) <= target` by
/// exponential doubling followed by bisection on the monotone tail.
pub fn find_burnin<E: BoundEvaluator>(
    evaluator: &E,
    target_tv: f64,
) -> Result<BurninResult, BoundsError> {
    if !(target_tv > 0.0 && target_tv < 1.0) {
        return Err(BoundsError::InvalidTarget(target_tv));
    }
    evaluator.check_contractive()?;

    let min_n = evaluator.min_n();
    let first_valid = if min_n < 0.0 { 0.0 } else { min_n.floor() + 1.0 };
    if first_valid > MAX_ITERATIONS {
        return Err(BoundsError::TargetUnreachable {
            target: target_tv,
            bound_at_cap: f64::INFINITY,
            cap: MAX_ITERATIONS,
        });
    }

    // The bound may not be evaluable below first_valid; never probe there.
    if evaluator.bound(first_valid)? <= target_tv {
        return finish(evaluator, first_valid, first_valid, target_tv);
    }

    let mut lo = first_valid;
    let mut hi = (first_valid * 2.0).max(first_valid + 1.0).max(1.0);
    loop {
        if hi > MAX_ITERATIONS {
            let at_cap = evaluator.bound(MAX_ITERATIONS)?;
            if at_cap <= target_tv {
                hi = MAX_ITERATIONS;
                break;
            }
            return Err(BoundsError::TargetUnreachable {
                target: target_tv,
                bound_at_cap: at_cap,
                cap: MAX_ITERATIONS,
            });
        }
        if evaluator.bound(hi)? <= target_tv {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }

    // Bisect the crossing on [lo, hi].
    while hi - lo > 0.5 && hi - lo > 1e-15 * hi {
        let mid = lo + 0.5 * (hi - lo);
        if evaluator.bound(mid)? <= target_tv {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    finish(evaluator, hi.ceil(), first_valid, target_tv)
}

fn finish<E: BoundEvaluator>(
    evaluator: &E,
    mut n: f64,
    first_valid: f64,
    target_tv: f64,
) -> Result<BurninResult, BoundsError> {
    const EXACT_LIMIT: f64 = 9.007_199_254_740_992e15; // 2^53

    if n <= EXACT_LIMIT {
        // Integer refinement: guarantee minimality on the representable range.
        while evaluator.bound(n)? > target_tv {
            n += 1.0;
        }
        while n > first_valid && evaluator.bound(n - 1.0)? <= target_tv {
            n -= 1.0;
        }
    }
    let bound_at = evaluator.bound(n)?;
    Ok(BurninResult {
        n_star: n,
        n_star_exact: (n <= EXACT_LIMIT).then(|| n as u128),
        bound_at_n_star: bound_at,
        target_tv,
        geometric_factors: evaluator.geometric_factors(),
    })
}
