//! The Bayesian one-way random effects model: observed-data summaries,
//! prior hyperparameters, chain states, drift-function evaluation and
//! optimal starting values.
//!
//! The model has `K` groups with `m_i` observations each,
//!
//! ```text
//! y_ij | theta, lambda_e   ~ N(theta_i, 1/lambda_e)
//! theta_i | mu, lambda_th  ~ N(mu, 1/lambda_theta)
//! mu ~ N(m0, 1/s0),   lambda_theta ~ Gamma(a1, b1),   lambda_e ~ Gamma(a2, b2)
//! ```
//!
//! with Gamma(shape, rate) parameterization throughout. Every formula in
//! this crate consumes only the sufficient statistics carried by
//! [`Dataset`], so datasets can be ingested either from raw observations
//! or directly from summaries.

use crate::numerics::{minimize_scalar, NumericsError};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("K >= 3 violated: got {0} groups")]
    TooFewGroups(usize),
    #[error("m' >= 2 violated: group {group} has {count} observation(s)")]
    TooFewObservations { group: usize, count: usize },
    #[error("{name} must be positive, got {value}")]
    NonpositivePrecision { name: &'static str, value: f64 },
    #[error("hyperparameter {name} must be positive, got {value}")]
    InvalidHyperparameter { name: &'static str, value: f64 },
    #[error("SSE must be nonnegative, got {0}")]
    NegativeSse(f64),
    #[error("group count/mean lists have mismatched lengths: {counts} vs {means}")]
    MismatchedSummaries { counts: usize, means: usize },
    #[error("state has {got} group means but the dataset has {want} groups")]
    StateDimensionMismatch { got: usize, want: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Sufficient statistics of the observed data.
///
/// Raw observations are reduced at ingestion; everything downstream is
/// summary-only. `grand_mean` is the double-sum mean `M^-1 sum_ij y_ij`,
/// which differs from the average of the group means when the design is
/// unbalanced; both conventions are exposed and never silently conflated.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    m: Vec<u64>,
    ybar: Vec<f64>,
    sse: f64,
    total: u64,
    grand_mean: f64,
    s2: f64,
}

impl Dataset {
    /// Builds the summaries from raw per-group observations.
    pub fn from_groups(groups: &[Vec<f64>]) -> Result<Self, ModelError> {
        for (i, g) in groups.iter().enumerate() {
            if g.len() < 2 {
                return Err(ModelError::TooFewObservations { group: i + 1, count: g.len() });
            }
        }
        if groups.len() < 3 {
            return Err(ModelError::TooFewGroups(groups.len()));
        }
        let m: Vec<u64> = groups.iter().map(|g| g.len() as u64).collect();
        let ybar: Vec<f64> =
            groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
        let sse = groups
            .iter()
            .zip(&ybar)
            .map(|(g, &yb)| g.iter().map(|y| (y - yb) * (y - yb)).sum::<f64>())
            .sum();
        Self::assemble(m, ybar, sse)
    }

    /// Builds a dataset directly from summaries.
    pub fn from_summaries(m: Vec<u64>, ybar: Vec<f64>, sse: f64) -> Result<Self, ModelError> {
        if m.len() != ybar.len() {
            return Err(ModelError::MismatchedSummaries { counts: m.len(), means: ybar.len() });
        }
        for (i, &mi) in m.iter().enumerate() {
            if mi < 2 {
                return Err(ModelError::TooFewObservations { group: i + 1, count: mi as usize });
            }
        }
        if m.len() < 3 {
            return Err(ModelError::TooFewGroups(m.len()));
        }
        if !(sse >= 0.0) {
            return Err(ModelError::NegativeSse(sse));
        }
        Self::assemble(m, ybar, sse)
    }

    fn assemble(m: Vec<u64>, ybar: Vec<f64>, sse: f64) -> Result<Self, ModelError> {
        let total: u64 = m.iter().sum();
        let grand_mean = m
            .iter()
            .zip(&ybar)
            .map(|(&mi, &yb)| mi as f64 * yb)
            .sum::<f64>()
            / total as f64;
        let s2 = ybar.iter().map(|&yb| (yb - grand_mean) * (yb - grand_mean)).sum();
        Ok(Self { m, ybar, sse, total, grand_mean, s2 })
    }

    pub fn k(&self) -> usize {
        self.m.len()
    }

    /// Per-group observation counts `m_i`.
    pub fn counts(&self) -> &[u64] {
        &self.m
    }

    /// Group means.
    pub fn group_means(&self) -> &[f64] {
        &self.ybar
    }

    /// Within-group sum of squares.
    pub fn sse(&self) -> f64 {
        self.sse
    }

    /// Total observation count `M`.
    pub fn total_count(&self) -> u64 {
        self.total
    }

    /// Grand mean `M^-1 sum_ij y_ij`.
    pub fn grand_mean(&self) -> f64 {
        self.grand_mean
    }

    /// Between-group sum of squares about the grand mean.
    pub fn s2(&self) -> f64 {
        self.s2
    }

    /// Unweighted average of the group means, `K^-1 sum_i ybar_i`.
    pub fn cell_mean(&self) -> f64 {
        self.ybar.iter().sum::<f64>() / self.k() as f64
    }

    /// `Some(m)` when all groups share the common count `m`.
    pub fn balanced(&self) -> Option<u64> {
        let first = self.m[0];
        self.m.iter().all(|&mi| mi == first).then_some(first)
    }

    /// Smallest group count `m'`.
    pub fn min_count(&self) -> u64 {
        *self.m.iter().min().expect("dataset has at least three groups")
    }

    /// Largest group count `m''`.
    pub fn max_count(&self) -> u64 {
        *self.m.iter().max().expect("dataset has at least three groups")
    }

    /// `sum_i 1/m_i`.
    pub fn inv_count_sum(&self) -> f64 {
        self.m.iter().map(|&mi| 1.0 / mi as f64).sum()
    }

    /// Length of the convex hull of the group means together with `m0`.
    pub fn hull_length(&self, m0: f64) -> f64 {
        let mut lo = m0;
        let mut hi = m0;
        for &yb in &self.ybar {
            lo = lo.min(yb);
            hi = hi.max(yb);
        }
        hi - lo
    }
}

/// The six prior constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    pub m0: f64,
    pub s0: f64,
}

impl Hyperparameters {
    pub fn new(a1: f64, b1: f64, a2: f64, b2: f64, m0: f64, s0: f64) -> Result<Self, ModelError> {
        let h = Self { a1, b1, a2, b2, m0, s0 };
        h.validate()?;
        Ok(h)
    }

    /// All constants except `m0` must be strictly positive so the priors
    /// are proper.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("a1", self.a1),
            ("b1", self.b1),
            ("a2", self.a2),
            ("b2", self.b2),
            ("s0", self.s0),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ModelError::InvalidHyperparameter { name, value: v });
            }
        }
        if !self.m0.is_finite() {
            return Err(ModelError::InvalidHyperparameter { name: "m0", value: self.m0 });
        }
        Ok(())
    }
}

/// One state of either Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub theta: Vec<f64>,
    pub mu: f64,
    pub lambda_theta: f64,
    pub lambda_e: f64,
}

impl ChainState {
    pub fn validate(&self, dataset: &Dataset) -> Result<(), ModelError> {
        if self.theta.len() != dataset.k() {
            return Err(ModelError::StateDimensionMismatch {
                got: self.theta.len(),
                want: dataset.k(),
            });
        }
        check_precision("lambda_theta", self.lambda_theta)?;
        check_precision("lambda_e", self.lambda_e)
    }

    pub fn theta_mean(&self) -> f64 {
        self.theta.iter().sum::<f64>() / self.theta.len() as f64
    }
}

fn check_precision(name: &'static str, v: f64) -> Result<(), ModelError> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(ModelError::NonpositivePrecision { name, value: v });
    }
    Ok(())
}

/// Drift-function weights for the block sampler, `V(theta, mu) =
/// phi1 * v1(theta, mu) + phi2 * v2(theta)`. The balanced case uses
/// `(phi, 1/m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockDriftSpec {
    pub phi1: f64,
    pub phi2: f64,
    pub gamma: f64,
}

impl BlockDriftSpec {
    pub fn new(phi1: f64, phi2: f64, gamma: f64) -> Result<Self, ModelError> {
        if !(phi1 > 0.0) {
            return Err(ModelError::InvalidHyperparameter { name: "phi1", value: phi1 });
        }
        if !(phi2 > 0.0) {
            return Err(ModelError::InvalidHyperparameter { name: "phi2", value: phi2 });
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(ModelError::InvalidHyperparameter { name: "gamma", value: gamma });
        }
        Ok(Self { phi1, phi2, gamma })
    }
}

/// Drift-function parameters for the single-site Gibbs sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsDriftSpec {
    pub c3: f64,
    pub gamma: f64,
    pub rho1_slack: f64,
}

pub const DEFAULT_RHO1_SLACK: f64 = 1e-5;

impl GibbsDriftSpec {
    pub fn new(c3: f64, gamma: f64, rho1_slack: f64) -> Result<Self, ModelError> {
        if !(c3 > 0.0) {
            return Err(ModelError::InvalidHyperparameter { name: "c3", value: c3 });
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(ModelError::InvalidHyperparameter { name: "gamma", value: gamma });
        }
        if !(rho1_slack > 0.0) {
            return Err(ModelError::InvalidHyperparameter { name: "rho1_slack", value: rho1_slack });
        }
        Ok(Self { c3, gamma, rho1_slack })
    }
}

/// `v1(theta, mu) = sum_i (theta_i - mu)^2`.
pub fn v1(state: &ChainState) -> f64 {
    state.theta.iter().map(|&t| (t - state.mu) * (t - state.mu)).sum()
}

/// `v2(theta) = sum_i m_i (theta_i - ybar_i)^2`.
pub fn v2(state: &ChainState, dataset: &Dataset) -> f64 {
    state
        .theta
        .iter()
        .zip(dataset.counts())
        .zip(dataset.group_means())
        .map(|((&t, &mi), &yb)| mi as f64 * (t - yb) * (t - yb))
        .sum()
}

/// Block-sampler drift function `phi1 * v1 + phi2 * v2`.
pub fn eval_block_drift(
    state: &ChainState,
    spec: &BlockDriftSpec,
    dataset: &Dataset,
) -> Result<f64, ModelError> {
    state.validate(dataset)?;
    Ok(spec.phi1 * v1(state) + spec.phi2 * v2(state, dataset))
}

/// The weight `delta7 / (K * delta1)` of the `1/lambda_theta` drift term.
pub(crate) fn gibbs_inv_term_weight(dataset: &Dataset, hyper: &Hyperparameters) -> f64 {
    let k = dataset.k() as f64;
    let delta1 = 1.0 / (2.0 * hyper.a1 + k - 2.0);
    let delta7 = 1.0 / (2.0 * (hyper.a1 - 1.0));
    delta7 / (k * delta1)
}

/// `v3(theta, lambda) = K lambda_theta / (s0 + K lambda_theta) * (theta_bar - ygrand)^2`.
pub fn v3(state: &ChainState, dataset: &Dataset, hyper: &Hyperparameters) -> f64 {
    let k = dataset.k() as f64;
    let w = k * state.lambda_theta / (hyper.s0 + k * state.lambda_theta);
    let dev = state.theta_mean() - dataset.grand_mean();
    w * dev * dev
}

/// Gibbs-sampler drift function
/// `exp(c3 l_th) + exp(c3 l_e) + delta7/(K delta1 l_th) + v3`.
///
/// Requires `a1 > 3/2` so that the `1/lambda_theta` weight is a valid
/// drift constant.
pub fn eval_gibbs_drift(
    state: &ChainState,
    spec: &GibbsDriftSpec,
    hyper: &Hyperparameters,
    dataset: &Dataset,
) -> Result<f64, ModelError> {
    state.validate(dataset)?;
    if hyper.a1 <= 1.5 {
        return Err(ModelError::InvalidHyperparameter { name: "a1 (must exceed 3/2)", value: hyper.a1 });
    }
    let q = gibbs_inv_term_weight(dataset, hyper);
    Ok((spec.c3 * state.lambda_theta).exp()
        + (spec.c3 * state.lambda_e).exp()
        + q / state.lambda_theta
        + v3(state, dataset, hyper))
}

/// Log of the unnormalized joint posterior at `state`, up to an additive
/// constant independent of the state. Expressed through sufficient
/// statistics only.
pub fn log_unnormalized_posterior(
    state: &ChainState,
    dataset: &Dataset,
    hyper: &Hyperparameters,
) -> Result<f64, ModelError> {
    state.validate(dataset)?;
    let lt = state.lambda_theta;
    let le = state.lambda_e;
    let k = dataset.k() as f64;
    let m_tot = dataset.total_count() as f64;
    let dev_mu = state.mu - hyper.m0;
    Ok(0.5 * m_tot * le.ln() - 0.5 * le * (dataset.sse() + v2(state, dataset))
        + 0.5 * k * lt.ln() - 0.5 * lt * v1(state)
        + (hyper.a2 - 1.0) * le.ln() - hyper.b2 * le
        + (hyper.a1 - 1.0) * lt.ln() - hyper.b1 * lt
        - 0.5 * hyper.s0 * dev_mu * dev_mu)
}

/// Global minimizer of the block drift function.
///
/// Returns `(theta_hat, mu_hat)` where each component shrinks the group
/// mean toward the common weighted mean and `mu_hat` is the average of
/// the `theta_hat_i`.
pub fn optimal_start_block(spec: &BlockDriftSpec, dataset: &Dataset) -> (Vec<f64>, f64) {
    let num: f64 = dataset
        .counts()
        .iter()
        .zip(dataset.group_means())
        .map(|(&mi, &yb)| mi as f64 * yb / (spec.phi1 + spec.phi2 * mi as f64))
        .sum();
    let den: f64 = dataset
        .counts()
        .iter()
        .map(|&mi| mi as f64 / (spec.phi1 + spec.phi2 * mi as f64))
        .sum();
    let common = num / den;
    let theta: Vec<f64> = dataset
        .counts()
        .iter()
        .zip(dataset.group_means())
        .map(|(&mi, &yb)| {
            let mf = mi as f64;
            (spec.phi1 * common + spec.phi2 * mf * yb) / (spec.phi1 + spec.phi2 * mf)
        })
        .collect();
    let mu = theta.iter().sum::<f64>() / theta.len() as f64;
    (theta, mu)
}

/// Starting value for `lambda_e`; zero is outside the support, so the
/// chain starts at a small positive number instead.
pub const LAMBDA_E_START: f64 = 1e-6;

/// Optimal starting state for the Gibbs sampler.
///
/// The `theta` block is the constant vector at the grand mean (so the
/// `v3` term vanishes), `lambda_theta` minimizes
/// `exp(c3 x) + delta7/(K delta1 x)` and `lambda_e` starts at
/// [`LAMBDA_E_START`].
pub fn optimal_start_gibbs(
    spec: &GibbsDriftSpec,
    dataset: &Dataset,
    hyper: &Hyperparameters,
) -> Result<ChainState, ModelError> {
    if hyper.a1 <= 1.5 {
        return Err(ModelError::InvalidHyperparameter { name: "a1 (must exceed 3/2)", value: hyper.a1 });
    }
    let q = gibbs_inv_term_weight(dataset, hyper);
    let f = |x: f64| (spec.c3 * x).exp() + q / x;
    let deriv = |x: f64| spec.c3 * (spec.c3 * x).exp() - q / (x * x);
    // Expand the bracket until the derivative changes sign.
    let mut hi = 1.0;
    while deriv(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    let (lambda_theta, _) = minimize_scalar(f, 1e-12, hi, 1e-12)?;
    let ybar = dataset.grand_mean();
    Ok(ChainState {
        theta: vec![ybar; dataset.k()],
        mu: ybar,
        lambda_theta,
        lambda_e: LAMBDA_E_START,
    })
}
