//! Executable Markov kernels for the two samplers, chain running, and
//! Monte Carlo estimation of one-step conditional expectations.
//!
//! The block sampler updates `lambda = (lambda_theta, lambda_e)` from its
//! gamma full conditionals given the previous `(theta, mu)`, then draws
//! `(theta, mu)` jointly from its exact multivariate normal conditional.
//! The joint draw is done hierarchically: `mu | lambda` first, then the
//! conditionally independent `theta_i | mu, lambda`. That factorization
//! is exact, needs no matrix decomposition, and leaves the closed-form
//! joint moments free to act as a test oracle.
//!
//! The single-site sampler performs the fixed scan
//! `mu -> theta_1..theta_K -> lambda_theta -> lambda_e`. Scan order is
//! deliberately not configurable; the drift and minorization machinery in
//! this crate is derived for exactly these kernels.

use crate::model::{v1, v2, ChainState, Dataset, Hyperparameters, ModelError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("gamma shape {0} is below 1; all shapes in this model are >= 1, so this indicates an invalid input")]
    GammaShapeBelowOne(f64),
    #[error("invalid gamma parameters: shape={shape}, rate={rate}")]
    InvalidGamma { shape: f64, rate: f64 },
    #[error("one-step Monte Carlo needs at least 100 replications, got {0}")]
    TooFewReplications(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("trace I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Seeded, reproducible random-number stream. Identical seeds produce
/// identical draw sequences.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent stream for worker `index`. Streams with
    /// distinct indices never share state with each other or with `self`.
    pub fn substream(&self, index: u64) -> Self {
        // SplitMix64 finalizer over (seed, index) for decorrelated seeds.
        let mut z = self.seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x1234_5678);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        Self::new(z ^ (z >> 31))
    }

    /// Draws from Gamma(shape, rate). Shapes below one are rejected: every
    /// full-conditional shape in this model is at least `min(K/2 + a1,
    /// M/2 + a2) >= 1` under the standing assumptions, so a smaller shape
    /// means the caller has gone wrong.
    pub fn gamma(&mut self, shape: f64, rate: f64) -> Result<f64, SamplerError> {
        if !(shape >= 1.0) {
            return Err(SamplerError::GammaShapeBelowOne(shape));
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(SamplerError::InvalidGamma { shape, rate });
        }
        let g = Gamma::new(shape, 1.0 / rate)
            .map_err(|_| SamplerError::InvalidGamma { shape, rate })?;
        Ok(g.sample(&mut self.rng))
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        Normal::new(mean, sd).expect("standard deviation is positive").sample(&mut self.rng)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }
}

/// Which Markov kernel to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Gibbs,
    Block,
}

impl Kernel {
    pub fn as_str(self) -> &'static str {
        match self {
            Kernel::Gibbs => "gibbs",
            Kernel::Block => "block",
        }
    }
}

/// Closed-form moments of the joint normal conditional of
/// `xi = (theta, mu)` given `lambda`.
#[derive(Debug, Clone)]
pub struct PosteriorNormalParams {
    /// Precision aggregate `t = sum_i m_i l_th l_e / (l_th + m_i l_e)`.
    pub t: f64,
    pub mean_mu: f64,
    /// `Var(mu | lambda) = 1 / (s0 + t)`.
    pub var_mu: f64,
    pub mean_theta: Vec<f64>,
    pub var_theta: Vec<f64>,
    /// Upper-triangular pairwise covariances `(i, j, Cov(theta_i, theta_j))`, `i < j`.
    pub cov_theta_pairs: Vec<(usize, usize, f64)>,
    pub cov_theta_mu: Vec<f64>,
}

pub(crate) fn xi_moments_from_parts(
    lambda_theta: f64,
    lambda_e: f64,
    counts: &[f64],
    means: &[f64],
    hyper: &Hyperparameters,
) -> PosteriorNormalParams {
    let lt = lambda_theta;
    let le = lambda_e;
    let t: f64 = counts.iter().map(|&mi| mi * lt * le / (lt + mi * le)).sum();
    let st = hyper.s0 + t;
    let mean_mu = (counts
        .iter()
        .zip(means)
        .map(|(&mi, &yb)| mi * lt * le * yb / (lt + mi * le))
        .sum::<f64>()
        + hyper.m0 * hyper.s0)
        / st;
    let k = counts.len();
    let mut mean_theta = Vec::with_capacity(k);
    let mut var_theta = Vec::with_capacity(k);
    let mut cov_theta_mu = Vec::with_capacity(k);
    for (&mi, &yb) in counts.iter().zip(means) {
        let denom = lt + mi * le;
        mean_theta.push(lt / denom * mean_mu + le * mi * yb / denom);
        var_theta.push(1.0 / denom * (1.0 + lt * lt / (denom * st)));
        cov_theta_mu.push(lt / (denom * st));
    }
    let mut cov_theta_pairs = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            let di = lt + counts[i] * le;
            let dj = lt + counts[j] * le;
            cov_theta_pairs.push((i, j, lt * lt / (di * dj * st)));
        }
    }
    PosteriorNormalParams {
        t,
        mean_mu,
        var_mu: 1.0 / st,
        mean_theta,
        var_theta,
        cov_theta_pairs,
        cov_theta_mu,
    }
}

/// Evaluates the joint-normal moments of `(theta, mu) | lambda`.
pub fn posterior_normal_params(
    lambda: (f64, f64),
    dataset: &Dataset,
    hyper: &Hyperparameters,
) -> Result<PosteriorNormalParams, SamplerError> {
    let (lt, le) = lambda;
    if !(lt > 0.0) {
        return Err(ModelError::NonpositivePrecision { name: "lambda_theta", value: lt }.into());
    }
    if !(le > 0.0) {
        return Err(ModelError::NonpositivePrecision { name: "lambda_e", value: le }.into());
    }
    let counts: Vec<f64> = dataset.counts().iter().map(|&m| m as f64).collect();
    Ok(xi_moments_from_parts(lt, le, &counts, dataset.group_means(), hyper))
}

/// One transition of the block sampler: draw `lambda` from its gamma full
/// conditionals given the previous `(theta, mu)`, then `(theta, mu)`
/// jointly given the new `lambda`.
pub fn block_gibbs_step(
    state: &ChainState,
    dataset: &Dataset,
    hyper: &Hyperparameters,
    rng: &mut RngStream,
) -> Result<ChainState, SamplerError> {
    state.validate(dataset)?;
    let k = dataset.k() as f64;
    let m_tot = dataset.total_count() as f64;

    let lambda_theta =
        rng.gamma(k / 2.0 + hyper.a1, v1(state) / 2.0 + hyper.b1)?;
    let lambda_e = rng.gamma(
        m_tot / 2.0 + hyper.a2,
        (v2(state, dataset) + dataset.sse()) / 2.0 + hyper.b2,
    )?;

    // xi | lambda: mu from its lambda-conditional marginal, then the
    // conditionally independent theta_i.
    let p = posterior_normal_params((lambda_theta, lambda_e), dataset, hyper)?;
    let mu = rng.normal(p.mean_mu, p.var_mu.sqrt());
    let theta = dataset
        .counts()
        .iter()
        .zip(dataset.group_means())
        .map(|(&mi, &yb)| {
            let mf = mi as f64;
            let prec = lambda_theta + mf * lambda_e;
            let mean = (lambda_theta * mu + mf * lambda_e * yb) / prec;
            rng.normal(mean, (1.0 / prec).sqrt())
        })
        .collect();

    Ok(ChainState { theta, mu, lambda_theta, lambda_e })
}

/// One transition of the fixed-scan single-site sampler:
/// `mu`, then each `theta_i`, then `lambda_theta`, then `lambda_e`.
pub fn gibbs_step(
    state: &ChainState,
    dataset: &Dataset,
    hyper: &Hyperparameters,
    rng: &mut RngStream,
) -> Result<ChainState, SamplerError> {
    state.validate(dataset)?;
    let k = dataset.k() as f64;
    let m_tot = dataset.total_count() as f64;
    let lt_old = state.lambda_theta;
    let le_old = state.lambda_e;

    let prec_mu = hyper.s0 + k * lt_old;
    let mean_mu = (hyper.s0 * hyper.m0 + k * lt_old * state.theta_mean()) / prec_mu;
    let mu = rng.normal(mean_mu, (1.0 / prec_mu).sqrt());

    let theta: Vec<f64> = dataset
        .counts()
        .iter()
        .zip(dataset.group_means())
        .map(|(&mi, &yb)| {
            let mf = mi as f64;
            let prec = lt_old + mf * le_old;
            let mean = (lt_old * mu + mf * le_old * yb) / prec;
            rng.normal(mean, (1.0 / prec).sqrt())
        })
        .collect();

    let next = ChainState { theta, mu, lambda_theta: lt_old, lambda_e: le_old };
    let lambda_theta = rng.gamma(k / 2.0 + hyper.a1, v1(&next) / 2.0 + hyper.b1)?;
    let lambda_e = rng.gamma(
        m_tot / 2.0 + hyper.a2,
        (v2(&next, dataset) + dataset.sse()) / 2.0 + hyper.b2,
    )?;

    Ok(ChainState { lambda_theta, lambda_e, ..next })
}

pub fn step(
    kernel: Kernel,
    state: &ChainState,
    dataset: &Dataset,
    hyper: &Hyperparameters,
    rng: &mut RngStream,
) -> Result<ChainState, SamplerError> {
    match kernel {
        Kernel::Block => block_gibbs_step(state, dataset, hyper, rng),
        Kernel::Gibbs => gibbs_step(state, dataset, hyper, rng),
    }
}

/// A recorded chain: the start plus one state per iteration.
#[derive(Debug, Clone)]
pub struct Trace {
    pub kernel: Kernel,
    pub seed: u64,
    pub states: Vec<ChainState>,
}

impl Trace {
    /// CSV export with header `iter,mu,lambda_theta,lambda_e,theta_1..theta_K`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), SamplerError> {
        let k = self.states.first().map_or(0, |s| s.theta.len());
        write!(w, "iter,mu,lambda_theta,lambda_e")?;
        for i in 1..=k {
            write!(w, ",theta_{i}")?;
        }
        writeln!(w)?;
        for (i, s) in self.states.iter().enumerate() {
            write!(w, "{i},{:.16e},{:.16e},{:.16e}", s.mu, s.lambda_theta, s.lambda_e)?;
            for t in &s.theta {
                write!(w, ",{t:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Runs `n` kernel applications from `start`, recording every state
/// (including the start, so the trace has length `n + 1`).
pub fn run_chain(
    kernel: Kernel,
    start: &ChainState,
    dataset: &Dataset,
    hyper: &Hyperparameters,
    n: usize,
    seed: u64,
) -> Result<Trace, SamplerError> {
    let mut rng = RngStream::new(seed);
    let mut states = Vec::with_capacity(n + 1);
    states.push(start.clone());
    let mut cur = start.clone();
    for _ in 0..n {
        cur = step(kernel, &cur, dataset, hyper, &mut rng)?;
        states.push(cur.clone());
    }
    Ok(Trace { kernel, seed, states })
}

/// Streaming variant of [`run_chain`]: applies `visit` to every
/// post-start state without materializing the trace.
pub fn fold_chain<F: FnMut(usize, &ChainState)>(
    kernel: Kernel,
    start: &ChainState,
    dataset: &Dataset,
    hyper: &Hyperparameters,
    n: usize,
    seed: u64,
    mut visit: F,
) -> Result<ChainState, SamplerError> {
    let mut rng = RngStream::new(seed);
    let mut cur = start.clone();
    for i in 0..n {
        cur = step(kernel, &cur, dataset, hyper, &mut rng)?;
        visit(i, &cur);
    }
    Ok(cur)
}

/// Sample mean and standard error of `drift(X_1)` over `n_rep`
/// independent one-step transitions from `x`.
pub fn mc_one_step_expectation<F: Fn(&ChainState) -> f64>(
    drift: F,
    x: &ChainState,
    kernel: Kernel,
    dataset: &Dataset,
    hyper: &Hyperparameters,
    n_rep: usize,
    seed: u64,
) -> Result<(f64, f64), SamplerError> {
    if n_rep < 100 {
        return Err(SamplerError::TooFewReplications(n_rep));
    }
    let mut rng = RngStream::new(seed);
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n_rep {
        let next = step(kernel, x, dataset, hyper, &mut rng)?;
        let v = drift(&next);
        sum += v;
        sumsq += v * v;
    }
    let n = n_rep as f64;
    let mean = sum / n;
    let var = (sumsq - n * mean * mean).max(0.0) / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
