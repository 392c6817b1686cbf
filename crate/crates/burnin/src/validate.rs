//! Numerical validation suites.
//!
//! Every certificate this crate emits is backed by an executable check:
//! drift inequalities are verified by Monte Carlo against the running
//! kernels, minorization envelopes by pointwise density comparison,
//! infimum lemmas by grid search, the small-set containment by rejection
//! sampling, the closed-form minorization mass by quadrature, and the
//! joint-update moments by simulation. The suites are pure functions of
//! their inputs plus a seed, so the command-line runner and the
//! acceptance tests share them verbatim.

use crate::certificates::{
    convert_drift, ratio_bound_holds, BlockDriftCertificate, GibbsDriftCertificate,
    MinorizationCertificate, MinorizationSplit,
};
use crate::model::{
    eval_block_drift, eval_gibbs_drift, v1, v2, BlockDriftSpec, ChainState, Dataset,
    GibbsDriftSpec, Hyperparameters,
};
use crate::numerics::{
    integrate_left_tail, integrate_right_tail, log_gamma_density, log_normal_density,
};
use crate::report::Report;
use crate::samplers::{mc_one_step_expectation, Kernel, RngStream};

/// One named check with its outcome and a human-readable detail line.
#[derive(Debug, Clone)]
pub struct Check {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of one validation suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn to_report(&self) -> Report {
        let mut r = Report::new();
        r.push("suite", self.name);
        r.push("passed", self.passed());
        r.push("checks", self.checks.len());
        let failures: Vec<crate::report::Value> = self
            .failures()
            .iter()
            .map(|c| {
                crate::report::Value::Map(
                    Report::new().with("label", c.label.as_str()).with("detail", c.detail.as_str()),
                )
            })
            .collect();
        r.push("failures", crate::report::Value::List(failures));
        r
    }
}

fn check(checks: &mut Vec<Check>, label: impl Into<String>, passed: bool, detail: String) {
    checks.push(Check { label: label.into(), passed, detail });
}

/// Random chain states spread across several orders of magnitude of the
/// block drift function, inside and outside the small set.
fn random_block_states(dataset: &Dataset, n: usize, rng: &mut RngStream) -> Vec<ChainState> {
    (0..n)
        .map(|_| {
            let scale = 10.0_f64.powf(rng.uniform(-1.5, 1.0));
            let theta: Vec<f64> = dataset
                .group_means()
                .iter()
                .map(|&yb| yb + scale * rng.normal(0.0, 1.0))
                .collect();
            let tbar = theta.iter().sum::<f64>() / theta.len() as f64;
            ChainState {
                mu: tbar + scale * rng.normal(0.0, 1.0),
                theta,
                lambda_theta: 10.0_f64.powf(rng.uniform(-1.0, 1.0)),
                lambda_e: 10.0_f64.powf(rng.uniform(-1.0, 1.0)),
            }
        })
        .collect()
}

/// Monte Carlo verification of the block drift inequality: at each state
/// the one-step mean of the drift must sit below both the coupled
/// `gamma V + b` form and the sharper componentwise form the certificate
/// derivation actually proves.
pub fn drift_mc_block(
    dataset: &Dataset,
    hyper: &Hyperparameters,
    cert: &BlockDriftCertificate,
    n_states: usize,
    n_rep: usize,
    seed: u64,
) -> SuiteReport {
    let mut checks = Vec::new();
    let spec = BlockDriftSpec::new(cert.phi1, cert.phi2, cert.gamma).expect("certificate is valid");
    let mut rng = RngStream::new(seed);
    let states = random_block_states(dataset, n_states, &mut rng);
    for (i, x) in states.iter().enumerate() {
        let vx = eval_block_drift(x, &spec, dataset).expect("state is valid");
        let (est, se) = mc_one_step_expectation(
            |next| cert.phi1 * v1(next) + cert.phi2 * v2(next, dataset),
            x,
            Kernel::Block,
            dataset,
            hyper,
            n_rep,
            rng.substream(i as u64).seed(),
        )
        .expect("one-step MC is well-posed");
        let coupled = cert.gamma * vx + cert.b;
        let sharp = cert.phi1 * cert.delta1 * v1(x)
            + (cert.phi1 * cert.delta4 / cert.phi2 + cert.delta3) * cert.phi2 * v2(x, dataset)
            + cert.b;
        check(
            &mut checks,
            format!("state {i}: E[V(X1)] <= gamma V(x) + b + 4 se"),
            est <= coupled + 4.0 * se,
            format!("est={est:.6e} rhs={coupled:.6e} se={se:.3e} V(x)={vx:.6e}"),
        );
        check(
            &mut checks,
            format!("state {i}: E[V(X1)] <= componentwise rhs + 4 se"),
            est <= sharp + 4.0 * se,
            format!("est={est:.6e} rhs={sharp:.6e} se={se:.3e}"),
        );
    }
    SuiteReport { name: "drift-mc-block", checks }
}

/// Random states spanning the single-site drift function's range.
fn random_gibbs_states(
    dataset: &Dataset,
    cert: &GibbsDriftCertificate,
    n: usize,
    rng: &mut RngStream,
) -> Vec<ChainState> {
    // Keep exp(c3 lambda) in a sane range: lambda up to ~ 3/c3 covers
    // drift values across several decades.
    let lam_hi = 3.0 / cert.c3;
    (0..n)
        .map(|_| {
            let dev = rng.normal(0.0, 1.5);
            let spread = rng.uniform(0.0, 1.0);
            let theta: Vec<f64> = dataset
                .group_means()
                .iter()
                .map(|&yb| yb + dev + spread * rng.normal(0.0, 1.0))
                .collect();
            ChainState {
                mu: dataset.grand_mean() + rng.normal(0.0, 1.0),
                theta,
                lambda_theta: 10.0_f64.powf(rng.uniform(-2.0, lam_hi.log10())),
                lambda_e: 10.0_f64.powf(rng.uniform(-4.0, lam_hi.log10())),
            }
        })
        .collect()
}

/// Monte Carlo verification of the single-site drift inequality, in both
/// the coupled and the sharper componentwise forms.
pub fn drift_mc_gibbs(
    dataset: &Dataset,
    hyper: &Hyperparameters,
    cert: &GibbsDriftCertificate,
    n_states: usize,
    n_rep: usize,
    seed: u64,
) -> SuiteReport {
    let mut checks = Vec::new();
    let spec = GibbsDriftSpec::new(cert.c3, cert.gamma, 1e-5).expect("certificate is valid");
    let mut rng = RngStream::new(seed);
    let states = random_gibbs_states(dataset, cert, n_states, &mut rng);
    let k = dataset.k() as f64;
    let m_min = dataset.min_count() as f64;
    let m_max = dataset.max_count() as f64;
    let rho1_floor = (k + cert.delta6 / cert.delta7) * cert.delta1;
    for (i, x) in states.iter().enumerate() {
        let vx = eval_gibbs_drift(x, &spec, hyper, dataset).expect("state is valid");
        let (est, se) = mc_one_step_expectation(
            |next| eval_gibbs_drift(next, &spec, hyper, dataset).expect("state is valid"),
            x,
            Kernel::Gibbs,
            dataset,
            hyper,
            n_rep,
            rng.substream(i as u64).seed(),
        )
        .expect("one-step MC is well-posed");
        let coupled = cert.gamma * vx + cert.b;
        let lt = x.lambda_theta;
        let le = x.lambda_e;
        let wu = m_max * le / (lt + m_max * le);
        let wl = lt / (lt + m_min * le);
        let v3x = crate::model::v3(x, dataset, hyper);
        let sharp = rho1_floor * cert.delta7 / (k * cert.delta1 * lt)
            + (cert.delta7 * wu * wu + cert.delta6 * wl * wl) * v3x
            + cert.b;
        check(
            &mut checks,
            format!("state {i}: E[V(X1)] <= gamma V(x) + b + 4 se"),
            est <= coupled + 4.0 * se,
            format!("est={est:.6e} rhs={coupled:.6e} se={se:.3e} V(x)={vx:.6e}"),
        );
        check(
            &mut checks,
            format!("state {i}: E[V(X1)] <= componentwise rhs + 4 se"),
            est <= sharp + 4.0 * se,
            format!("est={est:.6e} rhs={sharp:.6e} se={se:.3e}"),
        );
    }
    SuiteReport { name: "drift-mc-gibbs", checks }
}

/// Draws states from the block small set `{v1 < d/phi1} ∩ {v2 < d/phi2}`.
fn block_small_set_states(
    dataset: &Dataset,
    phi1: f64,
    phi2: f64,
    d: f64,
    n: usize,
    rng: &mut RngStream,
) -> Vec<ChainState> {
    let mut out = Vec::with_capacity(n);
    let scale0 = (d / (phi1 + phi2 * dataset.total_count() as f64)).sqrt();
    while out.len() < n {
        let scale = scale0 * rng.uniform(0.01, 1.0);
        let theta: Vec<f64> = dataset
            .group_means()
            .iter()
            .map(|&yb| yb + scale * rng.normal(0.0, 1.0))
            .collect();
        let tbar = theta.iter().sum::<f64>() / theta.len() as f64;
        let state = ChainState {
            mu: tbar + scale * rng.normal(0.0, 1.0),
            theta,
            lambda_theta: 1.0,
            lambda_e: 1.0,
        };
        if v1(&state) < d / phi1 && v2(&state, dataset) < d / phi2 {
            out.push(state);
        }
    }
    out
}

/// Pointwise envelope domination for the block minorization: for states
/// in the small set, the gamma full-conditional densities dominate the
/// piecewise lower envelopes everywhere on a log-spaced grid.
pub fn minorization_domination_block(
    dataset: &Dataset,
    hyper: &Hyperparameters,
    cert: &MinorizationCertificate,
    phi1: f64,
    phi2: f64,
    n_states: usize,
    grid_points: usize,
    seed: u64,
) -> SuiteReport {
    let mut checks = Vec::new();
    let (lts, les) = match cert.split {
        MinorizationSplit::Block { lambda_theta_star, lambda_e_star, .. } => {
            (lambda_theta_star, lambda_e_star)
        }
        _ => {
            return SuiteReport {
                name: "minorization-block",
                checks: vec![Check {
                    label: "certificate kind".into(),
                    passed: false,
                    detail: "expected a block minorization certificate".into(),
                }],
            }
        }
    };
    let d = cert.d;
    let k = dataset.k() as f64;
    let m_tot = dataset.total_count() as f64;
    let alpha1 = k / 2.0 + hyper.a1;
    let alpha2 = m_tot / 2.0 + hyper.a2;
    let mut rng = RngStream::new(seed);
    let states = block_small_set_states(dataset, phi1, phi2, d, n_states, &mut rng);
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| 10.0_f64.powf(-4.0 + 7.0 * i as f64 / (grid_points - 1) as f64))
        .collect();
    let tol = 1e-9;
    for (si, state) in states.iter().enumerate() {
        let rate1 = v1(state) / 2.0 + hyper.b1;
        let rate2 = (v2(state, dataset) + dataset.sse()) / 2.0 + hyper.b2;
        let mut worst1 = f64::INFINITY;
        let mut worst2 = f64::INFINITY;
        for &lam in &grid {
            let f1 = log_gamma_density(alpha1, rate1, lam).expect("valid density");
            let h1 = if lam < lts {
                log_gamma_density(alpha1, hyper.b1, lam).expect("valid density")
            } else {
                log_gamma_density(alpha1, d / (2.0 * phi1) + hyper.b1, lam).expect("valid density")
            };
            worst1 = worst1.min(f1 - h1);
            let f2 = log_gamma_density(alpha2, rate2, lam).expect("valid density");
            let h2 = if lam < les {
                log_gamma_density(alpha2, dataset.sse() / 2.0 + hyper.b2, lam)
                    .expect("valid density")
            } else {
                log_gamma_density(
                    alpha2,
                    (phi2 * dataset.sse() + d) / (2.0 * phi2) + hyper.b2,
                    lam,
                )
                .expect("valid density")
            };
            worst2 = worst2.min(f2 - h2);
        }
        check(
            &mut checks,
            format!("state {si}: f(lambda_theta | xi') >= h1 on the grid"),
            worst1 >= -tol,
            format!("min log-ratio {worst1:.3e} over {grid_points} points"),
        );
        check(
            &mut checks,
            format!("state {si}: f(lambda_e | xi') >= h2 on the grid"),
            worst2 >= -tol,
            format!("min log-ratio {worst2:.3e} over {grid_points} points"),
        );
    }
    SuiteReport { name: "minorization-block", checks }
}

/// Draws states from the box superset used by the single-site
/// minorization.
fn gibbs_box_states(
    dataset: &Dataset,
    hyper: &Hyperparameters,
    c3: f64,
    d: f64,
    c4: f64,
    c_l: f64,
    c_u: f64,
    n: usize,
    rng: &mut RngStream,
) -> Vec<ChainState> {
    let k = dataset.k() as f64;
    let lam_hi = d.ln() / c3;
    (0..n)
        .map(|_| {
            let lt = (c4.ln() + rng.uniform(0.0, 1.0) * (lam_hi.ln() - c4.ln())).exp();
            let le = (1e-6_f64.ln() + rng.uniform(0.0, 1.0) * (lam_hi.ln() - 1e-6_f64.ln())).exp();
            // The third condition constrains the mu-conditional center.
            let lo = (c_l * (hyper.s0 + k * lt) - hyper.s0 * hyper.m0) / (k * lt);
            let hi = (c_u * (hyper.s0 + k * lt) - hyper.s0 * hyper.m0) / (k * lt);
            let tbar = rng.uniform(lo, hi);
            let mut theta: Vec<f64> = (0..dataset.k()).map(|_| rng.normal(0.0, 0.5)).collect();
            let shift = tbar - theta.iter().sum::<f64>() / k;
            for t in &mut theta {
                *t += shift;
            }
            ChainState { theta, mu: dataset.grand_mean(), lambda_theta: lt, lambda_e: le }
        })
        .collect()
}

/// Pointwise envelope domination for the single-site minorization: the
/// `mu` full conditional dominates the scaled two-sided normal envelope,
/// and the `theta` full conditional dominates the product envelope.
#[allow(clippy::too_many_arguments)]
pub fn minorization_domination_gibbs(
    dataset: &Dataset,
    hyper: &Hyperparameters,
    cert: &MinorizationCertificate,
    c3: f64,
    n_states: usize,
    grid_points: usize,
    theta_points: usize,
    seed: u64,
) -> SuiteReport {
    let mut checks = Vec::new();
    let (c4, c_l, c_u) = match cert.split {
        MinorizationSplit::Gibbs { c4, c_l, c_u, .. } => (c4, c_l, c_u),
        _ => {
            return SuiteReport {
                name: "minorization-gibbs",
                checks: vec![Check {
                    label: "certificate kind".into(),
                    passed: false,
                    detail: "expected a single-site minorization certificate".into(),
                }],
            }
        }
    };
    let d = cert.d;
    let ld = d.ln();
    let k = dataset.k() as f64;
    let yb = dataset.grand_mean();
    let big_a = hyper.s0 + k * ld / c3;
    let scale = 0.5 * ((hyper.s0 + k * c4) / big_a).ln();
    let mut rng = RngStream::new(seed);
    let states = gibbs_box_states(dataset, hyper, c3, d, c4, c_l, c_u, n_states, &mut rng);
    let tol = 1e-9;
    // g1's Gaussian prefactor and quadratic weight.
    let log_g1_pref = 0.5 * k * (c4 / (2.0 * std::f64::consts::PI)).ln();
    let w_g1 = ld / (2.0 * c3);

    for (si, state) in states.iter().enumerate() {
        let lt = state.lambda_theta;
        let le = state.lambda_e;
        // mu-conditional domination over a grid spanning both envelope lobes.
        let prec = hyper.s0 + k * lt;
        let center = (hyper.s0 * hyper.m0 + k * lt * state.theta_mean()) / prec;
        let sd_env = (1.0 / big_a).sqrt();
        let lo = c_l - 8.0 * sd_env;
        let hi = c_u + 8.0 * sd_env;
        let mut worst = f64::INFINITY;
        for gi in 0..grid_points {
            let mu = lo + (hi - lo) * gi as f64 / (grid_points - 1) as f64;
            let f = log_normal_density(center, 1.0 / prec, mu).expect("valid density");
            let g2 = if mu <= yb {
                log_normal_density(c_u, 1.0 / big_a, mu).expect("valid density")
            } else {
                log_normal_density(c_l, 1.0 / big_a, mu).expect("valid density")
            };
            worst = worst.min(f - (g2 + scale));
        }
        check(
            &mut checks,
            format!("state {si}: f(mu | theta', lambda') >= scaled g2 on the grid"),
            worst >= -tol,
            format!("min log-ratio {worst:.3e} over {grid_points} points"),
        );

        // theta-conditional domination at random (mu, theta) points.
        let mut worst_t = f64::INFINITY;
        for _ in 0..theta_points {
            let mu = yb + rng.normal(0.0, 2.0);
            let theta: Vec<f64> =
                dataset.group_means().iter().map(|&y| y + rng.normal(0.0, 2.0)).collect();
            let mut log_f = 0.0;
            let mut quad = 0.0;
            for ((&t, &mi), &ybi) in
                theta.iter().zip(dataset.counts()).zip(dataset.group_means())
            {
                let mf = mi as f64;
                let pr = lt + mf * le;
                let mean = (lt * mu + mf * le * ybi) / pr;
                log_f += log_normal_density(mean, 1.0 / pr, t).expect("valid density");
                quad += (t - mu) * (t - mu) + mf * (t - ybi) * (t - ybi);
            }
            let log_g1 = log_g1_pref - w_g1 * quad;
            worst_t = worst_t.min(log_f - log_g1);
        }
        check(
            &mut checks,
            format!("state {si}: f(theta | mu, lambda') >= g1 at random points"),
            worst_t >= -tol,
            format!("min log-ratio {worst_t:.3e} over {theta_points} points"),
        );
    }
    SuiteReport { name: "minorization-gibbs", checks }
}

/// Grid verification of the piecewise gamma-density infimum: over a
/// `beta` grid spanning `[0, c]`, the minimum density matches the branch
/// selected by the closed-form crossing point.
pub fn gamma_infimum_grid(n_cases: usize, beta_points: usize, x_points: usize, seed: u64) -> SuiteReport {
    let mut checks = Vec::new();
    let mut rng = RngStream::new(seed);
    for case in 0..n_cases {
        let alpha = rng.uniform(1.05, 20.0);
        let b = rng.uniform(0.1, 5.0);
        let c = rng.uniform(0.1, 10.0);
        let x_star = crate::certificates::gamma_inf_threshold(alpha, b, c)
            .expect("alpha > 1 by construction");
        let x_scale = alpha / b;
        let mut worst = f64::INFINITY;
        for xi in 0..x_points {
            let x = 0.02 * x_scale + (4.0 * x_scale) * xi as f64 / (x_points - 1) as f64;
            let mut grid_min = f64::INFINITY;
            for bi in 0..beta_points {
                let beta = c * bi as f64 / (beta_points - 1) as f64;
                let ld = log_gamma_density(alpha, b + beta / 2.0, x).expect("valid density");
                grid_min = grid_min.min(ld);
            }
            let piecewise = if x < x_star {
                log_gamma_density(alpha, b, x).expect("valid density")
            } else {
                log_gamma_density(alpha, b + c / 2.0, x).expect("valid density")
            };
            // Infimum property and endpoint attainment in one band.
            worst = worst.min(-(grid_min - piecewise).abs());
        }
        check(
            &mut checks,
            format!("case {case}: grid infimum equals the piecewise form"),
            worst >= -1e-10,
            format!("max |log deviation| = {:.3e} (alpha={alpha:.3}, b={b:.3}, c={c:.3})", -worst),
        );
    }
    SuiteReport { name: "gamma-infimum", checks }
}

/// Random verification of the two-fraction square bound under its
/// hypotheses `5b > a >= b > 0`, `x, y > 0`.
pub fn ratio_bound_random(n: usize, seed: u64) -> SuiteReport {
    let mut rng = RngStream::new(seed);
    let mut violations = 0usize;
    for _ in 0..n {
        let b = 10.0_f64.powf(rng.uniform(-3.0, 3.0));
        let a = b * rng.uniform(1.0, 5.0 - 1e-9);
        let x = 10.0_f64.powf(rng.uniform(-3.0, 3.0));
        let y = 10.0_f64.powf(rng.uniform(-3.0, 3.0));
        if !ratio_bound_holds(a, b, x, y) {
            violations += 1;
        }
    }
    SuiteReport {
        name: "ratio-bound",
        checks: vec![Check {
            label: format!("{n} random admissible tuples satisfy the bound"),
            passed: violations == 0,
            detail: format!("{violations} violations"),
        }],
    }
}

/// Scalar-domination check of the drift-form conversion: for a dense grid
/// of drift values, `gamma(1+v) + b + (1-gamma) <= rho(1+v) + L [1+v <= d_c]`.
pub fn drift_conversion_domination(gamma: f64, b: f64, a: f64, grid_points: usize) -> SuiteReport {
    let mut checks = Vec::new();
    match convert_drift(gamma, b, a) {
        Ok(conv) => {
            let hi = 5.0 * conv.d_c;
            let mut worst = f64::NEG_INFINITY;
            for i in 0..grid_points {
                let v = hi * i as f64 / (grid_points - 1) as f64;
                let w = 1.0 + v;
                let lhs = gamma * w + b + (1.0 - gamma);
                let rhs = conv.rho * w + if w <= conv.d_c { conv.l } else { 0.0 };
                worst = worst.max(lhs - rhs);
            }
            check(
                &mut checks,
                "converted drift dominates the shifted one on a dense grid",
                worst <= 1e-9,
                format!("max violation {worst:.3e} over {grid_points} points (d_c={:.6})", conv.d_c),
            );
        }
        Err(e) => check(&mut checks, "conversion is well-posed", false, e.to_string()),
    }
    SuiteReport { name: "drift-conversion", checks }
}

/// Containment of the drift sublevel set in the box set used by the
/// single-site minorization: every sampled state with `V3 <= d` must
/// satisfy all three box conditions.
pub fn small_set_containment(
    dataset: &Dataset,
    hyper: &Hyperparameters,
    cert: &GibbsDriftCertificate,
    d: f64,
    n_accepted: usize,
    seed: u64,
) -> SuiteReport {
    let spec = GibbsDriftSpec::new(cert.c3, cert.gamma, 1e-5).expect("certificate is valid");
    let minor = gibbs_minorization_constants(dataset, hyper, d);
    let (c4, c_l, c_u) = minor;
    let k = dataset.k() as f64;
    let ld = d.ln();
    let lam_hi = ld / cert.c3;
    let mut rng = RngStream::new(seed);
    let mut accepted = 0usize;
    let mut violations = 0usize;
    let mut attempts = 0usize;
    let max_attempts = 200 * n_accepted;
    while accepted < n_accepted && attempts < max_attempts {
        attempts += 1;
        // Generous proposal box strictly larger than the target set.
        let lt = (c4 / 3.0) * ((3.0 * lam_hi / (c4 / 3.0)).powf(rng.uniform(0.0, 1.0)));
        let le = 1e-8 * ((2.0 * lam_hi / 1e-8).powf(rng.uniform(0.0, 1.0)));
        let dev_cap = (d * (hyper.s0 + k * lt) / (k * lt)).sqrt();
        let dev = rng.uniform(-1.5 * dev_cap, 1.5 * dev_cap);
        let mut theta: Vec<f64> = (0..dataset.k()).map(|_| rng.normal(0.0, 0.4)).collect();
        let shift = dataset.grand_mean() + dev - theta.iter().sum::<f64>() / k;
        for t in &mut theta {
            *t += shift;
        }
        let state = ChainState { theta, mu: dataset.grand_mean(), lambda_theta: lt, lambda_e: le };
        let v = eval_gibbs_drift(&state, &spec, hyper, dataset).expect("state is valid");
        if v > d {
            continue;
        }
        accepted += 1;
        let center = (hyper.s0 * hyper.m0 + k * lt * state.theta_mean()) / (hyper.s0 + k * lt);
        let inside = (c4..=lam_hi).contains(&lt)
            && le > 0.0
            && le <= lam_hi
            && center >= c_l
            && center <= c_u;
        if !inside {
            violations += 1;
        }
    }
    SuiteReport {
        name: "small-set-containment",
        checks: vec![Check {
            label: format!("{n_accepted} sublevel states lie in the box set"),
            passed: violations == 0 && accepted == n_accepted,
            detail: format!(
                "{accepted} accepted in {attempts} attempts, {violations} violations"
            ),
        }],
    }
}

fn gibbs_minorization_constants(
    dataset: &Dataset,
    hyper: &Hyperparameters,
    d: f64,
) -> (f64, f64, f64) {
    let k = dataset.k() as f64;
    let delta1 = 1.0 / (2.0 * hyper.a1 + k - 2.0);
    let delta7 = 1.0 / (2.0 * (hyper.a1 - 1.0));
    let c4 = delta7 / (k * delta1 * d);
    let yb = dataset.grand_mean();
    let half = ((hyper.m0 - yb) * (hyper.m0 - yb) + d).sqrt();
    (c4, yb - half, yb + half)
}

/// Quadrature cross-check of the closed-form single-site minorization
/// mass: reduce the product envelope to a one-dimensional integral over
/// `mu`, integrate the two half-lines numerically in shifted log space,
/// and compare.
pub fn minorization_closed_form(
    dataset: &Dataset,
    hyper: &Hyperparameters,
    cert: &MinorizationCertificate,
    c3: f64,
) -> SuiteReport {
    let mut checks = Vec::new();
    let (c4, c_l, c_u) = match cert.split {
        MinorizationSplit::Gibbs { c4, c_l, c_u, .. } => (c4, c_l, c_u),
        _ => {
            return SuiteReport {
                name: "minorization-closed-form",
                checks: vec![Check {
                    label: "certificate kind".into(),
                    passed: false,
                    detail: "expected a single-site minorization certificate".into(),
                }],
            }
        }
    };
    let d = cert.d;
    let ld = d.ln();
    let k = dataset.k() as f64;
    let yb = dataset.grand_mean();
    let big_a = hyper.s0 + k * ld / c3;

    // Reduced integrand: the theta-marginalized envelope times the
    // two-sided normal factor, all in log space.
    let log_pref: f64 = 0.5 * k * (c4 * c3 / ld).ln()
        - 0.5
            * dataset
                .counts()
                .iter()
                .map(|&mi| (1.0 + mi as f64).ln())
                .sum::<f64>();
    let log_g38 = |mu: f64| -> f64 {
        let mut s = log_pref;
        for (&mi, &ybi) in dataset.counts().iter().zip(dataset.group_means()) {
            let mf = mi as f64;
            s -= mf * ld / (2.0 * c3 * (1.0 + mf)) * (mu - ybi) * (mu - ybi);
        }
        s
    };
    let log_left = |mu: f64| {
        log_g38(mu) + log_normal_density(c_u, 1.0 / big_a, mu).expect("valid density")
    };
    let log_right = |mu: f64| {
        log_g38(mu) + log_normal_density(c_l, 1.0 / big_a, mu).expect("valid density")
    };

    // Shift by the half-line maximum so the quadrature sees O(1) values.
    let shift_of = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64| -> f64 {
        let mut best = f64::NEG_INFINITY;
        for i in 0..=400 {
            let mu = lo + (hi - lo) * i as f64 / 400.0;
            best = best.max(f(mu));
        }
        best
    };
    let span = 3.0 * (c_u - c_l);
    let s_left = shift_of(&log_left, yb - span, yb);
    let s_right = shift_of(&log_right, yb, yb + span);
    let i_left = integrate_left_tail(|mu| (log_left(mu) - s_left).exp(), yb, 1e-12);
    let i_right = integrate_right_tail(|mu| (log_right(mu) - s_right).exp(), yb, 1e-12);
    match (i_left, i_right) {
        (Ok(il), Ok(ir)) => {
            let leading = 0.5 * ((hyper.s0 + k * c4) / big_a).ln();
            let log_quad = leading
                + crate::numerics::log_sum_exp(s_left + il.ln(), s_right + ir.ln());
            let rel = ((cert.log_epsilon - log_quad).exp() - 1.0).abs();
            check(
                &mut checks,
                "closed-form mass equals the quadrature oracle",
                rel < 1e-6,
                format!(
                    "closed log={:.12e} quadrature log={:.12e} rel diff={:.3e}",
                    cert.log_epsilon, log_quad, rel
                ),
            );
        }
        (l, r) => check(
            &mut checks,
            "quadrature oracle converged",
            false,
            format!("left: {l:?}, right: {r:?}"),
        ),
    }
    SuiteReport { name: "minorization-closed-form", checks }
}

/// Simulation check of the joint-update moment formulas at a fixed
/// `lambda`: empirical means, variances, and both covariance families
/// from hierarchical draws must match the closed forms within
/// `4` standard errors.
pub fn joint_update_moments(
    dataset: &Dataset,
    hyper: &Hyperparameters,
    lambda: (f64, f64),
    n_draws: usize,
    seed: u64,
) -> SuiteReport {
    let mut checks = Vec::new();
    let p = crate::samplers::posterior_normal_params(lambda, dataset, hyper)
        .expect("lambda is positive");
    let k = dataset.k();
    let (lt, le) = lambda;
    let mut rng = RngStream::new(seed);

    let mut sum = vec![0.0_f64; k + 1];
    let mut sum_sq = vec![0.0_f64; k + 1];
    let mut sum_cross_mu = vec![0.0_f64; k];
    let mut sum_cross = vec![0.0_f64; k * k];
    let mut draw = vec![0.0_f64; k + 1];
    for _ in 0..n_draws {
        let mu = rng.normal(p.mean_mu, p.var_mu.sqrt());
        draw[k] = mu;
        for i in 0..k {
            let mf = dataset.counts()[i] as f64;
            let pr = lt + mf * le;
            let mean = (lt * mu + mf * le * dataset.group_means()[i]) / pr;
            draw[i] = rng.normal(mean, (1.0 / pr).sqrt());
        }
        for i in 0..=k {
            sum[i] += draw[i];
            sum_sq[i] += draw[i] * draw[i];
        }
        for i in 0..k {
            sum_cross_mu[i] += draw[i] * mu;
            for j in (i + 1)..k {
                sum_cross[i * k + j] += draw[i] * draw[j];
            }
        }
    }
    let n = n_draws as f64;
    let mean = |i: usize| sum[i] / n;
    let var = |i: usize| (sum_sq[i] - n * mean(i) * mean(i)) / (n - 1.0);

    let mut assert_close = |label: String, got: f64, want: f64, se: f64| {
        check(
            &mut checks,
            label,
            (got - want).abs() <= 4.0 * se,
            format!("got={got:.8e} want={want:.8e} se={se:.3e}"),
        );
    };

    // Means: SE = sd / sqrt(n).
    assert_close("E[mu | lambda]".into(), mean(k), p.mean_mu, (p.var_mu / n).sqrt());
    for i in 0..k {
        assert_close(
            format!("E[theta_{} | lambda]", i + 1),
            mean(i),
            p.mean_theta[i],
            (p.var_theta[i] / n).sqrt(),
        );
    }
    // Variances: SE = var * sqrt(2/(n-1)) for Gaussian draws.
    assert_close(
        "Var[mu | lambda]".into(),
        var(k),
        p.var_mu,
        p.var_mu * (2.0 / (n - 1.0)).sqrt(),
    );
    for i in 0..k {
        assert_close(
            format!("Var[theta_{} | lambda]", i + 1),
            var(i),
            p.var_theta[i],
            p.var_theta[i] * (2.0 / (n - 1.0)).sqrt(),
        );
    }
    // Covariances: SE = sqrt((var_i var_j + cov^2)/(n-1)).
    for i in 0..k {
        let got = (sum_cross_mu[i] - sum[i] * sum[k] / n) / (n - 1.0);
        let want = p.cov_theta_mu[i];
        let se = ((p.var_theta[i] * p.var_mu + want * want) / (n - 1.0)).sqrt();
        assert_close(format!("Cov[theta_{}, mu | lambda]", i + 1), got, want, se);
    }
    for &(i, j, want) in &p.cov_theta_pairs {
        let got = (sum_cross[i * k + j] - sum[i] * sum[j] / n) / (n - 1.0);
        let se = ((p.var_theta[i] * p.var_theta[j] + want * want) / (n - 1.0)).sqrt();
        assert_close(format!("Cov[theta_{}, theta_{} | lambda]", i + 1, j + 1), got, want, se);
    }
    SuiteReport { name: "joint-update-moments", checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::{
        block_minorization, derive_block_drift_balanced, derive_gibbs_drift, gibbs_minorization,
    };

    fn dataset_k5() -> Dataset {
        Dataset::from_summaries(
            vec![10; 5],
            vec![-0.80247, -1.0014, -0.69090, -1.1413, -1.0125],
            32.990,
        )
        .unwrap()
    }

    fn dataset_k3() -> Dataset {
        Dataset::from_summaries(vec![4, 4, 4], vec![-0.54816, 0.92516, -0.19924], 20.285).unwrap()
    }

    #[test]
    fn drift_mc_block_small() {
        let d = dataset_k5();
        let hy = Hyperparameters::new(2.5, 1.0, 1.0, 1.0, d.grand_mean(), 1.0).unwrap();
        let cert = derive_block_drift_balanced(&d, &hy, 0.5385, 0.2596).unwrap();
        let rep = drift_mc_block(&d, &hy, &cert, 10, 400, 11);
        assert!(rep.passed(), "{:?}", rep.failures());
    }

    #[test]
    fn drift_mc_gibbs_small() {
        let d = dataset_k3();
        let hy = Hyperparameters::new(5.0, 20.0, 2.0, 20.0, 0.0, 4.0).unwrap();
        let spec = GibbsDriftSpec::new(2.6667, 0.41528, 1e-5).unwrap();
        let cert = derive_gibbs_drift(&d, &hy, &spec).unwrap();
        let rep = drift_mc_gibbs(&d, &hy, &cert, 10, 400, 12);
        assert!(rep.passed(), "{:?}", rep.failures());
    }

    #[test]
    fn minorization_block_small() {
        let d = dataset_k5();
        let hy = Hyperparameters::new(2.5, 1.0, 1.0, 1.0, d.grand_mean(), 1.0).unwrap();
        let cert = block_minorization(&d, &hy, 0.5385, 0.1, 3.0079).unwrap();
        let rep = minorization_domination_block(&d, &hy, &cert, 0.5385, 0.1, 8, 120, 13);
        assert!(rep.passed(), "{:?}", rep.failures());
    }

    #[test]
    fn minorization_gibbs_small() {
        let d = dataset_k3();
        let hy = Hyperparameters::new(5.0, 20.0, 2.0, 20.0, 0.0, 4.0).unwrap();
        let cert = gibbs_minorization(&d, &hy, 2.6667, 26.010).unwrap();
        let rep = minorization_domination_gibbs(&d, &hy, &cert, 2.6667, 8, 120, 120, 14);
        assert!(rep.passed(), "{:?}", rep.failures());
    }

    #[test]
    fn gamma_infimum_small() {
        let rep = gamma_infimum_grid(5, 301, 40, 15);
        assert!(rep.passed(), "{:?}", rep.failures());
    }

    #[test]
    fn ratio_bound_small() {
        let rep = ratio_bound_random(5_000, 16);
        assert!(rep.passed(), "{:?}", rep.failures());
    }

    #[test]
    fn drift_conversion_small() {
        let rep = drift_conversion_domination(0.2596, 0.8729, 1.0, 5_000);
        assert!(rep.passed(), "{:?}", rep.failures());
    }

    #[test]
    fn containment_small() {
        let d = dataset_k3();
        let hy = Hyperparameters::new(5.0, 20.0, 2.0, 20.0, 0.0, 4.0).unwrap();
        let spec = GibbsDriftSpec::new(2.6667, 0.41528, 1e-5).unwrap();
        let cert = derive_gibbs_drift(&d, &hy, &spec).unwrap();
        let rep = small_set_containment(&d, &hy, &cert, 26.010, 500, 17);
        assert!(rep.passed(), "{:?}", rep.failures());
    }

    #[test]
    fn closed_form_small() {
        let d = dataset_k3();
        let hy = Hyperparameters::new(5.0, 20.0, 2.0, 20.0, 0.0, 4.0).unwrap();
        let cert = gibbs_minorization(&d, &hy, 2.6667, 26.010).unwrap();
        let rep = minorization_closed_form(&d, &hy, &cert, 2.6667);
        assert!(rep.passed(), "{:?}", rep.failures());
    }

    #[test]
    fn moments_small() {
        let d = dataset_k5();
        let hy = Hyperparameters::new(2.5, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let rep = joint_update_moments(&d, &hy, (0.9, 1.7), 200_000, 18);
        assert!(rep.passed(), "{:?}", rep.failures());
    }
}
