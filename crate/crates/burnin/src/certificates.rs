//! Drift and minorization certificates.
//!
//! A certificate is a validated bundle of constants: a drift pair
//! `(gamma, b)` with `E[V(X_1) | X_0 = x] <= gamma V(x) + b`, or a
//! minorization constant `epsilon` valid on a drift sublevel set of
//! radius `d`. Every derivation checks its preconditions and fails
//! loudly with the violated inequality and its numeric slack; no
//! parameter is ever adjusted silently.

use crate::model::{Dataset, GibbsDriftSpec, Hyperparameters, ModelError};
use crate::numerics::{
    log_normal_density, log_std_normal_cdf, log_sum_exp, reg_lower_inc_gamma, NumericsError,
};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateError {
    #[error("drift precondition violated: {inequality} (slack {slack:.6e})")]
    DriftPreconditionViolated { inequality: String, slack: f64 },
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("balanced-case derivation requires equal group counts")]
    NotBalanced,
    #[error("small-set radius must be positive, got {0}")]
    NonpositiveRadius(f64),
    #[error("small set is empty: need d*ln(d) > c3*delta7/(K*delta1), got {lhs:.6e} <= {rhs:.6e}")]
    EmptySmallSet { lhs: f64, rhs: f64 },
    #[error("gamma-infimum threshold requires alpha > 1, got {0}")]
    AlphaNotGreaterThanOne(f64),
    #[error("interval endpoints must satisfy a <= b, got a={a}, b={b}")]
    InvalidInterval { a: f64, b: f64 },
    #[error("conversion requires {name} in {range}, got {value}")]
    ConversionDomain { name: &'static str, range: &'static str, value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

fn require(ok: bool, inequality: String, slack: f64) -> Result<(), CertificateError> {
    if ok {
        Ok(())
    } else {
        Err(CertificateError::DriftPreconditionViolated { inequality, slack })
    }
}

/// Drift certificate for the block sampler, covering both the general
/// weighted form and its balanced specialization (`phi2 = 1/m`).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDriftCertificate {
    pub phi1: f64,
    pub phi2: f64,
    pub gamma: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub delta4: f64,
    pub delta5: f64,
    /// `max(delta1, delta3)`.
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
    /// Drift offset `b`.
    pub b: f64,
    /// Whether the sharper balanced-case offset was used.
    pub balanced: bool,
}

fn block_constants(dataset: &Dataset, hyper: &Hyperparameters) -> (f64, f64, f64, f64, f64, f64, f64) {
    let k = dataset.k() as f64;
    let m_tot = dataset.total_count() as f64;
    let delta1 = 1.0 / (2.0 * hyper.a1 + k - 2.0);
    let delta2 = 1.0 / (2.0 * hyper.a2 + m_tot - 2.0);
    let delta3 = (k + 1.0) * delta2;
    let delta4 = delta2 * dataset.inv_count_sum();
    let delta5 = k * delta2;
    let c1 = 2.0 * hyper.b1 * delta1;
    let c2 = (2.0 * hyper.b2 + dataset.sse()) * delta2;
    (delta1, delta2, delta3, delta4, delta5, c1, c2)
}

fn check_block_deltas(ds: &[(&str, f64)]) -> Result<(), CertificateError> {
    for &(name, v) in ds {
        if !(v > 0.0 && v < 1.0) {
            return Err(CertificateError::AssumptionViolated(format!(
                "{name} must lie in (0, 1), got {v}; the standing K >= 3, m' >= 2 assumptions fail for this dataset/prior"
            )));
        }
    }
    Ok(())
}

/// Derives the general (unbalanced) block drift certificate for the
/// drift function `phi1 * v1 + phi2 * v2`.
pub fn derive_block_drift(
    dataset: &Dataset,
    hyper: &Hyperparameters,
    phi1: f64,
    phi2: f64,
    gamma: f64,
) -> Result<BlockDriftCertificate, CertificateError> {
    hyper.validate()?;
    if !(phi1 > 0.0) || !(phi2 > 0.0) {
        return Err(CertificateError::AssumptionViolated(format!(
            "drift weights must be positive, got phi1={phi1}, phi2={phi2}"
        )));
    }
    let (delta1, delta2, delta3, delta4, delta5, c1, c2) = block_constants(dataset, hyper);
    check_block_deltas(&[
        ("delta1", delta1),
        ("delta2", delta2),
        ("delta3", delta3),
        ("delta4", delta4),
        ("delta5", delta5),
    ])?;
    let delta = delta1.max(delta3);
    require(gamma > delta, format!("gamma > delta: {gamma} > {delta}"), gamma - delta)?;
    require(gamma < 1.0, format!("gamma < 1: {gamma} < 1"), 1.0 - gamma)?;
    let lhs = phi1 * delta4 / phi2 + delta;
    require(
        lhs < gamma,
        format!("phi1*delta4/phi2 + delta < gamma: {lhs} < {gamma}"),
        gamma - lhs,
    )?;
    let k = dataset.k() as f64;
    let m_tot = dataset.total_count() as f64;
    let hull = dataset.hull_length(hyper.m0);
    let b = phi1 * (c1 + c2 * dataset.inv_count_sum() + k * hull * hull)
        + phi2 * (c2 * (k + 1.0) + m_tot * hull * hull);
    Ok(BlockDriftCertificate {
        phi1,
        phi2,
        gamma,
        delta1,
        delta2,
        delta3,
        delta4,
        delta5,
        delta,
        c1,
        c2,
        b,
        balanced: false,
    })
}

/// Derives the sharper balanced-case block drift certificate for
/// `phi * v1 + v2 / m`.
pub fn derive_block_drift_balanced(
    dataset: &Dataset,
    hyper: &Hyperparameters,
    phi: f64,
    gamma: f64,
) -> Result<BlockDriftCertificate, CertificateError> {
    hyper.validate()?;
    let m = dataset.balanced().ok_or(CertificateError::NotBalanced)?;
    if !(phi > 0.0) {
        return Err(CertificateError::AssumptionViolated(format!(
            "drift weight must be positive, got phi={phi}"
        )));
    }
    let (delta1, delta2, delta3, delta4, delta5, c1, c2) = block_constants(dataset, hyper);
    check_block_deltas(&[
        ("delta1", delta1),
        ("delta2", delta2),
        ("delta3", delta3),
        ("delta4", delta4),
        ("delta5", delta5),
    ])?;
    let delta = delta1.max(delta3);
    require(gamma > delta, format!("gamma > delta: {gamma} > {delta}"), gamma - delta)?;
    require(gamma < 1.0, format!("gamma < 1: {gamma} < 1"), 1.0 - gamma)?;
    let lhs = phi * delta5 + delta;
    require(
        lhs < gamma,
        format!("phi*delta5 + delta < gamma: {lhs} < {gamma}"),
        gamma - lhs,
    )?;
    let k = dataset.k() as f64;
    let mf = m as f64;
    // The offset's mean-deviation term uses the unweighted average of the
    // group means.
    let yc = dataset.cell_mean();
    let dev_sum: f64 = dataset
        .group_means()
        .iter()
        .map(|&yb| {
            let a = (yc - yb) * (yc - yb);
            let c = (hyper.m0 - yb) * (hyper.m0 - yb);
            a.max(c)
        })
        .sum();
    let b = phi * c1 + ((phi * k + k + 1.0) / mf) * c2 + phi.max(1.0) * dev_sum;
    Ok(BlockDriftCertificate {
        phi1: phi,
        phi2: 1.0 / mf,
        gamma,
        delta1,
        delta2,
        delta3,
        delta4,
        delta5,
        delta,
        c1,
        c2,
        b,
        balanced: true,
    })
}

/// Drift certificate for the single-site Gibbs sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsDriftCertificate {
    pub c3: f64,
    pub gamma: f64,
    pub delta1: f64,
    pub delta6: f64,
    pub delta7: f64,
    pub rho1: f64,
    /// Drift offset `b`.
    pub b: f64,
}

pub fn derive_gibbs_drift(
    dataset: &Dataset,
    hyper: &Hyperparameters,
    spec: &GibbsDriftSpec,
) -> Result<GibbsDriftCertificate, CertificateError> {
    hyper.validate()?;
    let k = dataset.k() as f64;
    let m_tot = dataset.total_count() as f64;
    if hyper.a1 <= 1.5 {
        return Err(CertificateError::AssumptionViolated(format!(
            "a1 > 3/2 required, got a1 = {}",
            hyper.a1
        )));
    }
    let m_min = dataset.min_count() as f64;
    let m_max = dataset.max_count() as f64;
    if !(5.0 * m_min > m_max) {
        return Err(CertificateError::AssumptionViolated(format!(
            "5*m' > m'' required, got 5*{m_min} <= {m_max}"
        )));
    }
    let c3_cap = hyper.b1.min(hyper.b2);
    if !(spec.c3 > 0.0 && spec.c3 < c3_cap) {
        return Err(CertificateError::AssumptionViolated(format!(
            "c3 must lie in (0, min(b1, b2)) = (0, {c3_cap}), got {}",
            spec.c3
        )));
    }
    let delta1 = 1.0 / (2.0 * hyper.a1 + k - 2.0);
    let delta6 = (k * k + 2.0 * k * hyper.a1) / (2.0 * hyper.s0 * hyper.b1 + k * k + 2.0 * k * hyper.a1);
    let delta7 = 1.0 / (2.0 * (hyper.a1 - 1.0));
    let rho1_floor = (k + delta6 / delta7) * delta1;
    let rho1 = rho1_floor + spec.rho1_slack;
    require(
        rho1 < 1.0,
        format!("rho1 = (K + delta6/delta7)*delta1 + slack < 1: {rho1} < 1"),
        1.0 - rho1,
    )?;
    let gamma_floor = rho1.max(delta6).max(delta7);
    require(
        spec.gamma > gamma_floor && spec.gamma < 1.0,
        format!(
            "gamma in (max(rho1, delta6, delta7), 1) = ({gamma_floor}, 1), got {}",
            spec.gamma
        ),
        spec.gamma - gamma_floor,
    )?;
    let yb = dataset.grand_mean();
    let dev = hyper.m0 - yb;
    let b = (hyper.b1 / (hyper.b1 - spec.c3)).powf(hyper.a1 + k / 2.0)
        + (hyper.b2 / (hyper.b2 - spec.c3)).powf(hyper.a2 + m_tot / 2.0)
        + (delta6 + delta7) * (1.0 / hyper.s0 + dev * dev + dataset.s2() / k)
        + 2.0 * hyper.b1 * delta7 / k;
    Ok(GibbsDriftCertificate { c3: spec.c3, gamma: spec.gamma, delta1, delta6, delta7, rho1, b })
}

/// Crossing point of two gamma densities with common shape `alpha > 1`
/// and rates `b` and `b + c/2`: below it the rate-`b` density is the
/// pointwise infimum over rates `b + beta/2`, `beta in (0, c)`; above it
/// the rate-`b + c/2` density is.
pub fn gamma_inf_threshold(alpha: f64, b: f64, c: f64) -> Result<f64, CertificateError> {
    if !(alpha > 1.0) {
        return Err(CertificateError::AlphaNotGreaterThanOne(alpha));
    }
    if !(b > 0.0) || !(c > 0.0) {
        return Err(CertificateError::AssumptionViolated(format!(
            "gamma_inf_threshold requires b, c > 0, got b={b}, c={c}"
        )));
    }
    Ok(2.0 * alpha / c * (1.0 + c / (2.0 * b)).ln())
}

/// Pointwise infimum over means `tau in [a, b]` of the normal density
/// `N(tau, sigma2)` evaluated at `x`: the far endpoint wins.
pub fn normal_inf_value(a: f64, b: f64, sigma2: f64, x: f64) -> Result<f64, CertificateError> {
    if !(a <= b) {
        return Err(CertificateError::InvalidInterval { a, b });
    }
    if !(sigma2 > 0.0) {
        return Err(CertificateError::AssumptionViolated(format!(
            "variance must be positive, got {sigma2}"
        )));
    }
    let tau = if x <= 0.5 * (a + b) { b } else { a };
    Ok(log_normal_density(tau, sigma2, x)?.exp())
}

/// A minorization constant together with the split constants that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MinorizationCertificate {
    /// Small-set radius in drift-function units.
    pub d: f64,
    pub epsilon: f64,
    /// `ln(epsilon)`; meaningful even when `epsilon` underflows.
    pub log_epsilon: f64,
    pub split: MinorizationSplit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MinorizationSplit {
    Block {
        lambda_theta_star: f64,
        lambda_e_star: f64,
        /// Mass of the lower envelope of the `lambda_theta` conditional.
        int_h1: f64,
        /// Mass of the lower envelope of the `lambda_e` conditional.
        int_h2: f64,
    },
    Gibbs {
        c4: f64,
        c_l: f64,
        c_u: f64,
        v: f64,
        m_l: f64,
        m_u: f64,
    },
}

/// Minorization constant for the block sampler on the set
/// `{phi1 v1 < d} ∩ {phi2 v2 < d}`.
///
/// `epsilon` is the product of the masses of the two piecewise-gamma
/// lower envelopes, each evaluated with two regularized incomplete gamma
/// calls.
pub fn block_minorization(
    dataset: &Dataset,
    hyper: &Hyperparameters,
    phi1: f64,
    phi2: f64,
    d: f64,
) -> Result<MinorizationCertificate, CertificateError> {
    hyper.validate()?;
    if !(d > 0.0) {
        return Err(CertificateError::NonpositiveRadius(d));
    }
    if !(phi1 > 0.0) || !(phi2 > 0.0) {
        return Err(CertificateError::AssumptionViolated(format!(
            "minorization weights must be positive, got phi1={phi1}, phi2={phi2}"
        )));
    }
    let k = dataset.k() as f64;
    let m_tot = dataset.total_count() as f64;
    let sse = dataset.sse();

    let alpha1 = k / 2.0 + hyper.a1;
    let alpha2 = m_tot / 2.0 + hyper.a2;
    let lts = gamma_inf_threshold(alpha1, hyper.b1, d / phi1)?;
    let les = gamma_inf_threshold(alpha2, sse / 2.0 + hyper.b2, d / phi2)?;

    let int_h1 = reg_lower_inc_gamma(alpha1, hyper.b1 * lts)?
        + 1.0
        - reg_lower_inc_gamma(alpha1, (d / (2.0 * phi1) + hyper.b1) * lts)?;
    let int_h2 = reg_lower_inc_gamma(alpha2, (sse / 2.0 + hyper.b2) * les)?
        + 1.0
        - reg_lower_inc_gamma(alpha2, ((phi2 * sse + d) / (2.0 * phi2) + hyper.b2) * les)?;
    let int_h1 = int_h1.clamp(0.0, 1.0);
    let int_h2 = int_h2.clamp(0.0, 1.0);
    let epsilon = int_h1 * int_h2;
    Ok(MinorizationCertificate {
        d,
        epsilon,
        log_epsilon: epsilon.ln(),
        split: MinorizationSplit::Block {
            lambda_theta_star: lts,
            lambda_e_star: les,
            int_h1,
            int_h2,
        },
    })
}

/// Minorization constant for the single-site sampler on the superset of
/// `{V3 <= d}` cut out by the box conditions on `(lambda, mu-center)`.
///
/// The closed form is evaluated entirely in log space; the two normal
/// tail masses go through [`log_std_normal_cdf`] so nothing underflows
/// even when `epsilon` is far below machine range.
pub fn gibbs_minorization(
    dataset: &Dataset,
    hyper: &Hyperparameters,
    c3: f64,
    d: f64,
) -> Result<MinorizationCertificate, CertificateError> {
    hyper.validate()?;
    if !(d > 0.0) {
        return Err(CertificateError::NonpositiveRadius(d));
    }
    if hyper.a1 <= 1.5 {
        return Err(CertificateError::AssumptionViolated(format!(
            "a1 > 3/2 required, got a1 = {}",
            hyper.a1
        )));
    }
    let k = dataset.k() as f64;
    let delta1 = 1.0 / (2.0 * hyper.a1 + k - 2.0);
    let delta7 = 1.0 / (2.0 * (hyper.a1 - 1.0));
    let rhs = c3 * delta7 / (k * delta1);
    let lhs = if d > 0.0 { d * d.ln() } else { f64::NEG_INFINITY };
    if !(lhs > rhs) {
        return Err(CertificateError::EmptySmallSet { lhs, rhs });
    }

    let ld = d.ln();
    let c4 = delta7 / (k * delta1 * d);
    let yb = dataset.grand_mean();
    let half_width = ((hyper.m0 - yb) * (hyper.m0 - yb) + d).sqrt();
    let c_l = yb - half_width;
    let c_u = yb + half_width;

    let w_ratio: f64 = dataset.counts().iter().map(|&mi| mi as f64 / (1.0 + mi as f64)).sum();
    let v = 1.0 / (hyper.s0 + (ld / c3) * (k + w_ratio));
    let sy: f64 = dataset
        .counts()
        .iter()
        .zip(dataset.group_means())
        .map(|(&mi, &ybi)| ybi * mi as f64 / (1.0 + mi as f64))
        .sum();
    let m_l = v * (c_l * hyper.s0 + (ld / c3) * (k * c_l + sy));
    let m_u = v * (c_u * hyper.s0 + (ld / c3) * (k * c_u + sy));

    let sum_log_1p: f64 = dataset.counts().iter().map(|&mi| (1.0 + mi as f64).ln()).sum();
    let sum_y2: f64 = dataset
        .counts()
        .iter()
        .zip(dataset.group_means())
        .map(|(&mi, &ybi)| ybi * ybi * mi as f64 / (1.0 + mi as f64))
        .sum();

    let lead = 0.5 * (v * (hyper.s0 + k * c4)).ln() - 0.5 * sum_log_1p
        + 0.5 * k * (c4 * c3 / ld).ln()
        - (ld / (2.0 * c3)) * sum_y2;
    let sqrt_v = v.sqrt();
    let term_u = -0.5 * c_u * c_u * hyper.s0 - k * c_u * c_u * ld / (2.0 * c3)
        + m_u * m_u / (2.0 * v)
        + log_std_normal_cdf((yb - m_u) / sqrt_v);
    let term_l = -0.5 * c_l * c_l * hyper.s0 - k * c_l * c_l * ld / (2.0 * c3)
        + m_l * m_l / (2.0 * v)
        + log_std_normal_cdf((m_l - yb) / sqrt_v);
    let log_epsilon = lead + log_sum_exp(term_u, term_l);
    Ok(MinorizationCertificate {
        d,
        epsilon: log_epsilon.exp(),
        log_epsilon,
        split: MinorizationSplit::Gibbs { c4, c_l, c_u, v, m_l, m_u },
    })
}

/// Drift certificate in the `(rho, L)` form obtained from a `(gamma, b)`
/// pair by the additive shift `W = 1 + V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricDriftCertificate {
    pub rho: f64,
    pub l: f64,
    /// Sublevel threshold (in `W` units) on which the drift indicator is
    /// supported: `(a + 1) L / (a (1 - rho))`.
    pub d_c: f64,
    pub a: f64,
}

/// Converts a `(gamma, b)` drift pair into the `(rho, L)` form:
/// `rho = (a + gamma)/(a + 1)`, `L = b + 1 - gamma`. The threshold
/// `d_c` is minimized at `a = 1`, the default used throughout.
pub fn convert_drift(gamma: f64, b: f64, a: f64) -> Result<GeometricDriftCertificate, CertificateError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(CertificateError::ConversionDomain { name: "gamma", range: "(0, 1)", value: gamma });
    }
    if !b.is_finite() || b < 0.0 {
        return Err(CertificateError::ConversionDomain { name: "b", range: "[0, inf)", value: b });
    }
    if !(a > 0.0) {
        return Err(CertificateError::ConversionDomain { name: "a", range: "(0, inf)", value: a });
    }
    let rho = (a + gamma) / (a + 1.0);
    let l = b + (1.0 - gamma);
    let d_c = (a + 1.0) * l / (a * (1.0 - rho));
    Ok(GeometricDriftCertificate { rho, l, d_c, a })
}

/// Checks both the hypotheses `5b > a >= b > 0`, `x, y > 0` and the
/// conclusion `(ax/(ax+y))^2 + (y/(bx+y))^2 < 1`.
pub fn ratio_bound_holds(a: f64, b: f64, x: f64, y: f64) -> bool {
    let hypotheses = b > 0.0 && a >= b && 5.0 * b > a && x > 0.0 && y > 0.0;
    if !hypotheses {
        return false;
    }
    let u = a * x / (a * x + y);
    let w = y / (b * x + y);
    u * u + w * w < 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

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

    fn informative() -> Hyperparameters {
        Hyperparameters::new(5.0, 20.0, 2.0, 20.0, 0.0, 4.0).unwrap()
    }

    #[test]
    fn unbalanced_delta4_hand_example() {
        // m = (2, 3, 4), a2 = 1, M = 9: delta2 = 1/9, delta4 = 13/108.
        let d = Dataset::from_summaries(vec![2, 3, 4], vec![0.0, 1.0, 2.0], 1.0).unwrap();
        let hy = Hyperparameters::new(2.0, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let cert = derive_block_drift(&d, &hy, 0.01, 1.0, 0.9).unwrap();
        assert_relative_eq!(cert.delta2, 1.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(cert.delta4, 13.0 / 108.0, max_relative = 1e-14);
    }

    #[test]
    fn balanced_delta4_collapses() {
        let d = dataset_k5();
        let hy = Hyperparameters::new(2.5, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let cert = derive_block_drift(&d, &hy, 0.01, 0.1, 0.9).unwrap();
        assert_relative_eq!(cert.delta4, cert.delta2 * 5.0 / 10.0, max_relative = 1e-14);
    }

    #[test]
    fn gamma_below_delta_is_rejected() {
        let d = dataset_k5();
        let hy = Hyperparameters::new(2.5, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        // delta = max(1/8, 6/50) = 0.125.
        let err = derive_block_drift(&d, &hy, 0.01, 0.1, 0.12).unwrap_err();
        assert!(matches!(err, CertificateError::DriftPreconditionViolated { .. }));
        assert!(err.to_string().contains("gamma > delta"));
    }

    #[test]
    fn balanced_certificate_reference_setting_centered() {
        // Centered prior (m0 at the grand mean), phi = 0.5385: the offset's
        // deviation sum collapses to s2 and b ~ 0.8729.
        let d = dataset_k5();
        let hy = Hyperparameters::new(2.5, 1.0, 1.0, 1.0, d.grand_mean(), 1.0).unwrap();
        let cert = derive_block_drift_balanced(&d, &hy, 0.5385, 0.2596).unwrap();
        assert!((cert.b - 0.8729).abs() < 2e-4, "b = {}", cert.b);
        // Precondition arithmetic: phi*delta5 + delta = 0.17885 < gamma.
        assert_relative_eq!(cert.delta5, 0.10, max_relative = 1e-12);
        assert_relative_eq!(cert.delta, 0.125, max_relative = 1e-12);
        assert!((cert.phi1 * cert.delta5 + cert.delta - 0.17885).abs() < 1e-10);
    }

    #[test]
    fn balanced_certificate_reference_setting_origin() {
        // m0 = 0: the prior-mean deviations dominate the offset.
        let d = dataset_k5();
        let hy = Hyperparameters::new(2.5, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let cert = derive_block_drift_balanced(&d, &hy, 0.9423, 0.2596).unwrap();
        assert!((cert.b - 5.437).abs() < 1e-3, "b = {}", cert.b);
    }

    #[test]
    fn unbalanced_data_rejected_by_balanced_derivation() {
        let d = Dataset::from_summaries(vec![2, 3, 4], vec![0.0, 1.0, 2.0], 1.0).unwrap();
        let hy = Hyperparameters::new(2.0, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            derive_block_drift_balanced(&d, &hy, 0.5, 0.9),
            Err(CertificateError::NotBalanced)
        ));
    }

    #[test]
    fn gibbs_certificate_reference_setting() {
        let d = dataset_k3();
        let hy = informative();
        let spec = GibbsDriftSpec::new(2.6667, 0.41528, 1e-5).unwrap();
        let cert = derive_gibbs_drift(&d, &hy, &spec).unwrap();
        assert_relative_eq!(cert.delta1, 1.0 / 11.0, max_relative = 1e-14);
        assert_relative_eq!(cert.delta6, 39.0 / 199.0, max_relative = 1e-12);
        assert_relative_eq!(cert.delta7, 0.125, max_relative = 1e-14);
        assert!((cert.rho1 - 0.41527).abs() < 2e-5, "rho1 = {}", cert.rho1);
        assert!((cert.b - 7.55).abs() / 7.55 < 0.01, "b = {}", cert.b);
    }

    #[test]
    fn gibbs_certificate_assumption_gates() {
        let d = dataset_k3();
        let spec = GibbsDriftSpec::new(2.6667, 0.41528, 1e-5).unwrap();
        let hy = Hyperparameters::new(1.4, 20.0, 2.0, 20.0, 0.0, 4.0).unwrap();
        let err = derive_gibbs_drift(&d, &hy, &spec).unwrap_err();
        assert!(err.to_string().contains("a1 > 3/2"));

        let skewed = Dataset::from_summaries(vec![2, 2, 11], vec![0.0, 1.0, 2.0], 3.0).unwrap();
        let err = derive_gibbs_drift(&skewed, &informative(), &spec).unwrap_err();
        assert!(err.to_string().contains("5*m' > m''"));

        let bad_c3 = GibbsDriftSpec::new(25.0, 0.41528, 1e-5).unwrap();
        let err = derive_gibbs_drift(&d, &informative(), &bad_c3).unwrap_err();
        assert!(err.to_string().contains("c3"));

        let bad_gamma = GibbsDriftSpec::new(2.6667, 0.30, 1e-5).unwrap();
        let err = derive_gibbs_drift(&d, &informative(), &bad_gamma).unwrap_err();
        assert!(err.to_string().contains("gamma"));
    }

    #[test]
    fn gamma_inf_threshold_examples() {
        assert!(matches!(
            gamma_inf_threshold(1.0, 1.0, 1.0),
            Err(CertificateError::AlphaNotGreaterThanOne(_))
        ));
        let x = gamma_inf_threshold(2.0, 1.0, 2.0).unwrap();
        assert_relative_eq!(x, 2.0 * (2.0_f64).ln(), max_relative = 1e-14);
        // Continuity limit c -> 0+ gives alpha / b.
        let x = gamma_inf_threshold(3.0, 2.0, 1e-9).unwrap();
        assert_relative_eq!(x, 1.5, max_relative = 1e-6);
        // The split point of the reference block certificate at d = 3.0079.
        let x = gamma_inf_threshold(5.0, 1.0, 3.0079 / 0.5385).unwrap();
        assert!((x - 2.386_661_665_092_805).abs() < 1e-9, "x = {x}");
    }

    #[test]
    fn block_minorization_limits_and_reference_values() {
        let d5 = dataset_k5();
        let hy = Hyperparameters::new(2.5, 1.0, 1.0, 1.0, d5.grand_mean(), 1.0).unwrap();
        assert!(matches!(
            block_minorization(&d5, &hy, 0.5, 0.1, 0.0),
            Err(CertificateError::NonpositiveRadius(_))
        ));
        // d -> 0+: both envelope masses tend to one.
        let c = block_minorization(&d5, &hy, 0.5385, 0.1, 1e-10).unwrap();
        assert!(c.epsilon > 1.0 - 1e-6, "epsilon = {}", c.epsilon);

        // Reference case: phi = 0.5385, d = 3.0079 -> epsilon ~ 0.0171.
        let c = block_minorization(&d5, &hy, 0.5385, 0.1, 3.0079).unwrap();
        assert!(
            (c.epsilon - 0.0171).abs() / 0.0171 < 0.10,
            "epsilon = {}",
            c.epsilon
        );

        // Diffuse setting: phi = 0.2965, d = 2.8039 -> epsilon ~ 8.1e-6.
        let hy4 = Hyperparameters::new(0.01, 0.01, 0.01, 0.01, d5.grand_mean(), 1.0).unwrap();
        let c = block_minorization(&d5, &hy4, 0.2965, 0.1, 2.8039).unwrap();
        assert!(
            (c.epsilon - 8.1e-6).abs() / 8.1e-6 < 0.25,
            "epsilon = {}",
            c.epsilon
        );
    }

    #[test]
    fn block_minorization_decreasing_in_radius() {
        let d5 = dataset_k5();
        let hy = Hyperparameters::new(2.5, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..30 {
            let d = 0.5 + i as f64;
            let c = block_minorization(&d5, &hy, 0.5385, 0.1, d).unwrap();
            assert!(c.epsilon < last, "epsilon not strictly decreasing at d = {d}");
            assert!(c.epsilon > 0.0 && c.epsilon <= 1.0);
            last = c.epsilon;
        }
    }

    #[test]
    fn gibbs_minorization_empty_set_and_reference_value() {
        let d3 = dataset_k3();
        let hy = informative();
        // Tiny d: d ln d below the threshold c3*delta7/(K*delta1).
        assert!(matches!(
            gibbs_minorization(&d3, &hy, 2.6667, 1.2),
            Err(CertificateError::EmptySmallSet { .. })
        ));
        // Reference radius: the closed form evaluates without underflow.
        let c = gibbs_minorization(&d3, &hy, 2.6667, 26.010).unwrap();
        assert!(c.log_epsilon.is_finite());
        // Frozen; cross-validated against quadrature in the validation suite.
        assert_relative_eq!(c.log_epsilon, (1.766533e-49_f64).ln(), max_relative = 1e-6);
        match c.split {
            MinorizationSplit::Gibbs { c4, c_l, c_u, .. } => {
                assert_relative_eq!(c4, 0.125 / (3.0 * (1.0 / 11.0) * 26.010), max_relative = 1e-12);
                assert!(c_l < c_u);
            }
            _ => panic!("expected gibbs split"),
        }
    }

    #[test]
    fn normal_inf_value_cases() {
        assert!(matches!(
            normal_inf_value(2.0, 1.0, 1.0, 0.0),
            Err(CertificateError::InvalidInterval { .. })
        ));
        // Degenerate interval: the single density value.
        let v = normal_inf_value(1.0, 1.0, 2.0, 0.3).unwrap();
        assert_relative_eq!(v, log_normal_density(1.0, 2.0, 0.3).unwrap().exp(), max_relative = 1e-12);
        // Midpoint: both branches agree by symmetry.
        let mid = normal_inf_value(0.0, 2.0, 1.5, 1.0).unwrap();
        assert_relative_eq!(
            mid,
            log_normal_density(0.0, 1.5, 1.0).unwrap().exp(),
            max_relative = 1e-12
        );
        // Far-side selection: N(0, 1; 3).
        let v = normal_inf_value(0.0, 2.0, 1.0, 3.0).unwrap();
        assert!((v - 0.0044318).abs() < 1e-6, "v = {v}");
    }

    #[test]
    fn convert_drift_examples() {
        let g = convert_drift(0.5, 1.0, 1.0).unwrap();
        assert_relative_eq!(g.rho, 0.75, max_relative = 1e-14);
        assert_relative_eq!(g.l, 1.5, max_relative = 1e-14);
        assert_relative_eq!(g.d_c, 12.0, max_relative = 1e-14);
        // a = 1 specializes rho to (1 + gamma)/2.
        for gamma in [0.1, 0.33, 0.9] {
            let g = convert_drift(gamma, 0.7, 1.0).unwrap();
            assert_relative_eq!(g.rho, 0.5 * (1.0 + gamma), max_relative = 1e-14);
        }
        assert!(convert_drift(1.2, 1.0, 1.0).is_err());
        assert!(convert_drift(0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn convert_drift_scalar_domination() {
        // gamma(1+v) + b + (1-gamma) <= rho(1+v) + L * [1+v <= d_c] on a
        // dense grid of v >= 0.
        for (gamma, b, a) in [(0.5, 1.0, 1.0), (0.26, 0.87, 1.0), (0.8, 3.0, 2.0)] {
            let g = convert_drift(gamma, b, a).unwrap();
            for i in 0..20_000 {
                let v = i as f64 * 0.01;
                let w = 1.0 + v;
                let lhs = gamma * w + b + (1.0 - gamma);
                let rhs = g.rho * w + if w <= g.d_c { g.l } else { 0.0 };
                assert!(
                    lhs <= rhs + 1e-9,
                    "domination fails at v={v} for (gamma={gamma}, b={b}, a={a})"
                );
            }
        }
    }

    #[test]
    fn ratio_bound_hand_examples() {
        assert!(ratio_bound_holds(1.0, 1.0, 1.0, 1.0)); // 0.25 + 0.25 = 0.5
        assert!(ratio_bound_holds(4.0, 1.0, 1.0, 1.0)); // 0.64 + 0.25 = 0.89
        assert!(!ratio_bound_holds(5.0, 1.0, 1.0, 1.0)); // hypothesis 5b > a fails
        assert!(!ratio_bound_holds(0.5, 1.0, 1.0, 1.0)); // a >= b fails
        assert!(!ratio_bound_holds(1.0, 1.0, -1.0, 1.0));
    }
}
