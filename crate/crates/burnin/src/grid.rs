//! Bound-parameter grid search.
//!
//! The bound value is extremely sensitive to the free parameters, so the
//! practical recipe is to lay out value lists per parameter, derive the
//! certificates at every combination, skip infeasible points, and keep
//! the configuration with the smallest sufficient burn-in.

use crate::bounds::{
    find_burnin, BoundsError, BurninResult, RosenthalEvaluator, RosenthalInputs, RtEvaluator,
    RtInputs, Theorem,
};
use crate::certificates::{
    block_minorization, convert_drift, derive_block_drift, derive_block_drift_balanced,
    derive_gibbs_drift, gibbs_minorization, BlockDriftCertificate, GeometricDriftCertificate,
    GibbsDriftCertificate, MinorizationCertificate,
};
use crate::model::{
    eval_block_drift, eval_gibbs_drift, optimal_start_block, optimal_start_gibbs, BlockDriftSpec,
    ChainState, Dataset, GibbsDriftSpec, Hyperparameters,
};
use crate::samplers::Kernel;

/// Ordered value lists for the free bound parameters.
///
/// The `phis` axis carries `phi` for the balanced block sampler, `phi1`
/// for the unbalanced one, and `c3` for the single-site sampler. `rs`
/// feeds the `(gamma, b)` bound; `a_values` feeds the drift conversion of
/// the `(rho, L)` route.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub gammas: Vec<f64>,
    pub phis: Vec<f64>,
    pub phi2s: Option<Vec<f64>>,
    pub ds: Vec<f64>,
    pub rs: Vec<f64>,
    pub a_values: Vec<f64>,
    pub target_tv: f64,
    pub rho1_slack: f64,
}

impl GridSpec {
    pub fn validate(&self, theorem: Theorem) -> Result<(), BoundsError> {
        if !(self.target_tv > 0.0 && self.target_tv < 1.0) {
            return Err(BoundsError::InvalidTarget(self.target_tv));
        }
        let mut missing = Vec::new();
        if self.gammas.is_empty() {
            missing.push("gamma");
        }
        if self.phis.is_empty() {
            missing.push("phi/c3");
        }
        if self.ds.is_empty() {
            missing.push("d");
        }
        match theorem {
            Theorem::Rosenthal if self.rs.is_empty() => missing.push("r"),
            Theorem::RobertsTweedie if self.a_values.is_empty() => missing.push("a"),
            _ => {}
        }
        if let Some(p2) = &self.phi2s {
            if p2.is_empty() {
                missing.push("phi2");
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(BoundsError::InvalidGrid(format!("empty value list(s): {}", missing.join(", "))))
        }
    }

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.partial_cmp(b).expect("grid values must not be NaN"));
        v.dedup();
        v
    }

    /// Normalizes every axis to sorted, deduplicated order.
    pub fn normalized(self) -> Self {
        Self {
            gammas: Self::sorted(self.gammas),
            phis: Self::sorted(self.phis),
            phi2s: self.phi2s.map(Self::sorted),
            ds: Self::sorted(self.ds),
            rs: Self::sorted(self.rs),
            a_values: Self::sorted(self.a_values),
            ..self
        }
    }
}

/// One candidate parameter combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub gamma: f64,
    /// `phi` (block) or `c3` (single-site).
    pub phi: f64,
    pub phi2: Option<f64>,
    pub d: f64,
    pub r: Option<f64>,
    pub a: Option<f64>,
}

/// The full evidence bundle for one evaluated parameter point.
#[derive(Debug, Clone)]
pub struct PointEvaluation {
    pub point: GridPoint,
    pub drift: DriftEvidence,
    pub minorization: MinorizationCertificate,
    pub conversion: Option<GeometricDriftCertificate>,
    pub start: ChainState,
    pub v0: f64,
    pub result: BurninResult,
}

#[derive(Debug, Clone)]
pub enum DriftEvidence {
    Block(BlockDriftCertificate),
    Gibbs(GibbsDriftCertificate),
}

impl DriftEvidence {
    pub fn gamma_b(&self) -> (f64, f64) {
        match self {
            DriftEvidence::Block(c) => (c.gamma, c.b),
            DriftEvidence::Gibbs(c) => (c.gamma, c.b),
        }
    }
}

/// Derives certificates at a single parameter point and locates its
/// sufficient burn-in.
pub fn evaluate_point(
    dataset: &Dataset,
    hyper: &Hyperparameters,
    kernel: Kernel,
    theorem: Theorem,
    point: &GridPoint,
    target_tv: f64,
    rho1_slack: f64,
) -> Result<PointEvaluation, BoundsError> {
    let (drift, minorization, start, v0) = match kernel {
        Kernel::Block => {
            let (cert, phi1, phi2) = match (dataset.balanced(), point.phi2) {
                (Some(m), None) => {
                    let cert = derive_block_drift_balanced(dataset, hyper, point.phi, point.gamma)?;
                    (cert, point.phi, 1.0 / m as f64)
                }
                (_, Some(phi2)) => {
                    let cert = derive_block_drift(dataset, hyper, point.phi, phi2, point.gamma)?;
                    (cert, point.phi, phi2)
                }
                (None, None) => {
                    return Err(BoundsError::InvalidGrid(
                        "unbalanced data requires an explicit phi2 axis".into(),
                    ))
                }
            };
            let spec = BlockDriftSpec::new(phi1, phi2, point.gamma)?;
            let (theta, mu) = optimal_start_block(&spec, dataset);
            let start = ChainState { theta, mu, lambda_theta: 1.0, lambda_e: 1.0 };
            let v0 = eval_block_drift(&start, &spec, dataset)?;
            let minor_d = match theorem {
                Theorem::Rosenthal => point.d,
                // The (rho, L) route minorizes on {W <= d} = {V <= d - 1}.
                Theorem::RobertsTweedie => point.d - 1.0,
            };
            let minor = block_minorization(dataset, hyper, phi1, phi2, minor_d)?;
            (DriftEvidence::Block(cert), minor, start, v0)
        }
        Kernel::Gibbs => {
            let spec = GibbsDriftSpec::new(point.phi, point.gamma, rho1_slack)?;
            let cert = derive_gibbs_drift(dataset, hyper, &spec)?;
            let start = optimal_start_gibbs(&spec, dataset, hyper)?;
            let v0 = eval_gibbs_drift(&start, &spec, hyper, dataset)?;
            let minor_d = match theorem {
                Theorem::Rosenthal => point.d,
                Theorem::RobertsTweedie => point.d - 1.0,
            };
            let minor = gibbs_minorization(dataset, hyper, point.phi, minor_d)?;
            (DriftEvidence::Gibbs(cert), minor, start, v0)
        }
    };

    let (gamma, b) = drift.gamma_b();
    match theorem {
        Theorem::Rosenthal => {
            let r = point.r.ok_or_else(|| {
                BoundsError::InvalidGrid("the (gamma, b) bound requires an r value".into())
            })?;
            let inputs = RosenthalInputs {
                gamma,
                b,
                epsilon: minorization.epsilon,
                d_r: point.d,
                r,
                v0,
            };
            let result = find_burnin(&RosenthalEvaluator(inputs), target_tv)?;
            Ok(PointEvaluation {
                point: *point,
                drift,
                minorization,
                conversion: None,
                start,
                v0,
                result,
            })
        }
        Theorem::RobertsTweedie => {
            let a = point.a.ok_or_else(|| {
                BoundsError::InvalidGrid("the (rho, L) route requires an a value".into())
            })?;
            let conv = convert_drift(gamma, b, a)?;
            if !(point.d >= conv.d_c) {
                return Err(BoundsError::PreconditionViolated {
                    inequality: format!(
                        "d_RT >= (a+1)L/(a(1-rho)): {} >= {}",
                        point.d, conv.d_c
                    ),
                    slack: point.d - conv.d_c,
                });
            }
            let inputs = RtInputs {
                rho: conv.rho,
                l: conv.l,
                epsilon: minorization.epsilon,
                d_rt: point.d,
                w0: 1.0 + v0,
                beta: None,
            };
            let result = find_burnin(&RtEvaluator(inputs), target_tv)?;
            Ok(PointEvaluation {
                point: *point,
                drift,
                minorization,
                conversion: Some(conv),
                start,
                v0,
                result,
            })
        }
    }
}

/// Outcome of an exhaustive grid search.
#[derive(Debug)]
pub struct GridOutcome {
    pub best: PointEvaluation,
    pub feasible: usize,
    pub infeasible: usize,
}

/// Exhaustively evaluates the grid and returns the feasible point with
/// the smallest burn-in. Ties break toward the lexicographically
/// smallest parameter tuple, which the sorted axes make identical to
/// first-found order.
pub fn grid_optimize(
    dataset: &Dataset,
    hyper: &Hyperparameters,
    kernel: Kernel,
    theorem: Theorem,
    grid: &GridSpec,
) -> Result<GridOutcome, BoundsError> {
    grid.validate(theorem)?;
    let phi2_axis: Vec<Option<f64>> = match &grid.phi2s {
        Some(v) => v.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let (r_axis, a_axis): (Vec<Option<f64>>, Vec<Option<f64>>) = match theorem {
        Theorem::Rosenthal => (grid.rs.iter().copied().map(Some).collect(), vec![None]),
        Theorem::RobertsTweedie => (vec![None], grid.a_values.iter().copied().map(Some).collect()),
    };

    let mut best: Option<PointEvaluation> = None;
    let mut feasible = 0usize;
    let mut infeasible = 0usize;
    for &gamma in &grid.gammas {
        for &phi in &grid.phis {
            for &phi2 in &phi2_axis {
                for &d in &grid.ds {
                    for &r in &r_axis {
                        for &a in &a_axis {
                            let point = GridPoint { gamma, phi, phi2, d, r, a };
                            match evaluate_point(
                                dataset,
                                hyper,
                                kernel,
                                theorem,
                                &point,
                                grid.target_tv,
                                grid.rho1_slack,
                            ) {
                                Ok(eval) => {
                                    feasible += 1;
                                    let better = best
                                        .as_ref()
                                        .map_or(true, |b| eval.result.n_star < b.result.n_star);
                                    if better {
                                        best = Some(eval);
                                    }
                                }
                                Err(BoundsError::InvalidGrid(msg)) => {
                                    return Err(BoundsError::InvalidGrid(msg))
                                }
                                Err(_) => infeasible += 1,
                            }
                        }
                    }
                }
            }
        }
    }
    match best {
        Some(best) => Ok(GridOutcome { best, feasible, infeasible }),
        None => Err(BoundsError::AllPointsInfeasible(infeasible)),
    }
}

/// Which hyperparameter pair a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Vary `a2 = b2` (the error-precision prior).
    A2B2,
    /// Vary `a1 = b1` (the group-precision prior).
    A1B1,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::A2B2 => "a2b2",
            SweepAxis::A1B1 => "a1b1",
        }
    }

    pub fn apply(self, base: &Hyperparameters, value: f64) -> Hyperparameters {
        let mut h = *base;
        match self {
            SweepAxis::A2B2 => {
                h.a2 = value;
                h.b2 = value;
            }
            SweepAxis::A1B1 => {
                h.a1 = value;
                h.b1 = value;
            }
        }
        h
    }
}

/// One sweep row: the varied value and the re-optimized bound outcome.
#[derive(Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub outcome: Result<GridOutcome, BoundsError>,
}

/// Re-runs the grid search at each swept hyperparameter value. Bound
/// parameters are re-optimized per point rather than held fixed.
pub fn sweep(
    dataset: &Dataset,
    base_hyper: &Hyperparameters,
    axis: SweepAxis,
    values: &[f64],
    kernel: Kernel,
    theorem: Theorem,
    grid: &GridSpec,
) -> Vec<SweepPoint> {
    values
        .iter()
        .map(|&value| {
            let hyper = axis.apply(base_hyper, value);
            SweepPoint {
                value,
                outcome: grid_optimize(dataset, &hyper, kernel, theorem, grid),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DEFAULT_RHO1_SLACK;

    fn dataset_k5() -> Dataset {
        Dataset::from_summaries(
            vec![10; 5],
            vec![-0.80247, -1.0014, -0.69090, -1.1413, -1.0125],
            32.990,
        )
        .unwrap()
    }

    fn centered_hyper(d: &Dataset) -> Hyperparameters {
        Hyperparameters::new(2.5, 1.0, 1.0, 1.0, d.grand_mean(), 1.0).unwrap()
    }

    fn reference_point() -> GridPoint {
        GridPoint {
            gamma: 0.2596,
            phi: 0.5385,
            phi2: None,
            d: 3.0079,
            r: Some(0.0789),
            a: None,
        }
    }

    #[test]
    fn singleton_grid_returns_its_point() {
        let d = dataset_k5();
        let hy = centered_hyper(&d);
        let grid = GridSpec {
            gammas: vec![0.2596],
            phis: vec![0.5385],
            phi2s: None,
            ds: vec![3.0079],
            rs: vec![0.0789],
            a_values: vec![],
            target_tv: 0.01,
            rho1_slack: DEFAULT_RHO1_SLACK,
        };
        let out = grid_optimize(&d, &hy, Kernel::Block, Theorem::Rosenthal, &grid).unwrap();
        assert_eq!(out.feasible, 1);
        assert_eq!(out.infeasible, 0);
        assert_eq!(out.best.point, reference_point());
        let direct = evaluate_point(
            &d,
            &hy,
            Kernel::Block,
            Theorem::Rosenthal,
            &reference_point(),
            0.01,
            DEFAULT_RHO1_SLACK,
        )
        .unwrap();
        assert_eq!(out.best.result.n_star, direct.result.n_star);
    }

    #[test]
    fn grid_result_is_exhaustive_minimum() {
        let d = dataset_k5();
        let hy = centered_hyper(&d);
        let grid = GridSpec {
            gammas: vec![0.22, 0.2596, 0.32],
            phis: vec![0.4, 0.5385],
            phi2s: None,
            ds: vec![2.8, 3.0079, 3.6],
            rs: vec![0.05, 0.0789],
            a_values: vec![],
            target_tv: 0.01,
            rho1_slack: DEFAULT_RHO1_SLACK,
        }
        .normalized();
        let out = grid_optimize(&d, &hy, Kernel::Block, Theorem::Rosenthal, &grid).unwrap();
        // Re-evaluate every point and confirm nothing beats the winner.
        let mut count_ok = 0;
        for &gamma in &grid.gammas {
            for &phi in &grid.phis {
                for &dd in &grid.ds {
                    for &r in &grid.rs {
                        let p = GridPoint { gamma, phi, phi2: None, d: dd, r: Some(r), a: None };
                        if let Ok(ev) = evaluate_point(
                            &d,
                            &hy,
                            Kernel::Block,
                            Theorem::Rosenthal,
                            &p,
                            0.01,
                            DEFAULT_RHO1_SLACK,
                        ) {
                            count_ok += 1;
                            assert!(out.best.result.n_star <= ev.result.n_star);
                        }
                    }
                }
            }
        }
        assert_eq!(count_ok, out.feasible);
        assert_eq!(out.feasible + out.infeasible, 36);
    }

    #[test]
    fn infeasible_points_are_counted_not_fatal() {
        let d = dataset_k5();
        let hy = centered_hyper(&d);
        let grid = GridSpec {
            // gamma = 0.05 is below delta = 0.125: infeasible but skippable.
            gammas: vec![0.05, 0.2596],
            phis: vec![0.5385],
            phi2s: None,
            ds: vec![3.0079],
            rs: vec![0.0789],
            a_values: vec![],
            target_tv: 0.01,
            rho1_slack: DEFAULT_RHO1_SLACK,
        };
        let out = grid_optimize(&d, &hy, Kernel::Block, Theorem::Rosenthal, &grid).unwrap();
        assert_eq!(out.feasible, 1);
        assert_eq!(out.infeasible, 1);
    }

    #[test]
    fn all_infeasible_is_an_error() {
        let d = dataset_k5();
        let hy = centered_hyper(&d);
        let grid = GridSpec {
            gammas: vec![0.05],
            phis: vec![0.5385],
            phi2s: None,
            ds: vec![3.0079],
            rs: vec![0.0789],
            a_values: vec![],
            target_tv: 0.01,
            rho1_slack: DEFAULT_RHO1_SLACK,
        };
        assert!(matches!(
            grid_optimize(&d, &hy, Kernel::Block, Theorem::Rosenthal, &grid),
            Err(BoundsError::AllPointsInfeasible(1))
        ));
    }

    #[test]
    fn unbalanced_block_grid_uses_phi2_axis() {
        let d = Dataset::from_summaries(vec![8, 10, 12, 9, 11],
            vec![-0.80247, -1.0014, -0.69090, -1.1413, -1.0125], 32.990).unwrap();
        let hy = Hyperparameters::new(2.5, 1.0, 1.0, 1.0, d.grand_mean(), 1.0).unwrap();
        // Without phi2 the grid is rejected for unbalanced data.
        let bad = GridSpec {
            gammas: vec![0.3],
            phis: vec![0.4],
            phi2s: None,
            ds: vec![6.0],
            rs: vec![0.02, 0.03],
            a_values: vec![],
            target_tv: 0.01,
            rho1_slack: DEFAULT_RHO1_SLACK,
        };
        assert!(matches!(
            grid_optimize(&d, &hy, Kernel::Block, Theorem::Rosenthal, &bad),
            Err(BoundsError::InvalidGrid(_))
        ));
        let good = GridSpec { phi2s: Some(vec![0.08, 0.1]), ..bad };
        let out = grid_optimize(&d, &hy, Kernel::Block, Theorem::Rosenthal, &good).unwrap();
        assert!(out.best.result.n_star > 0.0);
        assert!(out.best.point.phi2.is_some());
    }
}
