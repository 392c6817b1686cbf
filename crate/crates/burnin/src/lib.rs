//! Rigorous sufficient burn-in bounds for Gibbs and block Gibbs samplers
//! on the Bayesian one-way random effects model.
//!
//! The crate derives drift and minorization certificates for both
//! samplers, evaluates two families of total-variation upper bounds in
//! log space, searches for the smallest sufficient burn-in, grid-searches
//! the free bound parameters, and numerically validates every certificate
//! it emits by simulation, quadrature, and pointwise density checks.
//!
//! # Layout
//!
//! - [`model`]: data summaries, priors, chain states, drift functions,
//!   optimal starting values.
//! - [`numerics`]: incomplete gamma, normal CDF (log-safe), scalar
//!   minimization, adaptive quadrature.
//! - [`samplers`]: the two Markov kernels, chain running, Monte Carlo
//!   one-step expectations.
//! - [`certificates`]: drift/minorization constant derivations with loud
//!   precondition checking.
//! - [`bounds`]: the two bound formulas and the burn-in search.
//! - [`grid`]: exhaustive parameter grid search and hyperparameter sweeps.
//! - [`validate`]: the numerical property suites backing every
//!   certificate.
//! - [`config`] / [`report`]: batch-run configuration and structured
//!   text reports.
//!
//! # Example
//!
//! ```
//! use burnin::model::{Dataset, Hyperparameters};
//! use burnin::grid::{evaluate_point, GridPoint};
//! use burnin::samplers::Kernel;
//! use burnin::bounds::Theorem;
//!
//! let data = Dataset::from_summaries(
//!     vec![10; 5],
//!     vec![-0.80247, -1.0014, -0.69090, -1.1413, -1.0125],
//!     32.990,
//! )
//! .unwrap();
//! let hyper = Hyperparameters::new(2.5, 1.0, 1.0, 1.0, data.grand_mean(), 1.0).unwrap();
//! let point = GridPoint {
//!     gamma: 0.2596,
//!     phi: 0.5385,
//!     phi2: None,
//!     d: 3.0079,
//!     r: Some(0.0789),
//!     a: None,
//! };
//! let eval = evaluate_point(&data, &hyper, Kernel::Block, Theorem::Rosenthal, &point, 0.01, 1e-5)
//!     .unwrap();
//! assert!(eval.result.n_star < 3500.0);
//! ```

pub mod bounds;
pub mod certificates;
pub mod config;
pub mod grid;
pub mod model;
pub mod numerics;
pub mod report;
pub mod samplers;
pub mod validate;
