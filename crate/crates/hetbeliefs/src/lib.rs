//! Four-period asset-pricing equilibrium under heterogeneous supply-variance
//! beliefs, with closed-form momentum/reversal measures and an independent
//! Monte Carlo market verifier.
//!
//! The model: a risky asset pays D at the final date; informed traders see a
//! noisy signal of D and, crucially, overestimate the variance of the noisy
//! asset supply. Prices are affine in the signal and supply innovations, and
//! every coefficient has a closed form obtained from market clearing. Because
//! the informed under-react to price moves they attribute to supply noise,
//! price changes can positively autocorrelate (momentum) before the terminal
//! convergence to the payoff (reversal).
//!
//! Module map:
//! - [`model`]: primitives, validation, posterior weights, the informed-view
//!   substitution that defines every starred quantity.
//! - [`single`]: one-asset equilibrium coefficients, price paths, the
//!   momentum/reversal measures, finite-difference comparative statics.
//! - [`multi`]: the N-asset matrix equilibrium, cross-sectional measure
//!   matrices, definiteness classification, lead-lag experiments.
//! - [`sim`]: seeded Monte Carlo market: world draws, first-principles CARA
//!   demands, clearing checks, paired covariance estimators, wealth tracking.
//! - [`config`] / [`run`]: the batch front-end used by the `hetbeliefs`
//!   binary: flat key=value configs, CSV/JSON emission, SVG sweep charts, and
//!   the randomized invariant battery.
//!
//! Start with the runnable examples: `cargo run --example solve_equilibrium`.

pub mod config;
pub mod error;
pub mod model;
pub mod multi;
pub mod run;
pub mod sim;
pub mod single;

pub use error::ModelError;
