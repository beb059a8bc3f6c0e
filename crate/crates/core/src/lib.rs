//! p-parabolicity criteria for submanifolds described by comparison
//! constellations, together with the radial Dirichlet problems and
//! capacities on warped-product model spaces behind them.
//!
//! The crate is organized bottom-up:
//!
//! - [`expr`]: radial expressions with exact second-order derivatives,
//! - [`quadrature`]: adaptive integration and improper-integral tails,
//! - [`model`]: the `w`-model space and its radial geometry,
//! - [`constellation`]: bound functions, balance function and weights,
//! - [`dirichlet`]: the drifted operator, its Dirichlet solution and capacities,
//! - [`criteria`]: the decision engine producing a [`Verdict`],
//! - [`diffusion`]: Monte Carlo radial Brownian motion as a stochastic cross-check,
//! - [`config`]: the JSON file form of a constellation.

pub mod config;
pub mod constellation;
pub mod criteria;
pub mod diffusion;
pub mod dirichlet;
mod error;
pub mod expr;
pub mod model;
pub mod quadrature;

pub use constellation::{Constellation, Tangency};
pub use criteria::{ClassifyConfig, Outcome, Verdict};
pub use error::{Error, Result};
pub use expr::{Jet2, RadialExpr};
pub use model::ModelSpace;
