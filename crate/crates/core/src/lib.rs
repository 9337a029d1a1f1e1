//! Rare-event Monte Carlo for portfolio credit risk under normal mixture
//! copula models.
//!
//! The crate has three layers:
//!
//! * numeric plumbing — reproducible [`stream::RandomStream`]s, special
//!   functions, validated distributions, and the conditional loss
//!   distribution on the exposure lattice ([`lossdist`]);
//! * sufficient exponential tilting — the generic two-block embedding,
//!   conjugate-measure estimator, and damped Newton solver in [`tilting`],
//!   with closed-form catalogs for the normal, multivariate normal, gamma,
//!   and normal-mixture families in [`families`];
//! * the portfolio estimator — factor models and named presets in
//!   [`portfolio`], and the two-phase importance-sampling engine in
//!   [`engine`].
//!
//! All numerics are generic over the [`real::Real`] scalar; the aliases
//! below fix `f64`, the precision the estimators are intended to run at.

pub mod dist;
pub mod engine;
pub mod error;
pub mod families;
pub mod linalg;
pub mod lossdist;
pub mod portfolio;
pub mod real;
pub mod special;
pub mod stream;
pub mod tilting;

pub use error::{Error, Result};
pub use real::Real;
pub use stream::RandomStream;

/// Working-precision aliases.
pub type PortfolioModel = portfolio::PortfolioModel<f64>;
pub type ShockSpec = portfolio::ShockSpec<f64>;
pub type FactorSample = portfolio::FactorSample<f64>;
pub type EngineTilt = engine::EngineTilt<f64>;
pub type ExperimentConfig = engine::ExperimentConfig<f64>;
pub type EstimateReport = engine::EstimateReport<f64>;
pub type TiltSolution = tilting::TiltSolution<f64>;
