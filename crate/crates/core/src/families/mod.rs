//! Closed-form sufficient-tilting catalogs: one-dimensional normal,
//! multivariate normal with the shared-off-diagonal quadratic
//! parameterization, gamma, and the one-factor normal mixture product family.

pub mod gamma;
pub mod mixture;
pub mod mvn;
pub mod normal;

pub use gamma::GammaFamily;
pub use mixture::NormalMixtureFamily;
pub use mvn::MvnFamily;
pub use normal::StdNormalFamily;
