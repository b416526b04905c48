//! Robust Bayesian parameter estimation through Hellinger distances.
//!
//! The idea: fit a parametric family not to the raw data but to a
//! nonparametric posterior over densities. Sample densities g_1..g_J from a
//! Dirichlet-process mixture posterior, measure the squared Hellinger
//! distance from each to family members f_theta on a shared quadrature
//! grid, and either minimize a functional of those distances
//! ([`estimators`]) or treat the distance itself as a log-likelihood
//! surrogate and sample theta ([`hierarchical`]). Clean data reproduces
//! efficient conjugate answers; gross outliers, which ordinary likelihoods
//! chase, barely move a Hellinger distance.
//!
//! Module map, bottom up:
//!
//! * [`family`]: the parametric families searched over.
//! * [`grid`]: Simpson quadrature grids and grid-restricted densities.
//! * [`hellinger`]: squared distances and their minimization.
//! * [`density`]: mixture/kernel/histogram density types and ensembles.
//! * [`dpmix`]: blocked Gibbs sampler for the mixture posterior.
//! * [`estimators`]: point estimators built from a density ensemble.
//! * [`hierarchical`]: distance-as-likelihood posterior sampling.
//! * [`experiments`]: simulation studies and the paired-count data set.

pub mod density;
pub mod dpmix;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod family;
pub mod grid;
pub mod hellinger;
pub mod hierarchical;
pub mod serialize;

mod optim;
mod stats;

pub use error::{Error, Result};
pub use family::{FamilyKind, ParamVector, ParametricFamily};
pub use grid::{build_grid, GridDensity, QuadratureGrid};
pub use hellinger::{hellinger_sq, hellinger_sq_family, hellinger_sq_grid, minimize_hellinger};
