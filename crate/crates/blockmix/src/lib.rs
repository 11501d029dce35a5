//! Bayesian nonparametric clustering of network collections.
//!
//! The model handles J networks observed over one shared set of I actors.
//! Networks are grouped into clusters; every cluster carries its own
//! partition of the actors into factions, and each network's dyads follow a
//! conjugate block kernel (Bernoulli-Beta for binary relations,
//! Poisson-Gamma for counts) whose parameters depend only on the factions of
//! the two endpoints. Two-parameter Chinese-restaurant priors govern both
//! partition layers, so neither the number of clusters nor the number of
//! factions is fixed in advance.
//!
//! The crate provides:
//! - the partition prior itself ([`pyp`]): predictive seating weights, exact
//!   partition probabilities, sampling, and small analytic co-clustering
//!   probabilities;
//! - network data structures and block sufficient statistics ([`network`]);
//! - conjugate kernels and collapsed marginal likelihoods ([`kernels`]);
//! - closed-form prior summaries of network properties (expected link
//!   probability, degree moments, reciprocity, transitivity) plus
//!   prior-predictive simulation and Monte Carlo studies ([`analytics`]);
//! - a collapsed Gibbs + split-merge posterior sampler ([`mcmc`]);
//! - posterior summaries: incidence matrices and loss-based point-estimate
//!   partitions ([`summaries`]);
//! - JSON-Lines trace persistence ([`trace`]).
//!
//! All randomized code takes an explicit RNG; fixed seeds give bitwise
//! reproducible results, including under the internal parallelism of
//! [`analytics::property_study`].

pub mod analytics;
pub mod error;
pub mod kernels;
pub mod mcmc;
pub mod network;
pub mod partition;
pub mod pyp;
pub mod rng;
pub mod summaries;
pub mod trace;

pub use error::{Error, Result};
pub use partition::Partition;
pub use pyp::PitmanYorParams;

/// Version string embedded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
