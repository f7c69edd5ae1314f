//! Private estimation of the inverse temperature of a one-parameter Ising
//! model observed once on a known network.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: networks, random graph generators, edge-list ingestion and the
//!   sparse coupling matrices built from them.
//! - [`ising`]: Hamiltonian, local fields, exact enumeration oracles and a
//!   heat-bath Glauber sampler.
//! - [`estimator`]: the pseudo-likelihood score, the non-private MPLE and the
//!   objective-perturbation estimator with its noise calibration.
//! - [`audit`]: executable checks of the flip-sensitivity, Jacobian-ratio and
//!   noise-density-ratio bounds, plus a Monte Carlo privacy smoke test.
//! - [`rng`]: keyed, reproducible random streams.

pub mod audit;
pub mod error;
pub mod estimator;
pub mod graph;
pub mod ising;
pub mod rng;

pub use error::{Error, Result};
pub use estimator::{
    calibrate, mple, prising, prising_with, pseudo_likelihood_slope, pseudo_likelihood_value,
    sample_noise, Calibration, EstimateReport, NoiseDistribution, Outcome, Overrides,
    PrivacyBudget, PseudoLikelihood, SolverSettings,
};
pub use graph::{CouplingMatrix, Network};
pub use ising::{IsingModel, SpinConfiguration};
