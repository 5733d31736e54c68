//! Optimal transport maps and nonlinear filtering on Riemannian manifolds.
//!
//! The crate learns transport maps between sampled distributions on the
//! circle, SE(2), and SO(3) by alternating stochastic optimization of a
//! potential network and a Lie-algebra-valued vector-field network. The
//! learned map has the form `T(z) = exp_z[-U(z)]`, so displacement
//! trajectories are geodesics. A block-triangular variant conditions the
//! vector field on an observation vector, which turns the same machinery
//! into a likelihood-free posterior sampler and, applied step by step, an
//! ensemble nonlinear filter.
//!
//! Module map:
//! - [`manifold`]: exact geometry (exp/log maps, geodesic distances,
//!   network embeddings, distribution sampling).
//! - [`nn`]: small residual networks with exact reverse-mode gradients and
//!   an Adam optimizer.
//! - [`ot`]: the max-min transport solver for unconditional problems.
//! - [`conditional`]: the block-triangular conditional solver.
//! - [`filter`]: sequential filters (OT, SIR, EnKF) and observation models.
//! - [`evaluation`]: ground-truth oracles (exact discrete OT, quadrature
//!   Bayes posterior) and circular statistics.
//! - [`config`] / [`experiment`]: the configuration-driven experiment
//!   runner behind the `manifold-ot` binary.

pub mod conditional;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod filter;
pub mod manifold;
pub mod nn;
pub mod ot;
pub mod rng;
pub mod selftest;

pub use error::{Error, Result};
pub use manifold::{DistributionSpec, ManifoldId, ManifoldPoint};
pub use nn::{AdamState, Net, NetSpec};
pub use ot::{OtSolution, SampleSource, TrainConfig};

