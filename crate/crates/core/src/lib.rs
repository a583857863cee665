//! Simulation and verification toolkit for the parabolic Anderson model
//! ∂_t u = Δu + ξu on Z^d with i.i.d. Pareto potential ξ.
//!
//! - [`lattice`]: ℓ1 geometry and exact path counts N(z), N(n, z).
//! - [`potential`]: the lazily evaluated Pareto field, its order statistics,
//!   and the scales r_t, a_t, ... that govern intermittency.
//! - [`variational`]: the functional Φ_t, the inverse map ψ_a, and a
//!   certified search for the top maximizers of Φ_t over all of Z^d.
//! - [`solver`]: the lattice heat equation with random potential on an
//!   adaptive box, plus a Feynman–Kac Monte Carlo oracle.
//! - [`spectral`]: principal Dirichlet eigenpairs of Δ + ξ and their decay.
//! - [`laws`]: closed-form limit laws and their quadratures.
//! - [`experiments`]: ensembles, KS comparisons, and reproducible outputs.

pub mod config;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod laws;
pub mod potential;
pub mod quad;
pub mod rng;
pub mod solver;
pub mod spectral;
pub mod stats;
pub mod topk;
pub mod variational;

pub use error::{Error, Result};
pub use lattice::Site;
pub use potential::{PotentialField, ScalingBundle};
