//! Dynamical field inference for a single stochastically driven mode.
//!
//! The library reconstructs a scalar mode ε(t) that starts at ε(0) = 0, obeys
//! the stochastic differential equation
//!
//! ```text
//! ∂ₜε = λ ε + ½ μ ε² + ξ,       ξ ~ unit white noise,
//! ```
//!
//! and is probed by one perfect measurement d = ε(t_o). Three independent
//! routes to the posterior are provided and cross-validated:
//!
//! * [`gaussian_core`] — the finite-dimensional generalized Wiener filter:
//!   posterior mean and covariance of a Gaussian field under a linear
//!   Gaussian measurement, in both algebraic forms, including the noiseless
//!   limit N → 0.
//! * [`mode_model`] — closed-form prior/posterior statistics of the linear
//!   (μ = 0) mode for any Lyapunov exponent λ: the kernel f_λ(t,t′), the
//!   bridge mean and covariance, the Markov-blanket property, and the
//!   finite-time blow-up solution of the noise-free quadratic drift.
//! * [`perturbation`] — first-order (in μ) diagrammatic corrections to the
//!   posterior mean and covariance on [0, t_o]: bosonic and fermionic
//!   propagators, vertex rules, quadrature evaluation of every first-order
//!   diagram, and the vanishing lemmas for the bosonic three-vertex.
//! * [`path_oracle`] — a brute-force Metropolis sampler over discretized
//!   trajectories pinned at both endpoints, targeting the exact discretized
//!   path density with a switchable functional-determinant term.
//!
//! The [`cli`] module exposes the same functionality as a batch command-line
//! tool that emits machine-readable CSV/JSON sweeps.

pub mod cli;
pub mod gaussian_core;
pub mod mode_model;
pub mod path_oracle;
pub mod perturbation;
