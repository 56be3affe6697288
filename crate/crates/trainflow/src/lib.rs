//! Training dynamics of linear system emulators.
//!
//! When a linear one-step predictor is fit to snapshot data by gradient
//! descent, the training dynamics have a closed form, and that form explains
//! a family of instabilities seen in learned simulators: convergence speed
//! tied to the energy of the data in each direction, unlearnable directions
//! frozen at their (possibly unstable) initialization, and noise injection
//! trading stability for bias. This crate implements the machinery to
//! construct such systems, train them, evaluate the closed forms, and verify
//! the analytic predictions numerically, for discrete-time and
//! continuous-time dynamics.
//!
//! # Modules
//!
//! - [`matcore`] — dense matrix kernels: full SVD, eigenvalues, matrix
//!   exponential, pseudoinverse, spectral radius.
//! - [`sysgen`] — system and snapshot-data construction: invariant-subspace
//!   block systems, trajectory data, structured noise injection, whitening,
//!   projection onto the data subspace.
//! - [`initgen`] — weight initializers (Glorot and Gershgorin families) and
//!   eigenvalue-spectrum statistics over many seeded draws.
//! - [`flowlab`] — losses, gradients, gradient-descent training,
//!   closed-form gradient flows (clean and noisy), and bias/decay-rate
//!   predictors.
//! - [`bench`] — reproducible experiment runners with CSV/JSON/SVG output,
//!   rollout stability diagnostics, and the `trainflow` CLI entry points.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example closed_form_vs_gd
//! cargo run --release --example unlearnable_directions
//! cargo run --release --example energy_ordered_convergence
//! cargo run --release --example initializer_spectra
//! cargo run --release --example noise_bias
//! cargo run --release --example noise_stabilization
//! cargo run --release --example continuous_time
//! cargo run --release --example remedies
//! cargo run --release --example rollout_stability
//! ```
//!
//! The `trainflow` binary drives the same experiments from JSON configs;
//! see the README for the CLI contract.

pub mod bench;
pub mod error;
pub mod flowlab;
pub mod initgen;
pub mod matcore;
pub mod rng;
pub mod sysgen;

pub use error::{Error, Result};
pub use matcore::{Mat, Vector};
