//! Distributed linear precoding for multi-gateway multibeam satellites.
//!
//! A multibeam satellite relays the signals of `M` gateways, each precoding
//! the symbols of its own cluster of `k` single-antenna users through `n` of
//! the satellite's `N` feeds under full frequency reuse. This crate provides:
//!
//! - a synthetic user-link channel model with hexagonal beam/feed layouts
//!   ([`scenario`]),
//! - the on-ground beamforming (OGBF) reference solver: alternating
//!   minimization of the sum MSE over joint precoders and diagonal receiver
//!   gains ([`ogbf`]),
//! - four on-board beamforming network designs (adaptive, null-steering,
//!   coarse, pre-fixed) with distributed MMSE gateway precoders ([`obbf`]),
//! - the inter-cluster-aware regularization factor: numerical root, closed
//!   form, and a grid-search oracle ([`regularization`]),
//! - analytic SMSE / SINR / SIR metrics and SNR power calibration
//!   ([`metrics`]),
//! - a deterministic Monte Carlo experiment harness with CSV/JSON output
//!   ([`harness`]).

pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod obbf;
pub mod ogbf;
pub mod regularization;
pub mod scenario;

pub use error::{Error, Result};

/// Double-precision complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dynamically sized complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
