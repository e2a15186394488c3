//! Max-min utility resource allocation for interference-coupled wireless
//! networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`sif`]: standard interference functions, monotone norms and the
//!   normalized fixed-point solver for the conditional eigenvalue problem.
//! - [`netmodel`]: network scenarios, interference coupling, SINR/rate
//!   evaluation, the downlink rate mapping, scenario generation and IO.
//! - [`asymptotics`]: the linear asymptotic mapping, its Perron pair, the
//!   noise/interference transition point and budget sweeps.
//! - [`muting`]: partial resource muting of bottleneck services.
//! - [`flexduplex`]: joint uplink/downlink allocation with inter-mode
//!   interference (SAFP) and the corresponding muting extension.
//! - [`harness`]: Monte Carlo experiments, CSV emission and the
//!   brute-force oracle used by the test suites.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod error;
pub mod flexduplex;
pub mod harness;
pub mod muting;
pub mod netmodel;
pub mod sif;

pub use error::{Error, Result};
