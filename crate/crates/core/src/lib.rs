//! Numerical toolkit for the mass transference principle.
//!
//! Gauge transforms ([`dimfun`]), set models with distance queries ([`sets`]),
//! neighbourhood-measure and scaling estimators ([`measure`]), the covering
//! selections ([`covering`]), the finite-depth Cantor construction
//! ([`cantor`]) and a random limsup simulator on the torus ([`randomsim`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cantor;
pub mod cli;
pub mod covering;
pub mod dimfun;
pub mod error;
pub mod geometry;
pub mod io;
pub mod measure;
pub mod randomsim;
pub mod regression;
pub mod rng;
pub mod sets;

pub use error::{Error, Result};

/// Version string stamped into run reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
