//! Power allocation for full-duplex self-backhauled small cells underlaid on a
//! massive-MIMO macro downlink.
//!
//! The crate is `no_std` (it needs `alloc`). It covers the whole numerical
//! pipeline: network drops and channel realizations ([`model`]), exact SINR and
//! rate evaluation ([`rates`], [`problem`]), the successive convex lower bound
//! and its log-power form ([`relaxation`]), a log-barrier interior-point solver
//! for the concave subproblems ([`engine`]), the concave-convex procedure with
//! its feasibility search and the outer retightening loop ([`cccp`]), and the
//! comparison schemes plus a brute-force oracle ([`baselines`]).
//!
//! IO, timing, parallel sweeps and the CLI live in the `sbh-sim` crate.

#![no_std]
// `!(x > 0.0)` is how the validators reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod cccp;
pub mod engine;
mod error;
mod linalg;
mod math;
pub mod model;
pub mod problem;
pub mod rates;
pub mod relaxation;
pub mod seed;

pub use error::Error;
pub use linalg::CMatrix;
pub use math::dbm_to_watts;
