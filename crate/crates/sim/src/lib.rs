//! Monte Carlo harness around `sbh-core`: scenario configuration, parallel
//! sweeps over droppings, result files and the acceptance checks.

pub mod config;
pub mod harness;
pub mod output;
pub mod selftest;
