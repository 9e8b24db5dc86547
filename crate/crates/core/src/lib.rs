//! Stochastic dynamic programming control of an electric hot-water tank fed
//! partly by a rooftop PV array.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod config;
pub mod distribution;
pub mod error;
pub mod forecast;
pub mod grid;
pub mod io;
pub mod method;
pub mod models;
pub mod policy;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
