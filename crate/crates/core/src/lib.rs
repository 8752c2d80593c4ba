//! Solver library for nonlinear parabolic equations
//! `u_t - div(A(x,t,∇u) + B(x,t,u)) = -div F` with singular drift.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod accretive;
pub mod config;
pub mod error;
pub mod evolution;
pub mod exec;
pub mod experiments;
pub mod grid;
pub mod linalg;
pub mod lorentz;
pub mod models;
pub mod plot;
pub mod spectral;
pub mod steady;

pub use error::{Error, Result};
