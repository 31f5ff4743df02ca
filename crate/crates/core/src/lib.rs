//! Amplification limits of post-selected weak measurements.
//!
//! The crate models an impulsive system-detector coupling `g A ⊗ Ω`, computes
//! exact postselected detector states, and solves the variational problem for
//! the largest achievable mean shift of a detector observable `M`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amplimit;
pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod oracle;
pub mod pointer;
pub mod random;
pub mod weakmeas;

pub use error::{Error, Result};
