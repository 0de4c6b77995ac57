// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod cli;
pub mod config;
pub mod coulomb;
pub mod error;
pub mod hamiltonians;
pub mod numerics;
pub mod phonons;
pub mod protocols;
pub mod redfield;
pub mod units;
pub mod wavefunctions;

pub use error::{Error, Result};
