// NaN-rejecting range checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cf;
pub mod closed_form;
pub mod composition;
pub mod config;
pub mod error;
pub mod expansion;
pub mod harness;
pub mod monte_carlo;
pub mod multi_index;
pub mod pricing;
pub mod quadrature;
pub mod symbol;

pub use error::{Error, Result};
