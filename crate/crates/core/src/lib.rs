//! Budgeted model selection for online ensembles.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod learners;
pub mod mdp;
pub mod par;
pub mod policies;
pub mod streams;
pub mod theory;

pub use error::{Error, Result};
