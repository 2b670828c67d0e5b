// negated comparisons below are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eos;
pub mod error;
pub mod experiments;
pub mod io;
pub mod network;
pub mod pipe;
pub mod profiles;

pub use error::{Error, Result};
