#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod attention;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod harness;
pub mod measures;
pub mod numerics;

pub use error::{Error, Result};
pub use numerics::Matrix;
