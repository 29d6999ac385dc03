// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binarize;
pub mod cli;
pub mod cox;
pub mod data;
pub mod design;
pub mod simgen;
pub mod solver;
pub mod unilasso;
pub mod error;
pub mod metrics;
pub mod pipelines;

pub use error::{Error, Result};
