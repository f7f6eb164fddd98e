//! Centralized PITC, PIC and incomplete-Cholesky predictors.

mod blocks;
mod icf;
mod sparse;

pub use blocks::{even_sizes, split_even, BlockStructure};
pub use icf::{icf_factorize, icf_predict, pivot_points, IcfFactor, NEGATIVE_PIVOT_TOLERANCE};
pub use sparse::{pic_predict, pitc_predict};

pub(crate) use icf::{factor_entry, pivot_value, target_diagonal};
