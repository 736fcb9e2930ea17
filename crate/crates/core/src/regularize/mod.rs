//! Truncated (generalized) SVD steps and truncation-index selection.

mod dense;
mod gsvd;
mod operator;
mod pick;
mod svd;

pub use gsvd::{GsvdFactors, GsvdShape, RANK_FLOOR};
pub use operator::{OperatorKind, RegularizationOperator};
pub use pick::{discrepancy_pick, lcurve_corner, resreg_pick, Pick, PickFlag, DEFAULT_KAPPA};
pub use svd::{SvdFactors, RANK_TOLERANCE};
