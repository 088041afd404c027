//! Stein's method for centered Gamma approximation of Wiener chaos vectors.

// Negated comparisons reject NaN parameters along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod chaos;
pub mod distance;
pub mod error;
pub mod experiments;
pub mod gamma_law;
pub mod hilbert;
pub mod quadrature;
pub mod selftest;
pub mod special;
pub mod stats;
pub mod stein;

pub use error::{Error, Result};
pub use gamma_law::GammaNu;
pub use quadrature::QuadratureSpec;
pub use stein::{SteinEvaluator, TestFunction};
