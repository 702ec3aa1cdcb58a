//! Bayes factors for the equality of two binomial proportions.

pub mod averaging;
pub mod depib;
pub mod error;
pub mod harness;
pub mod ib;
pub mod lt;
pub mod model;
pub mod oracle;
pub mod posterior;
pub mod priors;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
