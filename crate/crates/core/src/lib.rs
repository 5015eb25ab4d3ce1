//! Local likelihood estimation of Beta distributions whose two shape
//! parameters vary over time, with cross-validated bandwidth selection,
//! a moments-plus-FPCA baseline, and cohort-level dimension reduction.

pub mod bandwidth;
pub mod baseline;
pub mod betadist;
pub mod cohort;
pub mod error;
pub mod fpca;
pub mod kernel;
pub mod loclik;
pub mod optim;
pub mod simulation;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
