//! Label-noise-robust classification with empirical likelihood and
//! Neyman–Pearson error control.

pub mod datagen;
pub mod em;
pub mod error;
pub mod eval;
pub mod model;
pub mod np_binary;
pub mod npmc;
pub mod numeric;
pub mod umbrella;
pub mod wml;

pub use error::{Error, Result};
