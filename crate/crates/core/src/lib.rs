//! Synthetic thin-film flake microscopy, contrast-space classification and
//! AP50 evaluation.

pub mod annotations;
pub mod contrast;
pub mod detector;
pub mod error;
pub mod eval;
pub mod mixture;
pub mod optics;
pub mod raster;
pub mod rng;
pub mod scene;
pub mod shapes;

pub use error::{Error, Result};
