//! Random geometric graphs with inner-product and distance kernels.

pub mod detection;
pub mod distance;
pub mod error;
pub mod kernels;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod numeric;
pub mod posterior;
pub mod quadrature;
pub mod recovery;
pub mod rng;
pub mod spectra;

pub use error::{Error, Result};
