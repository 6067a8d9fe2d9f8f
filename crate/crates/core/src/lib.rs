//! Single-pixel imaging with simplex-coded illumination patterns.
//!
//! Real-valued sampling matrices are re-encoded as non-negative patterns on
//! the vertices of a regular simplex, which cancels bias that is constant
//! over each bundle of `p + 1` patterns and whitens detector noise.

pub mod camera;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod image_io;
pub mod recon;
pub mod sampling;
pub mod simplex;

pub use error::{Error, Result};
