//! Lossy coding length toolkit.
//!
//! * [`coding`]: coding rate and coding length of sample sets.
//! * [`segmentation`]: clustering by minimizing segmented coding length.
//! * [`micl`]: minimum incremental coding length classification.
//! * [`mcr2`]: maximal coding rate reduction of feature matrices.
//! * [`datagen`]: seeded synthetic mixtures.

pub mod coding;
pub mod datagen;
pub mod error;
pub mod linalg;
pub mod mcr2;
pub mod micl;
pub mod segmentation;

pub use coding::{DataMatrix, Distortion, GaussianMoments, GramMatrix};
pub use error::{Error, Result};
