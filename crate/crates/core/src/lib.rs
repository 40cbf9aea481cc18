//! Symmetry-aware disentanglement of per-vertex shape descriptors.
//!
//! Descriptors are split by a learned orthonormal projection into a scalar
//! symmetry-informative channel and a symmetry-agnostic remainder. The scalar
//! channel can be refined into a binary left/right labeling by exact graph-cut
//! minimization of a Potts energy, and both channels feed symmetry detection,
//! left/right classification and shape matching metrics.

pub mod analysis;
pub mod descriptors;
pub mod disentangler;
pub mod error;
pub mod losses;
pub mod mesh;
pub mod numkernel;
pub mod pipeline;
pub mod refine;
pub mod train;

pub use error::{Error, ErrorKind, Result};
