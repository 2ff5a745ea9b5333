//! Latent-space image compression sealed with a chaotic permutation and ECIES.
//!
//! An image is encoded to a short latent vector, its elements are permuted by
//! an ordering derived from a Henon-map orbit, and the result is encrypted to
//! a P-256 public key. See [`pipeline`] for the composition.

pub mod codec;
pub mod dataset;
pub mod ecies;
pub mod henon;
pub mod image;
pub mod metrics;
pub mod pipeline;
pub mod transfer;
