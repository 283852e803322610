//! Pseudo-supervised deep subspace clustering.
//!
//! An autoencoder with a trainable self-expression layer learns coefficients
//! C with Z ≈ ZC and diag(C) = 0; a pseudo-graph built from C and pseudo-labels
//! from a softmax classifier supervise the embedding while it trains. The
//! final affinity matrix (truncated-SVD recipe on the symmetrized |C|) feeds
//! normalized spectral clustering. An out-of-sample path trains on a
//! subsample and labels the remainder by nearest neighbor in latent space.

pub mod affinity;
pub mod config;
pub mod error;
pub mod graph;
pub mod io;
pub mod largescale;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod synth;
pub mod train;

pub use error::{PsscError, Result};
pub use linalg::{Mat, SeededRng};
