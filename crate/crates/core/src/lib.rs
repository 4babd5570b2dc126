//! Cross-stimulus transfer for SSVEP decoding.
//!
//! Source-stimulus epochs are split into intrinsic mode functions, their
//! harmonic content is moved onto unseen target frequencies, and the
//! resulting training set feeds a fuzzy-attention decoder. CCA-family
//! baselines, ACC/ITR evaluation and a socket-based online simulator share
//! the same epoch pipeline.

pub mod artifacts;
pub mod baselines;
pub mod cstl;
pub mod decoder;
pub mod emd;
pub mod error;
pub mod evaluation;
pub mod fuzzy;
pub mod rng;
pub mod signal;
pub mod stream;

pub use error::{Error, Result};
