//! Reservoir computing on the unit hypersphere.
//!
//! The hidden state evolves under an orthogonal (isometric) linear reservoir
//! and is renormalized to unit length after every step; no activation
//! function is applied. A softmax readout is trained either in one shot via
//! ridge-regularized normal equations or online by cross-entropy gradient
//! descent.
//!
//! Modules:
//! - [`encoding`]: alphabets, index sequences, one-hot vectors.
//! - [`reservoir`]: input matrix, orthogonal / cyclic reservoirs, state update.
//! - [`readout`]: softmax, cross entropy, gradient step, ridge solvers.
//! - [`regimes`]: generative and associative training and recall.
//! - [`capacity`]: memory-capacity sweeps and error surfaces.
//! - [`crypto`]: password-keyed symmetric encryption built on the associative regime.
//! - [`artifact`]: binary model files.

pub mod artifact;
pub mod capacity;
pub mod crypto;
pub mod encoding;
mod error;
pub mod readout;
pub mod regimes;
pub mod reservoir;
pub mod rng;
mod wire;

pub use error::{Error, Result};
