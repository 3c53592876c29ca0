//! Partially coherent lithography forward model.
//!
//! `I(x) = sum_k w_k |(M * h_k)(x)|^2` with coherent kernels `h_k` taken from
//! the eigendecomposition of a Hopkins transmission cross coefficient, then a
//! threshold (or sigmoid) resist.

mod imaging;
mod kernels;
mod optics;
mod resist;

pub use imaging::{aerial_image, Imager};
pub use kernels::{KernelBank, KernelSet};
pub use optics::{generate_kernels, GeneratedKernels, OpticsParams, Tcc};
pub use resist::{resist_sigmoid, resist_step, ResistParams};

pub use num_complex::Complex64;
