//! Level-set inverse lithography engine.
//!
//! The crate is organised bottom-up:
//!
//! * [`field`]: dense 2D grids shared by every stage.
//! * [`levelset`]: signed distance construction, mask extraction and the
//!   differential operators that drive boundary evolution.
//! * [`lithosim`]: Hopkins partially coherent imaging (TCC eigen-kernels,
//!   zero-padded FFT convolution) and resist models.
//! * [`ilt`]: process-variation weighted pattern error, its gradients with
//!   respect to the mask and the level set, and the conjugate-gradient
//!   optimizer.
//! * [`analysis`]: EDE statistics, process-window curves and image log slope.
//! * [`layout`], [`io`], [`config`]: synthetic layouts, on-disk formats and
//!   run configuration shared by the CLI and the FFI bridge.

pub mod analysis;
pub mod config;
mod distance;
pub mod error;
pub mod field;
pub mod ilt;
pub mod io;
pub mod layout;
pub mod levelset;
pub mod lithosim;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use levelset::LevelSet;
