pub mod acceptance;
pub mod cli;
pub mod config;
pub mod error;
pub mod fourier;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod moments;
pub mod noise;
pub mod pam;
pub mod quadrature;
pub mod scaling;
pub mod spectral;
pub mod variational;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use kernels::{KernelFamily, KernelSpec, MollifiedKernelSpec};
