//! Adaptive Fourier-Galerkin methods for periodic elliptic problems
//! `-∇·(ν∇u) + σu = f` on the torus `(0, 2π)^d`.
//!
//! The crate works entirely in coefficient space. Building blocks live in
//! [`spectral_core`], [`sparsity`], [`operator`] and [`galerkin`]; marking and
//! coarsening in [`adaptivity`]; the adaptive drivers in [`algorithms`]; and
//! reproducible test problems plus the command-line front end in [`lab`].

pub mod adaptivity;
pub mod algorithms;
pub mod error;
pub mod galerkin;
pub mod lab;
pub mod operator;
pub mod sparsity;
pub mod spectral_core;

pub use error::{Error, Result};
pub use num_complex::Complex64;
