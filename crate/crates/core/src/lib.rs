//! Numerical laboratory for the nonlocal reaction-diffusion equation
//! `u_t + (<K> u - K * u) = f(u)`.

pub mod banded;
pub mod cauchy;
pub mod config;
pub mod dispersion;
pub mod epidemics;
pub mod error;
pub mod field;
pub mod frontfit;
pub mod heatkernel;
pub mod kernels;
pub mod numerics;
pub mod reactions;
pub mod waves;

pub use error::{Error, Result};
