//! hp-variational physics-informed neural networks.
//!
//! A single fully connected network is the trial function over the whole
//! domain; residuals are projected onto element-local Legendre test functions
//! on a domain decomposition and minimized with Adam.

pub mod basis;
pub mod diffengine;
pub mod error;
pub mod experiment;
pub mod loss;
pub mod mesh;
pub mod network;
pub mod optimizer;
pub mod problems;
pub mod quadrature;
pub mod residuals;

pub use error::{Error, Result};
