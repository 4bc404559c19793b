//! Complex-valued transformer layers, a quantum measurement classifier and
//! a statevector simulator that runs the same classifier as a circuit.

pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod ctensor;
pub mod data;
pub mod error;
pub mod gradsuite;
pub mod layers;
pub mod models;
pub mod optim;
pub mod qsim;
pub mod train;

pub use ctensor::{CTensor, Complex};
pub use error::{Error, Result};
