//! Federated knowledge-graph embedding lab.
pub mod accountant;
pub mod attacks;
pub mod dp;
pub mod error;
pub mod eval;
pub mod fed;
pub mod harness;
pub mod kg;
pub mod kge;
pub mod matrix;
pub mod optim;
pub mod rng;

pub use error::{Error, Result};
pub use matrix::Matrix;
