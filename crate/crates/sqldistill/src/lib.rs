pub mod commands;
pub mod distiller;
pub mod error;
pub mod evaluator;
pub mod execution;
pub mod mutation;
pub mod random;
pub mod sampler;
pub mod schema;

pub use error::{Error, Result};
