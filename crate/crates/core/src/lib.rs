pub mod attitude;
pub mod controller;
pub mod envelope;
pub mod error;
pub mod field;
pub mod integrator;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
