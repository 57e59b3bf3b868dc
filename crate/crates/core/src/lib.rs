pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod kernel;
pub mod limits;
pub mod mercer;
pub mod quadrature;
pub mod report;
pub mod rkhs;
pub mod rng;
pub mod specfun;

pub use error::{Error, Result};
