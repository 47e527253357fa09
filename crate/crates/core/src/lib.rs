pub mod acda;
pub mod autodiff;
pub mod data;
pub mod error;
pub mod experiment;
pub mod nets;
pub mod optim;
pub mod transport;

pub use error::{Error, Result};
