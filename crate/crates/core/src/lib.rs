pub mod algorithm;
pub mod dilation;
pub mod error;
pub mod experiment;
pub mod gpr;
pub mod hybrid;

pub use error::{Error, Result};
