pub mod basis;
pub mod binary;
pub mod cli;
pub mod detect;
pub mod error;
pub mod eval;
pub mod fit;
pub mod init;
pub mod io;
pub mod model;
pub mod sim;
pub mod tensor;
pub mod zip;

pub use error::{Result, ZitsError};
