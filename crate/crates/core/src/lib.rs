pub mod cdn;
pub mod error;
pub mod fault;
pub mod harness;
pub mod http;
pub mod model;
pub mod pod;
pub mod provider;
pub mod trace;
pub mod workflow;

pub use error::{Error, ErrorBody, ErrorCode, Result};
