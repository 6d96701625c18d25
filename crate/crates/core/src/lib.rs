pub mod conditions;
pub mod control;
pub mod error;
pub mod feasibility;
pub mod linalg;
pub mod lure;
pub mod param;
pub mod sample;
pub mod sim;
pub mod structure;

pub use error::{Error, Result};
