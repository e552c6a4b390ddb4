pub mod bench;
pub mod cdiff;
pub mod checkpoint;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod laurent;
pub mod nets;
pub mod representations;
pub mod train;

pub use error::{Error, Result};
