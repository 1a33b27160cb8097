pub mod error;
pub mod geometry;
pub mod material;
pub mod scenario;
pub mod so3;
pub mod solver;
pub mod splines;

pub use error::{Error, Result};
