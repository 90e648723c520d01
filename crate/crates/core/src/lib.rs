pub mod atoms;
pub mod basis;
mod dd;
pub mod decomposition;
pub mod error;
pub mod io;
pub mod linalg;
pub mod measures;
pub mod moments;
pub mod multi_index;
pub mod report;
pub mod scenarios;
pub mod solver;

pub use error::{Error, Result};
