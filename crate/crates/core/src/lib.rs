pub mod domain;
pub mod error;
pub mod harness;
pub mod inversion;
pub mod io;
pub mod l1fdm;
pub mod linalg;
pub mod mlf;
pub mod neural;
pub mod quad;
pub mod spectral;

pub use error::{Error, Result};
