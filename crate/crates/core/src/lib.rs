pub mod appendix;
pub mod equilibrium;
pub mod io;
pub mod jack;
pub mod limit_laws;
pub mod error;
pub mod numerics;
pub mod phase;
pub mod potential;
pub mod sampler;

pub use error::{Error, Result};
