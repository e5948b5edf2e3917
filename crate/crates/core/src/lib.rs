pub mod cli;
pub mod dynamics;
pub mod entanglement;
pub mod error;
pub mod hamiltonians;
pub mod hilbert;
pub mod sdp;
pub mod spectrum;

pub use error::{Error, Result};
