pub mod cli;
pub mod dynamics;
pub mod error;
pub mod flow;
pub mod manifolds;
pub mod melnikov;
pub mod orbits;

mod numerics;

pub use error::{Error, Result};
