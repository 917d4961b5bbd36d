pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod spectrum;
pub mod steady;

pub use error::{Error, Result};
pub use model::{FieldState, SystemParams};
