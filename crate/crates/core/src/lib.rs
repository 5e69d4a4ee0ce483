pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod env;
pub mod error;
pub mod guided;
pub mod manifest;
pub mod metrics;
pub mod pipeline;
pub mod plots;
pub mod presets;
pub mod reference;
pub mod sac;
pub mod transformer;
pub mod vehicle;

pub use error::{Error, Result};
