pub mod backbone;
pub mod error;
pub mod harness;
pub mod io;
pub mod losses;
pub mod masking;
pub mod metrics;
pub mod networks;
pub mod params;
pub mod tape;
pub mod tensor;
pub mod trainer;
pub mod types;

pub use error::{Error, Result};
