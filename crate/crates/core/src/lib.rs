pub mod banding;
pub mod error;
pub mod fairness;
pub mod ingest;
pub mod prediction;
pub mod profiles;
pub mod ratio;
pub mod report;
pub mod zoo;

pub use error::{Error, Result};
