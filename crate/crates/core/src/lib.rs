//! Patch-based recurrent land-cover classification for multi-temporal,
//! multi-spectral imagery, with its comparison baselines and map accuracy
//! assessment.

pub mod assessment;
pub mod baseline;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod fsio;
pub mod keyvalue;
pub mod math;
pub mod optim;
pub mod params;
pub mod pipeline;
pub mod raster;
pub mod recurrent;
pub mod reference_tables;
pub mod sampling;
pub mod synthetic;

pub use error::{Error, Result};
