//! Operator surface for compass experiments: survey runs persisted as
//! hashed response logs, scoring, statistical reports with SVG plots, and
//! the steering pipeline on the toy transformer.

pub mod analyze;
pub mod config;
pub mod error;
pub mod run;
pub mod rundir;
pub mod score;
pub mod steer;
pub mod svg;

pub use error::{CliError, Result};
