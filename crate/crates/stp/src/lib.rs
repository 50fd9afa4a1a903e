//! File formats, pipelines and the command-line front end for space-time
//! POD forecasting. The numerical core lives in [`stp_core`].

pub mod cli;
pub mod io;
pub mod pipeline;

pub use stp_core;
