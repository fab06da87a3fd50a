//! Library half of the `coughmap` CLI: configuration, pipeline
//! orchestration, artifact formats, fixture generation and report rendering.

pub mod config;
pub mod csvio;
pub mod fixture;
pub mod pipeline;
pub mod report;

use coughmap_core::Error;

/// Process exit code for an error: 2 config/argument, 3 data, 4 format.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Format(_) | Error::Unsupported(_) => 4,
        Error::Argument(_) | Error::Validation(_) => 2,
        Error::Degenerate(_) | Error::Data(_) | Error::Io(_) => 3,
    }
}
