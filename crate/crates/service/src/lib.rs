//! Command-line tool and HTTP service over the slicebench engine.

pub mod build;
pub mod cli;
pub mod error;
pub mod evaluate;
pub mod jobs;
pub mod predictions;
pub mod remote;
pub mod server;
pub mod workspace;

pub use error::{Result, ServiceError};
pub use workspace::Workspace;
