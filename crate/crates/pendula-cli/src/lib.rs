//! Library surface of the command-line front end: configuration parsing,
//! dispatch and manifest writing, kept separate from `main` so the
//! integration tests can drive the full pipeline in-process.

pub mod config;
pub mod dispatch;
pub mod manifest;

pub use config::{parse_config, serialize_config, Config, ConfigError};
pub use dispatch::{dispatch, resolve_drive, DispatchError, Subcommand};
pub use manifest::Manifest;
