//! Configuration, file formats and subcommands for the `afm` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod verify;
