//! Study configuration, FEM cache, run records and the command
//! implementations behind the `vscl` binary.

pub mod cache;
pub mod commands;
pub mod config;
pub mod error;
pub mod record;
