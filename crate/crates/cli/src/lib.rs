//! Command-line front end for `gvn-core`.

mod args;
pub mod commands;
pub mod config;

pub use args::*;
