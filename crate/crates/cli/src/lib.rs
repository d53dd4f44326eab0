//! Command-line and HTTP entry points.

pub mod commands;
pub mod serve;
pub mod source;
pub mod terminal;
