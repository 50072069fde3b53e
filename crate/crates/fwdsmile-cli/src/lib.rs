//! Library half of the command-line front end: run specifications, the flat
//! key-value config format, CSV emission, the Monte Carlo oracle and the
//! report generators behind each subcommand.

pub mod commands;
pub mod csvio;
pub mod mc;
pub mod runspec;

pub use runspec::{KGrid, RunSpec};
