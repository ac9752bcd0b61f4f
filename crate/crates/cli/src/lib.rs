//! Command implementations behind the `rpl` binary. Each command returns the
//! text it reports so it can be driven from tests.

pub mod commands;
pub mod config;

pub use config::RunConfig;
