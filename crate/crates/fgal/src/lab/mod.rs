//! Fixtures, test problems, configuration files and the command-line front end.

pub mod cli;
pub mod config;
pub mod facts;
pub mod fixtures;
pub mod problems;

pub use config::{parse_config, ProblemConfig};
pub use facts::{Fact, FactOrigin, Params};
pub use fixtures::{fixture, FixtureOutput, FIXTURES};
