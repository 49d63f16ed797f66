//! Configuration, the example registry, and run plumbing behind the CLI.

pub mod config;
pub mod output;
pub mod registry;
pub mod run;

pub use config::{load_config, ConfigError, RunConfig};
pub use registry::{find, registry, ExampleRecord};
pub use run::{check, solve, Job, RunError, RunOutcome};
