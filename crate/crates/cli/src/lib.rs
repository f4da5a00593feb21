//! Command-line front end: layered configuration, campaign execution and
//! JSON/CSV reports.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use std::io::Write;

pub use args::{Cli, Command};
pub use config::{parse_config, CampaignConfig};
pub use error::CliError;

/// Resolve the configuration for `cli` and run it, writing console output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let flags = cli.command.flags();
    let resolved = parse_config(cli.command.name(), flags)?;
    match flags.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::config(format!("cannot start {n} threads: {e}")))?;
            let mut buffer = Vec::new();
            let outcome = pool.install(|| commands::run_command(&resolved, &mut buffer));
            out.write_all(&buffer)?;
            outcome
        }
        None => commands::run_command(&resolved, out),
    }
}
