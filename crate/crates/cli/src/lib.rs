//! Configuration-driven experiment harness for private inverse-temperature
//! estimation. Each study reads an [`ExperimentConfig`] and produces CSV
//! rows; the `prising` binary wires them to subcommands.

pub mod audits;
pub mod config;
pub mod error;
pub mod real_data;
pub mod rows;
pub mod simulate;

pub use audits::{format_report, run_audits};
pub use config::{ExperimentConfig, Study};
pub use error::{CliError, Result};
pub use real_data::{run_real_data, RealDataOutput};
pub use rows::{summarise, write_csv, write_csv_file, AuditRow, RealDataRow, ResultRow, SummaryRow};
pub use simulate::run_simulation;
