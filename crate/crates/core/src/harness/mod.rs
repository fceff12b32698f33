//! Experiment plumbing: CSV results, manifests, comparisons, and the CLI.

pub mod cli;
pub mod compare;
pub mod records;

pub use cli::{exit_code, run};
pub use records::{parse_records, read_records, records_to_csv, RunManifest, EPISODE_HEADER};
