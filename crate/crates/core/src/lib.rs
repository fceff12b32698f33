//! Natural actor-critic toolkit: on- and off-policy deep natural actor-critic
//! agents, the environments they train on, and exact tabular oracles for
//! every quantity the algorithms estimate.

pub mod agent;
pub mod critic;
pub mod env;
pub mod error;
pub mod harness;
pub mod net;
pub mod oracle;
pub mod policy;
pub mod ratio;
pub mod rng;
pub mod schedule;

pub use error::{Error, Result};
