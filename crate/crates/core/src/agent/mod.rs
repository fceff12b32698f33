//! Deep AC, Deep NAC and their off-policy counterparts, with optional
//! eligibility traces, on two timescales.

mod config;
mod train;

pub use config::{default_lambda, parse_settings, AgentConfig, Algorithm, Behavior, RatioSource};
pub use train::{ema_update, evaluate, run_episode, train, train_with, Agent, EpisodeRecord, TrainResult, DIVERGENCE_NORM};
