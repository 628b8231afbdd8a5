//! Planning multi-hop integrated access and backhaul (IAB) deployments.
//!
//! A [`scenario::Scenario`] fixes the map, donors and candidate sites; a
//! [`network_state::NetworkState`] tracks the backhaul forest and its rate
//! budgets; [`mdp_env::IabEnv`] wraps both as a masked MDP for the agents
//! in [`agents`], and [`greedy`] provides the baseline and an exact
//! optimum for tiny instances.

pub mod action_filter;
pub mod agents;
pub mod checker;
pub mod config;
pub mod error;
pub mod exec;
pub mod greedy;
pub mod harness;
pub mod link_model;
pub mod mdp_env;
pub mod metrics;
pub mod network_state;
pub mod nn;
pub mod scenario;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
