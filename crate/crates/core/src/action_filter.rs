//! Rule-based action elimination.
//!
//! Action 0 terminates the episode and is always valid. Action `s + 1`
//! deploys candidate site `s`; it survives the filter only if the site is
//! free, has at least one feasible backhaul parent, and keeps the minimum
//! separation from every deployed node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network_state::NetworkState;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub min_distance_m: f64,
    /// Reject a site when it is *farther* than `min_distance_m` from any
    /// deployed node instead of closer. Kept for audits; not a sensible
    /// planning rule.
    pub literal_distance_rule: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_distance_m: 100.0,
            literal_distance_rule: false,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_distance_m.is_nan() || self.min_distance_m < 0.0 {
            return Err(Error::Config("min_distance_m must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionMask {
    valid: Vec<bool>,
}

impl ActionMask {
    pub fn from_vec(mut valid: Vec<bool>) -> Self {
        if let Some(first) = valid.first_mut() {
            *first = true;
        }
        Self { valid }
    }

    /// Only the terminating action.
    pub fn terminal(num_actions: usize) -> Self {
        Self::from_vec(vec![false; num_actions])
    }

    pub fn len(&self) -> usize {
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }

    pub fn is_valid(&self, action: usize) -> bool {
        self.valid.get(action).copied().unwrap_or(false)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_actions(&self) -> impl Iterator<Item = usize> + '_ {
        self.valid
            .iter()
            .enumerate()
            .filter(|(_, v)| **v)
            .map(|(a, _)| a)
    }

    pub fn count_valid(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn has_deploy_action(&self) -> bool {
        self.valid.iter().skip(1).any(|v| *v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    AlreadyDeployed,
    NoFeasibleParent,
    TooClose,
}

/// Why deploying `site` is filtered out, if it is.
pub fn classify_site(
    state: &NetworkState,
    scenario: &Scenario,
    cfg: &FilterConfig,
    site: usize,
) -> Option<Rejection> {
    if state.is_deployed(site) {
        return Some(Rejection::AlreadyDeployed);
    }
    if !state.has_feasible_parent(scenario, site) {
        return Some(Rejection::NoFeasibleParent);
    }
    let here = scenario.site_position(site);
    let violates = state.deployed().iter().any(|&other| {
        let d = here.distance(scenario.site_position(other));
        if cfg.literal_distance_rule {
            d > cfg.min_distance_m
        } else {
            d < cfg.min_distance_m
        }
    });
    violates.then_some(Rejection::TooClose)
}

pub fn filter_actions(state: &NetworkState, scenario: &Scenario, cfg: &FilterConfig) -> ActionMask {
    let mut valid = Vec::with_capacity(scenario.num_actions());
    valid.push(true);
    valid.extend(
        (0..scenario.num_sites()).map(|s| classify_site(state, scenario, cfg, s).is_none()),
    );
    ActionMask { valid }
}

/// Highest-valued valid action; ties go to the lowest index.
pub fn masked_argmax(q_values: &[f64], mask: &ActionMask) -> usize {
    debug_assert_eq!(q_values.len(), mask.len());
    let mut best = 0;
    for a in 1..q_values.len() {
        if mask.is_valid(a) && (q_values[a] > q_values[best] || q_values[best].is_nan()) {
            best = a;
        }
    }
    best
}
