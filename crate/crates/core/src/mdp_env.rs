//! Episodic deployment environment.
//!
//! Each step either deploys one candidate site (actions `1..=J`) or stops
//! (action 0). The observation stacks three per-cell channels: deployment,
//! residual rate normalised by the donor's fixed rate, and child count
//! normalised by the largest child count the rate budget allows.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::action_filter::{filter_actions, ActionMask, FilterConfig};
use crate::error::{Error, Result};
use crate::greedy::greedy_plan;
use crate::network_state::NetworkState;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Weight on uncovered cells.
    pub alpha: f64,
    /// Weight per deployed node.
    pub beta: f64,
    /// Shortfall penalty below the coverage threshold.
    pub lambda: f64,
    /// Coverage bonus at or above the threshold.
    pub gamma: f64,
    /// Penalty per node beyond `n_ref`.
    pub eta: f64,
    pub coverage_threshold: f64,
    /// Reference node count; `None` means "use the greedy baseline".
    pub n_ref: Option<usize>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 1.0,
            lambda: 50.0,
            gamma: 20.0,
            eta: 5.0,
            coverage_threshold: 1.0,
            n_ref: None,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.alpha, self.beta, self.lambda, self.gamma, self.eta];
        if weights.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(Error::Config("reward weights must be >= 0".into()));
        }
        if !(self.coverage_threshold > 0.0 && self.coverage_threshold <= 1.0) {
            return Err(Error::Config(
                "coverage_threshold must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Coverage shaping term: linear shortfall penalty below the threshold,
/// exponential bonus at or above it.
pub fn coverage_term(coverage: f64, cfg: &RewardConfig) -> f64 {
    if coverage < cfg.coverage_threshold {
        -cfg.lambda * (1.0 - coverage / cfg.coverage_threshold)
    } else {
        cfg.gamma * (coverage - cfg.coverage_threshold).exp()
    }
}

/// Reward from its ingredients; every cell has unit area.
pub fn reward_from_parts(
    uncovered_cells: usize,
    n_nodes: usize,
    coverage: f64,
    cfg: &RewardConfig,
) -> f64 {
    let excess = cfg.n_ref.map_or(0, |n_ref| n_nodes.saturating_sub(n_ref));
    -cfg.alpha * uncovered_cells as f64 - cfg.beta * n_nodes as f64 + coverage_term(coverage, cfg)
        - cfg.eta * excess as f64
}

pub fn reward_of(state: &NetworkState, cfg: &RewardConfig) -> f64 {
    reward_from_parts(
        state.uncovered_cells(),
        state.num_nodes(),
        state.coverage_fraction(),
        cfg,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn encode_state(state: &NetworkState, scenario: &Scenario) -> StateVector {
    let m = state.project_matrices(scenario);
    let cells = scenario.num_cells();
    let rate_scale = scenario.rates.donor_fixed_rate;
    let child_scale = scenario.rates.max_children() as f64;
    let mut v = Vec::with_capacity(3 * cells);
    v.extend(m.deployment.iter().map(|&d| d as f64));
    v.extend(m.residual.iter().map(|&r| (r / rate_scale).clamp(0.0, 1.0)));
    v.extend(
        m.children
            .iter()
            .map(|&c| (c as f64 / child_scale).min(1.0)),
    );
    StateVector(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub action: usize,
    pub reward: f64,
    pub coverage: f64,
    pub n_nodes: usize,
}

pub fn write_trace<W: Write>(mut out: W, records: &[TraceRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: StateVector,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct IabEnv {
    scenario: Arc<Scenario>,
    reward: RewardConfig,
    filter: FilterConfig,
    network: NetworkState,
    mask: ActionMask,
    steps: usize,
    done: bool,
    trace: Vec<TraceRecord>,
}

impl IabEnv {
    /// Builds the environment, fixing `n_ref` from the greedy baseline when
    /// the reward config leaves it open.
    pub fn new(scenario: Arc<Scenario>, mut reward: RewardConfig, filter: FilterConfig) -> Self {
        if reward.n_ref.is_none() {
            let greedy = greedy_plan(&scenario, &filter, reward.coverage_threshold);
            reward.n_ref = Some(greedy.state.num_nodes());
        }
        let network = NetworkState::new(&scenario);
        let mask = filter_actions(&network, &scenario, &filter);
        Self {
            scenario,
            reward,
            filter,
            network,
            mask,
            steps: 0,
            done: false,
            trace: Vec::new(),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn shared_scenario(&self) -> Arc<Scenario> {
        Arc::clone(&self.scenario)
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward
    }

    pub fn filter_config(&self) -> &FilterConfig {
        &self.filter
    }

    pub fn network(&self) -> &NetworkState {
        &self.network
    }

    pub fn valid_actions(&self) -> &ActionMask {
        &self.mask
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn num_actions(&self) -> usize {
        self.scenario.num_actions()
    }

    pub fn state_dim(&self) -> usize {
        3 * self.scenario.num_cells()
    }

    pub fn observe(&self) -> StateVector {
        encode_state(&self.network, &self.scenario)
    }

    /// Back to donors only. The environment has no stochastic elements, so
    /// the seed does not change the initial state.
    pub fn reset(&mut self, _seed: u64) -> StateVector {
        self.network = NetworkState::new(&self.scenario);
        self.mask = filter_actions(&self.network, &self.scenario, &self.filter);
        self.steps = 0;
        self.done = false;
        self.trace.clear();
        self.observe()
    }

    pub fn step(&mut self, action: usize) -> Result<Step> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        if !self.mask.is_valid(action) {
            return Err(Error::InvalidAction { action });
        }
        self.steps += 1;
        if action == 0 {
            self.done = true;
        } else {
            self.network.attach_auto(&self.scenario, action - 1)?;
        }
        let reward = reward_of(&self.network, &self.reward);
        if self.done {
            self.mask = ActionMask::terminal(self.num_actions());
        } else {
            self.mask = filter_actions(&self.network, &self.scenario, &self.filter);
            self.done = self.network.coverage_fraction() >= self.reward.coverage_threshold
                || !self.mask.has_deploy_action()
                || self.steps > self.scenario.num_sites();
        }
        self.trace.push(TraceRecord {
            step: self.steps,
            action,
            reward,
            coverage: self.network.coverage_fraction(),
            n_nodes: self.network.num_nodes(),
        });
        Ok(Step {
            state: self.observe(),
            reward,
            done: self.done,
        })
    }
}
