//! Coverage-greedy baseline and an exhaustive optimum for tiny instances.

use crate::action_filter::{filter_actions, FilterConfig};
use crate::error::{Error, Result};
use crate::network_state::{NetworkState, Provider};
use crate::scenario::Scenario;

/// Hard ceiling on exhaustive search.
pub const MAX_EXHAUSTIVE_SITES: usize = 12;

/// Attach orders tried per subset before declaring it infeasible.
pub const ORDER_BUDGET: usize = 50_000;

#[derive(Debug, Clone)]
pub struct GreedyOutcome {
    pub state: NetworkState,
    /// False when the threshold could not be reached.
    pub complete: bool,
}

/// Repeatedly deploys the filtered site with the largest coverage gain.
/// Ties prefer fewer hops to a donor, then the lower site index.
pub fn greedy_plan(
    scenario: &Scenario,
    filter: &FilterConfig,
    coverage_threshold: f64,
) -> GreedyOutcome {
    let mut state = NetworkState::new(scenario);
    while state.coverage_fraction() < coverage_threshold {
        let mask = filter_actions(&state, scenario, filter);
        let mut best: Option<(usize, usize, usize)> = None; // (site, gain, hops)
        for action in mask.valid_actions().filter(|&a| a > 0) {
            let site = action - 1;
            let gain = state.coverage_gain(scenario, site);
            if gain == 0 {
                continue;
            }
            let Some(parent) = state.select_parent(scenario, site) else {
                continue;
            };
            let hops = match parent {
                Provider::Donor(_) => 1,
                Provider::Node(j) => state.hop_depth(j) + 1,
            };
            let better = match best {
                None => true,
                Some((_, g, h)) => gain > g || (gain == g && hops < h),
            };
            if better {
                best = Some((site, gain, hops));
            }
        }
        match best {
            Some((site, _, _)) => {
                state
                    .attach_auto(scenario, site)
                    .expect("filtered site is attachable");
            }
            None => break,
        }
    }
    let complete = state.coverage_fraction() >= coverage_threshold;
    GreedyOutcome { state, complete }
}

#[derive(Debug, Clone)]
pub enum Optimum {
    Feasible(Box<NetworkState>),
    Infeasible,
}

impl Optimum {
    pub fn node_count(&self) -> Option<usize> {
        match self {
            Self::Feasible(s) => Some(s.num_nodes()),
            Self::Infeasible => None,
        }
    }
}

/// Smallest deployment reaching the coverage threshold with a feasible
/// backhaul forest. Subsets are enumerated by size; each covering subset is
/// wired up by trying attach orders (depth first, parent chosen by the
/// standard policy) until one succeeds or the order budget runs out. No
/// minimum-separation rule applies here.
pub fn brute_force_optimum(
    scenario: &Scenario,
    coverage_threshold: f64,
    max_sites: usize,
) -> Result<Optimum> {
    let j = scenario.num_sites();
    let limit = max_sites.min(MAX_EXHAUSTIVE_SITES);
    if j > limit {
        return Err(Error::TooManySites { sites: j, limit });
    }
    let cells = scenario.num_cells();
    let mut donor_covered = vec![false; cells];
    for d in 0..scenario.num_donors() {
        for &k in scenario.donor_cover(d) {
            donor_covered[k] = true;
        }
    }
    let needed = (coverage_threshold * cells as f64 - 1e-9).ceil().max(0.0) as usize;

    for size in 0..=j {
        let mut found = None;
        for_each_subset(j, size, &mut |subset| {
            let mut covered = donor_covered.clone();
            for &s in subset {
                for &k in scenario.site_cover(s) {
                    covered[k] = true;
                }
            }
            if covered.iter().filter(|c| **c).count() < needed {
                return false;
            }
            if let Some(state) = wire_subset(scenario, subset) {
                found = Some(state);
                return true;
            }
            false
        });
        if let Some(state) = found {
            return Ok(Optimum::Feasible(Box::new(state)));
        }
    }
    Ok(Optimum::Infeasible)
}

/// Calls `visit` on each `size`-subset of `0..n` in lexicographic order
/// until it returns true.
fn for_each_subset(n: usize, size: usize, visit: &mut dyn FnMut(&[usize]) -> bool) {
    if size > n {
        return;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        if visit(&idx) {
            return;
        }
        let Some(i) = (0..size).rev().find(|&i| idx[i] < n - size + i) else {
            return;
        };
        idx[i] += 1;
        for k in i + 1..size {
            idx[k] = idx[k - 1] + 1;
        }
    }
}

fn wire_subset(scenario: &Scenario, subset: &[usize]) -> Option<NetworkState> {
    // heuristic order first: nearest to anything already connected
    let mut members: Vec<usize> = subset.to_vec();
    members.sort_by(|&a, &b| {
        let da = nearest_donor(scenario, a);
        let db = nearest_donor(scenario, b);
        da.total_cmp(&db).then(a.cmp(&b))
    });
    let mut budget = ORDER_BUDGET;
    let mut state = NetworkState::new(scenario);
    let mut used = vec![false; members.len()];
    if dfs_orders(scenario, &members, &mut used, &mut state, &mut budget) {
        Some(state)
    } else {
        None
    }
}

fn nearest_donor(scenario: &Scenario, site: usize) -> f64 {
    let p = scenario.site_position(site);
    scenario
        .donors
        .positions
        .iter()
        .map(|d| d.distance(p))
        .fold(f64::INFINITY, f64::min)
}

fn dfs_orders(
    scenario: &Scenario,
    members: &[usize],
    used: &mut [bool],
    state: &mut NetworkState,
    budget: &mut usize,
) -> bool {
    if state.num_nodes() == members.len() {
        return true;
    }
    if *budget == 0 {
        return false;
    }
    *budget -= 1;
    // nearest-to-connected first
    let mut candidates: Vec<(f64, usize)> = (0..members.len())
        .filter(|&i| !used[i])
        .filter_map(|i| {
            let site = members[i];
            let parent = state.select_parent(scenario, site)?;
            let d = NetworkState::provider_position(scenario, parent)
                .distance(scenario.site_position(site));
            Some((d, i))
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (_, i) in candidates {
        let saved = state.clone();
        state
            .attach_auto(scenario, members[i])
            .expect("parent was feasible");
        used[i] = true;
        if dfs_orders(scenario, members, used, state, budget) {
            return true;
        }
        used[i] = false;
        *state = saved;
        if *budget == 0 {
            return false;
        }
    }
    false
}
