//! Independent constraint checker.
//!
//! Recomputes everything from a parent assignment alone, using the link
//! predicates directly rather than the scenario's precomputed tables or the
//! incremental bookkeeping in [`NetworkState`].

use std::fmt;

use crate::link_model;
use crate::network_state::{DeploymentPlan, NetworkState, Provider, RATE_EPS};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    UnknownSite(usize),
    DuplicateSite(usize),
    UnknownDonor {
        site: usize,
        donor: usize,
    },
    ParentNotDeployed {
        site: usize,
        parent: usize,
    },
    Cycle {
        site: usize,
    },
    Unreachable {
        site: usize,
    },
    LinkCapacity {
        site: usize,
        feed: f64,
        capacity: f64,
    },
    DonorBudget {
        donor: usize,
        slack: f64,
    },
    NodeBudget {
        site: usize,
        slack: f64,
    },
    FeedMismatch {
        site: usize,
        stated: f64,
        expected: f64,
    },
    ResidualMismatch {
        provider: Provider,
        cached: f64,
        expected: f64,
    },
    DepthMismatch {
        site: usize,
        stated: usize,
        expected: usize,
    },
    Coverage {
        fraction: f64,
        threshold: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Feeds and residuals derived from a forest from scratch.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSnapshot {
    pub feed: Vec<f64>,
    pub donor_child_feed: Vec<f64>,
    pub donor_residual: Vec<f64>,
    pub node_residual: Vec<f64>,
    pub depth: Vec<usize>,
}

/// Structural checks: known ids, gating, acyclicity, reachability.
fn check_structure(scenario: &Scenario, parents: &[Option<Provider>]) -> Vec<Violation> {
    let mut out = Vec::new();
    let j = scenario.num_sites();
    for (site, parent) in parents.iter().enumerate() {
        let Some(parent) = *parent else { continue };
        if site >= j {
            out.push(Violation::UnknownSite(site));
            continue;
        }
        match parent {
            Provider::Donor(d) if d >= scenario.num_donors() => {
                out.push(Violation::UnknownDonor { site, donor: d });
                continue;
            }
            Provider::Node(n) if n >= j || parents.get(n).copied().flatten().is_none() => {
                out.push(Violation::ParentNotDeployed { site, parent: n });
                continue;
            }
            _ => {}
        }
        let from = NetworkState::provider_position(scenario, parent);
        if !link_model::backhaul_reachable(from, scenario.site_position(site), &scenario.radio) {
            out.push(Violation::Unreachable { site });
        }
        // walk up; more steps than nodes means a cycle
        let mut cur = parent;
        let mut steps = 0;
        while let Provider::Node(n) = cur {
            steps += 1;
            if steps > parents.len() || n == site {
                out.push(Violation::Cycle { site });
                break;
            }
            match parents.get(n).copied().flatten() {
                Some(p) => cur = p,
                None => break,
            }
        }
    }
    out
}

/// Equality-case feeds and residuals for a structurally valid forest.
pub fn recompute_rates(scenario: &Scenario, parents: &[Option<Provider>]) -> RateSnapshot {
    let rates = &scenario.rates;
    let j = parents.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); j];
    let mut donor_children: Vec<Vec<usize>> = vec![Vec::new(); scenario.num_donors()];
    for (site, p) in parents.iter().enumerate() {
        match p {
            Some(Provider::Node(n)) => children[*n].push(site),
            Some(Provider::Donor(d)) => donor_children[*d].push(site),
            None => {}
        }
    }

    fn feed_of(
        site: usize,
        children: &[Vec<usize>],
        memo: &mut [Option<f64>],
        access: f64,
        overhead: f64,
    ) -> f64 {
        if let Some(f) = memo[site] {
            return f;
        }
        let below: f64 = children[site]
            .iter()
            .map(|&c| feed_of(c, children, memo, access, overhead))
            .sum();
        let f = overhead * (access + below);
        memo[site] = Some(f);
        f
    }

    let mut memo = vec![None; j];
    let mut feed = vec![0.0; j];
    for site in 0..j {
        if parents[site].is_some() {
            feed[site] = feed_of(
                site,
                &children,
                &mut memo,
                rates.node_access_rate,
                rates.overhead,
            );
        }
    }
    let donor_child_feed: Vec<f64> = donor_children
        .iter()
        .map(|cs| cs.iter().map(|&c| feed[c]).sum())
        .collect();
    let donor_residual: Vec<f64> = donor_child_feed
        .iter()
        .map(|s| rates.donor_budget() - s)
        .collect();

    let mut node_residual = vec![0.0; j];
    let mut depth = vec![0; j];
    let mut stack: Vec<(usize, f64, usize)> = Vec::new();
    for (d, cs) in donor_children.iter().enumerate() {
        for &c in cs {
            stack.push((c, donor_residual[d], 1));
        }
    }
    while let Some((site, upstream, level)) = stack.pop() {
        let from = NetworkState::provider_position(scenario, parents[site].unwrap());
        let cap =
            link_model::backhaul_capacity_gbps(from, scenario.site_position(site), &scenario.radio);
        let r = upstream.min(cap - feed[site]) / rates.overhead;
        node_residual[site] = r;
        depth[site] = level;
        for &c in &children[site] {
            stack.push((c, r, level + 1));
        }
    }
    RateSnapshot {
        feed,
        donor_child_feed,
        donor_residual,
        node_residual,
        depth,
    }
}

/// Budget constraints evaluated on the given feeds.
fn check_budgets(
    scenario: &Scenario,
    parents: &[Option<Provider>],
    feed: &[f64],
) -> Vec<Violation> {
    let rates = &scenario.rates;
    let mut out = Vec::new();
    let mut donor_sum = vec![0.0; scenario.num_donors()];
    let mut node_sum = vec![0.0; parents.len()];
    for (site, p) in parents.iter().enumerate() {
        match p {
            Some(Provider::Donor(d)) => donor_sum[*d] += feed[site],
            Some(Provider::Node(n)) => node_sum[*n] += feed[site],
            None => {}
        }
    }
    for (d, sum) in donor_sum.iter().enumerate() {
        let slack = rates.donor_fixed_rate - rates.overhead * (rates.donor_access_rate + sum);
        if slack < -RATE_EPS {
            out.push(Violation::DonorBudget { donor: d, slack });
        }
    }
    for (site, p) in parents.iter().enumerate() {
        let Some(parent) = p else { continue };
        let slack = feed[site] - rates.overhead * (rates.node_access_rate + node_sum[site]);
        if slack < -RATE_EPS {
            out.push(Violation::NodeBudget { site, slack });
        }
        let from = NetworkState::provider_position(scenario, *parent);
        let capacity =
            link_model::backhaul_capacity_gbps(from, scenario.site_position(site), &scenario.radio);
        if feed[site] > capacity + RATE_EPS {
            out.push(Violation::LinkCapacity {
                site,
                feed: feed[site],
                capacity,
            });
        }
    }
    out
}

/// Fraction of cells covered by donors and the deployed sites.
pub fn coverage_from_scratch(
    scenario: &Scenario,
    deployed: impl Iterator<Item = usize> + Clone,
) -> f64 {
    let radio = &scenario.radio;
    let cells = scenario.map.cells();
    if cells.is_empty() {
        return 0.0;
    }
    let covered = cells
        .iter()
        .filter(|&&c| {
            scenario
                .donors
                .positions
                .iter()
                .any(|&d| link_model::covers(d, c, radio))
                || deployed
                    .clone()
                    .any(|s| link_model::covers(scenario.site_position(s), c, radio))
        })
        .count();
    covered as f64 / cells.len() as f64
}

/// Full check of a live state, including its cached bookkeeping.
pub fn check_state(scenario: &Scenario, state: &NetworkState) -> Vec<Violation> {
    let parents = state.parents();
    let mut out = check_structure(scenario, parents);
    if !out.is_empty() {
        return out;
    }
    let snap = recompute_rates(scenario, parents);
    out.extend(check_budgets(scenario, parents, &snap.feed));
    for &site in state.deployed() {
        let stated = state.feed_rate(site);
        if (stated - snap.feed[site]).abs() > RATE_EPS {
            out.push(Violation::FeedMismatch {
                site,
                stated,
                expected: snap.feed[site],
            });
        }
        let cached = state.residual(Provider::Node(site));
        if (cached - snap.node_residual[site]).abs() > RATE_EPS {
            out.push(Violation::ResidualMismatch {
                provider: Provider::Node(site),
                cached,
                expected: snap.node_residual[site],
            });
        }
        if state.hop_depth(site) != snap.depth[site] {
            out.push(Violation::DepthMismatch {
                site,
                stated: state.hop_depth(site),
                expected: snap.depth[site],
            });
        }
    }
    for d in 0..scenario.num_donors() {
        let cached = state.residual(Provider::Donor(d));
        if (cached - snap.donor_residual[d]).abs() > RATE_EPS {
            out.push(Violation::ResidualMismatch {
                provider: Provider::Donor(d),
                cached,
                expected: snap.donor_residual[d],
            });
        }
    }
    let fresh = coverage_from_scratch(scenario, state.deployed().iter().copied());
    if (fresh - state.coverage_fraction()).abs() > 1e-12 {
        out.push(Violation::Coverage {
            fraction: state.coverage_fraction(),
            threshold: fresh,
        });
    }
    out
}

/// Checks an exported plan: forest structure, reachability, the stated
/// feeds against every budget, hop depths and coverage.
pub fn check_plan(
    scenario: &Scenario,
    plan: &DeploymentPlan,
    coverage_threshold: f64,
) -> Vec<Violation> {
    let j = scenario.num_sites();
    let mut out = Vec::new();
    let mut parents = vec![None; j];
    let mut stated_feed = vec![0.0; j];
    for node in &plan.nodes {
        if node.site_index >= j {
            out.push(Violation::UnknownSite(node.site_index));
            continue;
        }
        if parents[node.site_index].is_some() {
            out.push(Violation::DuplicateSite(node.site_index));
            continue;
        }
        parents[node.site_index] = Some(node.parent);
        stated_feed[node.site_index] = node.feed_rate_gbps;
    }
    if !out.is_empty() {
        return out;
    }
    out.extend(check_structure(scenario, &parents));
    if !out.is_empty() {
        return out;
    }
    out.extend(check_budgets(scenario, &parents, &stated_feed));
    let snap = recompute_rates(scenario, &parents);
    for node in &plan.nodes {
        if node.hop_depth != snap.depth[node.site_index] {
            out.push(Violation::DepthMismatch {
                site: node.site_index,
                stated: node.hop_depth,
                expected: snap.depth[node.site_index],
            });
        }
    }
    let fraction = coverage_from_scratch(scenario, plan.nodes.iter().map(|n| n.site_index));
    if fraction + 1e-12 < coverage_threshold {
        out.push(Violation::Coverage {
            fraction,
            threshold: coverage_threshold,
        });
    }
    out
}
