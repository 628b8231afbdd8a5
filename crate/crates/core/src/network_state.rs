//! Deployed topology: a backhaul forest rooted at donors with multi-hop
//! rate accounting.
//!
//! Every deployed node receives exactly the feed it needs,
//! `overhead * (access + sum of child feeds)`, so a node never holds spare
//! rate of its own. What it can still hand out is bounded by the slack of
//! its donor and, when link capacities are enabled, by the links on its
//! path; each hop on the way up inflates a request by the overhead factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link_model;
use crate::scenario::{Point, Scenario};

/// Absolute tolerance for rate comparisons, Gbps.
pub const RATE_EPS: f64 = 1e-9;

/// Something that can serve as a backhaul parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    Donor(usize),
    Node(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    deployed: Vec<bool>,
    order: Vec<usize>,
    parent: Vec<Option<Provider>>,
    root: Vec<usize>,
    depth: Vec<usize>,
    feed: Vec<f64>,
    link_cap: Vec<f64>,
    node_child_feed: Vec<f64>,
    node_children: Vec<usize>,
    node_residual: Vec<f64>,
    donor_child_feed: Vec<f64>,
    donor_children: Vec<usize>,
    donor_residual: Vec<f64>,
    cover_count: Vec<u32>,
    covered: usize,
}

impl NetworkState {
    /// Donors only.
    pub fn new(scenario: &Scenario) -> Self {
        let j = scenario.num_sites();
        let i = scenario.num_donors();
        let mut cover_count = vec![0u32; scenario.num_cells()];
        for d in 0..i {
            for &k in scenario.donor_cover(d) {
                cover_count[k] += 1;
            }
        }
        let covered = cover_count.iter().filter(|&&c| c > 0).count();
        Self {
            deployed: vec![false; j],
            order: Vec::new(),
            parent: vec![None; j],
            root: vec![usize::MAX; j],
            depth: vec![0; j],
            feed: vec![0.0; j],
            link_cap: vec![f64::INFINITY; j],
            node_child_feed: vec![0.0; j],
            node_children: vec![0; j],
            node_residual: vec![0.0; j],
            donor_child_feed: vec![0.0; i],
            donor_children: vec![0; i],
            donor_residual: vec![scenario.rates.donor_budget(); i],
            cover_count,
            covered,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.order.len()
    }

    pub fn is_deployed(&self, site: usize) -> bool {
        self.deployed[site]
    }

    /// Deployed sites in deployment order; parents always precede children.
    pub fn deployed(&self) -> &[usize] {
        &self.order
    }

    pub fn parent(&self, site: usize) -> Option<Provider> {
        self.parent[site]
    }

    pub fn parents(&self) -> &[Option<Provider>] {
        &self.parent
    }

    pub fn feed_rate(&self, site: usize) -> f64 {
        self.feed[site]
    }

    pub fn hop_depth(&self, site: usize) -> usize {
        self.depth[site]
    }

    pub fn root_donor(&self, site: usize) -> Option<usize> {
        self.deployed[site].then_some(self.root[site])
    }

    /// Extra child feed the provider can still distribute (cached).
    pub fn residual(&self, provider: Provider) -> f64 {
        match provider {
            Provider::Donor(i) => self.donor_residual[i],
            Provider::Node(j) => self.node_residual[j],
        }
    }

    pub fn children_count(&self, provider: Provider) -> usize {
        match provider {
            Provider::Donor(i) => self.donor_children[i],
            Provider::Node(j) => self.node_children[j],
        }
    }

    /// Sum of child feeds drawn from the provider.
    pub fn child_feed(&self, provider: Provider) -> f64 {
        match provider {
            Provider::Donor(i) => self.donor_child_feed[i],
            Provider::Node(j) => self.node_child_feed[j],
        }
    }

    pub fn total_donor_residual(&self) -> f64 {
        self.donor_residual.iter().sum()
    }

    pub fn covered_cells(&self) -> usize {
        self.covered
    }

    pub fn uncovered_cells(&self) -> usize {
        self.cover_count.len() - self.covered
    }

    pub fn is_cell_covered(&self, cell: usize) -> bool {
        self.cover_count[cell] > 0
    }

    pub fn coverage_fraction(&self) -> f64 {
        if self.cover_count.is_empty() {
            return 0.0;
        }
        self.covered as f64 / self.cover_count.len() as f64
    }

    /// Cells `site` would cover that nothing covers yet.
    pub fn coverage_gain(&self, scenario: &Scenario, site: usize) -> usize {
        scenario
            .site_cover(site)
            .iter()
            .filter(|&&k| self.cover_count[k] == 0)
            .count()
    }

    /// Minimal feed for `site` given its current children.
    pub fn required_feed(&self, scenario: &Scenario, site: usize) -> f64 {
        let rates = &scenario.rates;
        rates.overhead * (rates.node_access_rate + self.node_child_feed[site])
    }

    pub fn provider_position(scenario: &Scenario, provider: Provider) -> Point {
        match provider {
            Provider::Donor(i) => scenario.donor_position(i),
            Provider::Node(j) => scenario.site_position(j),
        }
    }

    fn check_provider(&self, scenario: &Scenario, provider: Provider) -> Result<()> {
        let ok = match provider {
            Provider::Donor(i) => i < scenario.num_donors(),
            Provider::Node(j) => j < self.deployed.len() && self.deployed[j],
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParent(provider))
        }
    }

    fn donor_slack(&self, scenario: &Scenario, donor: usize) -> f64 {
        scenario.rates.donor_budget() - self.donor_child_feed[donor]
    }

    /// Largest extra child feed `provider` could accept, recomputed by
    /// walking the path to its donor.
    pub fn headroom(&self, scenario: &Scenario, provider: Provider) -> Result<f64> {
        self.check_provider(scenario, provider)?;
        let overhead = scenario.rates.overhead;
        let mut scale = 1.0;
        let mut best = f64::INFINITY;
        let mut cur = provider;
        loop {
            match cur {
                Provider::Donor(i) => {
                    return Ok(best.min(self.donor_slack(scenario, i) / scale));
                }
                Provider::Node(j) => {
                    scale *= overhead;
                    best = best.min((self.link_cap[j] - self.feed[j]) / scale);
                    cur = self.parent[j].expect("deployed node has a parent");
                }
            }
        }
    }

    /// Whether a new leaf at `site` may hang off `parent`.
    pub fn can_attach(&self, scenario: &Scenario, site: usize, parent: Provider) -> Result<bool> {
        self.check_provider(scenario, parent)?;
        if self.deployed[site] || parent == Provider::Node(site) {
            return Ok(false);
        }
        let reachable = match parent {
            Provider::Donor(i) => scenario.donor_reaches_site(i, site),
            Provider::Node(j) => scenario.site_reaches_site(j, site),
        };
        if !reachable {
            return Ok(false);
        }
        let leaf = scenario.rates.leaf_feed();
        let from = Self::provider_position(scenario, parent);
        let cap =
            link_model::backhaul_capacity_gbps(from, scenario.site_position(site), &scenario.radio);
        if leaf > cap + RATE_EPS {
            return Ok(false);
        }
        Ok(leaf <= self.headroom(scenario, parent)? + RATE_EPS)
    }

    /// Smallest slack (Gbps) left on the new link, every ancestor link and
    /// the donor after attaching a leaf at `site` below `parent`.
    pub fn post_attach_slack(&self, scenario: &Scenario, site: usize, parent: Provider) -> f64 {
        let overhead = scenario.rates.overhead;
        let leaf = scenario.rates.leaf_feed();
        let from = Self::provider_position(scenario, parent);
        let cap =
            link_model::backhaul_capacity_gbps(from, scenario.site_position(site), &scenario.radio);
        let mut slack = cap - leaf;
        let mut increment = leaf;
        let mut cur = parent;
        loop {
            match cur {
                Provider::Donor(i) => {
                    return slack.min(self.donor_slack(scenario, i) - increment);
                }
                Provider::Node(j) => {
                    increment *= overhead;
                    slack = slack.min(self.link_cap[j] - self.feed[j] - increment);
                    cur = self.parent[j].expect("deployed node has a parent");
                }
            }
        }
    }

    /// Every provider that can accept `site`, donors first then nodes by
    /// site index.
    pub fn feasible_parents(&self, scenario: &Scenario, site: usize) -> Vec<Provider> {
        let donors = (0..scenario.num_donors()).map(Provider::Donor);
        let mut nodes: Vec<usize> = self.order.clone();
        nodes.sort_unstable();
        donors
            .chain(nodes.into_iter().map(Provider::Node))
            .filter(|&p| self.can_attach(scenario, site, p).unwrap_or(false))
            .collect()
    }

    /// Parent choice: largest post-attach slack, then shortest link, then
    /// candidate order.
    pub fn select_parent(&self, scenario: &Scenario, site: usize) -> Option<Provider> {
        let target = scenario.site_position(site);
        let mut best: Option<(Provider, f64, f64)> = None;
        for p in self.feasible_parents(scenario, site) {
            let slack = self.post_attach_slack(scenario, site, p);
            let dist = Self::provider_position(scenario, p).distance(target);
            let better = match best {
                None => true,
                Some((_, s, d)) => {
                    slack > s + RATE_EPS || ((slack - s).abs() <= RATE_EPS && dist < d - 1e-12)
                }
            };
            if better {
                best = Some((p, slack, dist));
            }
        }
        best.map(|(p, _, _)| p)
    }

    pub fn has_feasible_parent(&self, scenario: &Scenario, site: usize) -> bool {
        let donors = (0..scenario.num_donors()).map(Provider::Donor);
        let nodes = self.order.iter().map(|&j| Provider::Node(j));
        donors
            .chain(nodes)
            .any(|p| self.can_attach(scenario, site, p).unwrap_or(false))
    }

    /// Deploys `site` as a leaf below `parent`. On error the state is
    /// untouched.
    pub fn attach(&mut self, scenario: &Scenario, site: usize, parent: Provider) -> Result<()> {
        if site >= self.deployed.len() || !self.can_attach(scenario, site, parent)? {
            return Err(Error::AttachRejected { site, parent });
        }
        let rates = &scenario.rates;
        let from = Self::provider_position(scenario, parent);
        let leaf = rates.leaf_feed();

        self.deployed[site] = true;
        self.order.push(site);
        self.parent[site] = Some(parent);
        self.feed[site] = leaf;
        self.link_cap[site] =
            link_model::backhaul_capacity_gbps(from, scenario.site_position(site), &scenario.radio);
        let (root, depth) = match parent {
            Provider::Donor(i) => (i, 1),
            Provider::Node(j) => (self.root[j], self.depth[j] + 1),
        };
        self.root[site] = root;
        self.depth[site] = depth;

        match parent {
            Provider::Donor(i) => self.donor_children[i] += 1,
            Provider::Node(j) => self.node_children[j] += 1,
        }
        let mut increment = leaf;
        let mut cur = parent;
        loop {
            match cur {
                Provider::Donor(i) => {
                    self.donor_child_feed[i] += increment;
                    break;
                }
                Provider::Node(j) => {
                    self.node_child_feed[j] += increment;
                    let updated = self.required_feed(scenario, j);
                    increment = updated - self.feed[j];
                    self.feed[j] = updated;
                    cur = self.parent[j].expect("deployed node has a parent");
                }
            }
        }

        for &k in scenario.site_cover(site) {
            if self.cover_count[k] == 0 {
                self.covered += 1;
            }
            self.cover_count[k] += 1;
        }
        self.refresh_residuals(scenario, root);
        Ok(())
    }

    /// Attaches `site` below the parent chosen by [`Self::select_parent`].
    pub fn attach_auto(&mut self, scenario: &Scenario, site: usize) -> Result<Provider> {
        let parent = self
            .select_parent(scenario, site)
            .ok_or(Error::AttachRejected {
                site,
                parent: Provider::Donor(0),
            })?;
        self.attach(scenario, site, parent)?;
        Ok(parent)
    }

    fn refresh_residuals(&mut self, scenario: &Scenario, donor: usize) {
        let overhead = scenario.rates.overhead;
        self.donor_residual[donor] = self.donor_slack(scenario, donor);
        for idx in 0..self.order.len() {
            let j = self.order[idx];
            if self.root[j] != donor {
                continue;
            }
            let upstream = self.residual(self.parent[j].expect("deployed node has a parent"));
            self.node_residual[j] = upstream.min(self.link_cap[j] - self.feed[j]) / overhead;
        }
    }

    /// Per-cell projections of deployment, residual rate and child count.
    pub fn project_matrices(&self, scenario: &Scenario) -> StateMatrices {
        let cells = scenario.num_cells();
        let mut m = StateMatrices {
            deployment: vec![0; cells],
            donor_flag: vec![0; cells],
            residual: vec![0.0; cells],
            children: vec![0; cells],
        };
        for d in 0..scenario.num_donors() {
            let k = scenario.donor_cell(d);
            m.deployment[k] = 1;
            m.donor_flag[k] = 1;
            m.residual[k] += self.donor_residual[d];
            m.children[k] += self.donor_children[d];
        }
        for &j in &self.order {
            let k = scenario.sites.cell(j);
            m.deployment[k] = 1;
            m.residual[k] += self.node_residual[j];
            m.children[k] += self.node_children[j];
        }
        m
    }

    pub fn to_plan(&self, scenario: &Scenario) -> DeploymentPlan {
        let nodes = self
            .order
            .iter()
            .map(|&j| {
                let p = scenario.site_position(j);
                PlanNode {
                    site_index: j,
                    x: p.x,
                    y: p.y,
                    parent: self.parent[j].expect("deployed node has a parent"),
                    feed_rate_gbps: self.feed[j],
                    hop_depth: self.depth[j],
                }
            })
            .collect();
        DeploymentPlan {
            n_nodes: self.num_nodes(),
            nodes,
            coverage: CoverageSummary {
                covered_cells: self.covered,
                total_cells: self.cover_count.len(),
                fraction: self.coverage_fraction(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrices {
    pub deployment: Vec<u8>,
    pub donor_flag: Vec<u8>,
    /// Gbps.
    pub residual: Vec<f64>,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanNode {
    pub site_index: usize,
    pub x: f64,
    pub y: f64,
    pub parent: Provider,
    pub feed_rate_gbps: f64,
    pub hop_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub covered_cells: usize,
    pub total_cells: usize,
    pub fraction: f64,
}

/// Exported deployment plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentPlan {
    pub nodes: Vec<PlanNode>,
    pub n_nodes: usize,
    pub coverage: CoverageSummary,
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::link_model::RadioConfig;
    use crate::scenario::{DonorLayout, GridMap, LayoutPattern, RateConfig};

    /// One donor at the left end of a long strip, sites every 50 m.
    fn strip(len_cells: usize) -> Scenario {
        let map = GridMap::new(50.0 * len_cells as f64, 50.0, 50.0).unwrap();
        let donors = DonorLayout {
            pattern: LayoutPattern::Explicit,
            positions: vec![Point::new(25.0, 25.0)],
        };
        Scenario::new(
            map,
            donors,
            None,
            RateConfig::default(),
            RadioConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn leaf_feed_examples() {
        let s = strip(12);
        let mut st = NetworkState::new(&s);
        // site k sits at 75 + 50k m
        st.attach(&s, 3, Provider::Donor(0)).unwrap();
        assert_abs_diff_eq!(st.required_feed(&s, 3), 2.4, epsilon = 1e-12);
        st.attach(&s, 7, Provider::Node(3)).unwrap();
        assert_abs_diff_eq!(st.feed_rate(3), 1.2 * (2.0 + 2.4), epsilon = 1e-12);
        assert_abs_diff_eq!(st.feed_rate(3), 5.28, epsilon = 1e-12);

        let free = RateConfig {
            overhead: 1.0,
            ..RateConfig::default()
        };
        let s1 = Scenario::new(
            s.map.clone(),
            s.donors.clone(),
            None,
            free,
            RadioConfig::default(),
        )
        .unwrap();
        assert_eq!(NetworkState::new(&s1).required_feed(&s1, 0), 2.0);
    }

    #[test]
    fn first_attach_against_donor_budget() {
        let s = strip(12);
        let mut st = NetworkState::new(&s);
        assert_abs_diff_eq!(st.residual(Provider::Donor(0)), 23.0, epsilon = 1e-12);
        // 250 m from the donor
        assert_eq!(s.site_position(4).x, 275.0);
        assert!(st.can_attach(&s, 4, Provider::Donor(0)).unwrap());
        st.attach(&s, 4, Provider::Donor(0)).unwrap();
        assert_abs_diff_eq!(st.residual(Provider::Donor(0)), 23.0 - 2.4, epsilon = 1e-12);
    }

    #[test]
    fn out_of_range_parent() {
        let s = strip(12);
        let st = NetworkState::new(&s);
        // 350 m away
        assert_eq!(s.site_position(6).x, 375.0);
        assert!(!st.can_attach(&s, 6, Provider::Donor(0)).unwrap());
        assert!(st.select_parent(&s, 6).is_none());
    }

    #[test]
    fn undeployed_parent_is_an_error() {
        let s = strip(6);
        let st = NetworkState::new(&s);
        assert!(matches!(
            st.can_attach(&s, 1, Provider::Node(0)),
            Err(Error::InvalidParent(_))
        ));
        assert!(st.can_attach(&s, 1, Provider::Donor(1)).is_err());
    }

    #[test]
    fn rejected_attach_leaves_state_unchanged() {
        let s = strip(12);
        let mut st = NetworkState::new(&s);
        st.attach(&s, 2, Provider::Donor(0)).unwrap();
        let before = st.clone();
        assert!(st.attach(&s, 9, Provider::Donor(0)).is_err());
        assert!(st.attach(&s, 2, Provider::Donor(0)).is_err());
        assert_eq!(st, before);
    }

    #[test]
    fn reset_round_trip() {
        let s = strip(8);
        let fresh = NetworkState::new(&s);
        let mut st = fresh.clone();
        st.attach(&s, 1, Provider::Donor(0)).unwrap();
        assert_ne!(st, fresh);
        assert_eq!(NetworkState::new(&s), fresh);
    }

    #[test]
    fn redundant_attach_still_updates_matrices() {
        let s = strip(3);
        let mut st = NetworkState::new(&s);
        assert_eq!(st.coverage_fraction(), 1.0);
        let before = st.project_matrices(&s);
        st.attach(&s, 0, Provider::Donor(0)).unwrap();
        let after = st.project_matrices(&s);
        assert_eq!(st.coverage_fraction(), 1.0);
        assert_ne!(before.deployment, after.deployment);
        assert_ne!(before.residual, after.residual);
    }

    #[test]
    fn pure_chain_depth_is_bounded() {
        // closed form: hop h costs the donor 2 * 1.2^h
        let budget = 23.0;
        let mut spent = 0.0;
        let mut expected_depth = 0;
        for h in 1.. {
            let cost = 2.0 * 1.2f64.powi(h);
            if spent + cost > budget + RATE_EPS {
                break;
            }
            spent += cost;
            expected_depth = h as usize;
        }
        assert_eq!(expected_depth, 5);

        // simulate along a strip, each hop 250 m further out
        let map = GridMap::new(3000.0, 50.0, 50.0).unwrap();
        let donors = DonorLayout {
            pattern: LayoutPattern::Explicit,
            positions: vec![Point::new(25.0, 25.0)],
        };
        let s = Scenario::new(
            map,
            donors,
            None,
            RateConfig::default(),
            RadioConfig::default(),
        )
        .unwrap();
        let mut st = NetworkState::new(&s);
        let mut parent = Provider::Donor(0);
        let mut depth = 0;
        for hop in 1..20 {
            let site = 5 * hop - 1;
            if site >= s.num_sites() || !st.can_attach(&s, site, parent).unwrap() {
                break;
            }
            st.attach(&s, site, parent).unwrap();
            parent = Provider::Node(site);
            depth = hop;
        }
        assert_eq!(depth, expected_depth);
        assert_eq!(st.hop_depth(24), 5);
    }

    #[test]
    fn parent_policy_prefers_slack_then_distance() {
        let s = strip(12);
        let mut st = NetworkState::new(&s);
        st.attach(&s, 1, Provider::Donor(0)).unwrap();
        // site 3 (225 m) reaches donor and node 1; donor is shallower
        assert_eq!(st.select_parent(&s, 3), Some(Provider::Donor(0)));
        // site 7 (425 m) only reaches node 1
        assert_eq!(st.select_parent(&s, 7), Some(Provider::Node(1)));
    }

    #[test]
    fn projection_counts() {
        let s = strip(12);
        let mut st = NetworkState::new(&s);
        let m0 = st.project_matrices(&s);
        assert_eq!(m0.deployment.iter().map(|&d| d as usize).sum::<usize>(), 1);
        assert_eq!(m0.children.iter().sum::<usize>(), 0);
        assert_abs_diff_eq!(m0.residual[0], 23.0, epsilon = 1e-12);
        st.attach(&s, 2, Provider::Donor(0)).unwrap();
        st.attach(&s, 6, Provider::Node(2)).unwrap();
        st.attach(&s, 4, Provider::Node(2)).unwrap();
        let m = st.project_matrices(&s);
        assert_eq!(m.deployment.iter().map(|&d| d as usize).sum::<usize>(), 4);
        assert_eq!(m.children.iter().sum::<usize>(), st.num_nodes());
        assert_eq!(m.children[s.sites.cell(2)], 2);
    }

    #[test]
    fn plan_export() {
        let s = strip(12);
        let mut st = NetworkState::new(&s);
        st.attach(&s, 2, Provider::Donor(0)).unwrap();
        st.attach(&s, 6, Provider::Node(2)).unwrap();
        let plan = st.to_plan(&s);
        assert_eq!(plan.n_nodes, 2);
        assert_eq!(plan.nodes[1].hop_depth, 2);
        assert_eq!(plan.nodes[1].parent, Provider::Node(2));
        let json = serde_json::to_string(&plan).unwrap();
        assert!(json.contains("\"parent\":{\"node\":2}"));
        let back: DeploymentPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan);
    }
}
