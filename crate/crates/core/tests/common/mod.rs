#![allow(dead_code)]

use iab_core::link_model::RadioConfig;
use iab_core::network_state::NetworkState;
use iab_core::scenario::{DonorLayout, GridMap, LayoutPattern, Point, RateConfig, Scenario};
use rand::seq::SliceRandom;
use rand::Rng;

/// Small random instance: a grid of at most 4 x 3 cells with 50 m cells,
/// one or two donors at cell centres and up to `max_sites` candidate
/// sites on the remaining centres. Radii and rates are drawn so that
/// instances range from trivial to infeasible.
pub fn random_scenario<R: Rng>(rng: &mut R, max_sites: usize) -> Scenario {
    let cols = rng.gen_range(2..=4);
    let rows = rng.gen_range(1..=3);
    let map = GridMap::new(50.0 * cols as f64, 50.0 * rows as f64, 50.0).unwrap();
    let mut centres: Vec<Point> = map.cells().to_vec();
    centres.shuffle(rng);
    let n_donors = if centres.len() > 4 && rng.gen_bool(0.3) {
        2
    } else {
        1
    };
    let donors: Vec<Point> = centres.drain(..n_donors).collect();
    let n_sites = rng.gen_range(1..=max_sites.min(centres.len()));
    let mut sites: Vec<Point> = centres.drain(..n_sites).collect();
    sites.sort_by(|a, b| (a.y, a.x).partial_cmp(&(b.y, b.x)).unwrap());
    let radio = RadioConfig {
        coverage_radius_m: rng.gen_range(30.0..120.0),
        backhaul_radius_m: rng.gen_range(50.0..160.0),
        ..RadioConfig::default()
    };
    let rates = RateConfig {
        donor_fixed_rate: rng.gen_range(6.0..30.0),
        node_access_rate: rng.gen_range(0.5..3.0),
        donor_access_rate: rng.gen_range(0.5..3.0),
        overhead: rng.gen_range(1.0..1.5),
    };
    Scenario::new(
        map,
        DonorLayout {
            pattern: LayoutPattern::Explicit,
            positions: donors,
        },
        Some(sites),
        rates,
        radio,
    )
    .unwrap()
}

/// One donor at the left end of a 50 m wide strip; sites on every other
/// cell centre.
pub fn strip(len_cells: usize) -> Scenario {
    let map = GridMap::new(50.0 * len_cells as f64, 50.0, 50.0).unwrap();
    Scenario::new(
        map,
        DonorLayout {
            pattern: LayoutPattern::Explicit,
            positions: vec![Point::new(25.0, 25.0)],
        },
        None,
        RateConfig::default(),
        RadioConfig::default(),
    )
    .unwrap()
}

/// Attaches random sites to random feasible parents until `steps`
/// attaches happened or nothing is attachable.
pub fn random_attaches<R: Rng>(scenario: &Scenario, rng: &mut R, steps: usize) -> NetworkState {
    let mut state = NetworkState::new(scenario);
    for _ in 0..steps {
        let options: Vec<(usize, Vec<_>)> = (0..scenario.num_sites())
            .filter(|&s| !state.is_deployed(s))
            .map(|s| (s, state.feasible_parents(scenario, s)))
            .filter(|(_, p)| !p.is_empty())
            .collect();
        let Some((site, parents)) = options.choose(rng) else {
            break;
        };
        let parent = *parents.choose(rng).unwrap();
        state.attach(scenario, *site, parent).unwrap();
    }
    state
}
