//! The world: grid map, candidate sites, donor layouts and rate settings.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::link_model::{self, RadioConfig};

const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Square-cell discretisation of a rectangular map. Cells are numbered
/// row-major from the origin corner.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    width_m: f64,
    height_m: f64,
    cell_size_m: f64,
    cols: usize,
    rows: usize,
    cells: Vec<Point>,
}

impl GridMap {
    pub fn new(width_m: f64, height_m: f64, cell_size_m: f64) -> Result<Self> {
        let mismatch = || Error::DimensionMismatch {
            width_m,
            height_m,
            cell_size_m,
        };
        if !(cell_size_m > 0.0 && width_m > 0.0 && height_m > 0.0) {
            return Err(mismatch());
        }
        let cols = whole_cells(width_m, cell_size_m).ok_or_else(mismatch)?;
        let rows = whole_cells(height_m, cell_size_m).ok_or_else(mismatch)?;
        let cells = (0..rows)
            .flat_map(|r| {
                (0..cols).map(move |c| {
                    Point::new(
                        (c as f64 + 0.5) * cell_size_m,
                        (r as f64 + 0.5) * cell_size_m,
                    )
                })
            })
            .collect();
        Ok(Self {
            width_m,
            height_m,
            cell_size_m,
            cols,
            rows,
            cells,
        })
    }

    pub fn width_m(&self) -> f64 {
        self.width_m
    }

    pub fn height_m(&self) -> f64 {
        self.height_m
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cells(&self) -> &[Point] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width_m).contains(&p.x) && (0.0..=self.height_m).contains(&p.y)
    }

    /// Index of the cell containing `p`. Points on a shared edge belong to
    /// the cell with the larger index; the outer edge belongs to the last
    /// row/column.
    pub fn cell_of(&self, p: Point) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let col = ((p.x / self.cell_size_m).floor() as usize).min(self.cols - 1);
        let row = ((p.y / self.cell_size_m).floor() as usize).min(self.rows - 1);
        Some(row * self.cols + col)
    }
}

fn whole_cells(extent: f64, cell: f64) -> Option<usize> {
    let n = extent / cell;
    let rounded = n.round();
    ((n - rounded).abs() < GRID_TOLERANCE && rounded >= 1.0).then_some(rounded as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutPattern {
    FiveDice,
    Vertical,
    Pentagon,
    Explicit,
}

impl LayoutPattern {
    pub const NAMED: [LayoutPattern; 3] = [Self::FiveDice, Self::Vertical, Self::Pentagon];

    pub fn name(self) -> &'static str {
        match self {
            Self::FiveDice => "five_dice",
            Self::Vertical => "vertical",
            Self::Pentagon => "pentagon",
            Self::Explicit => "explicit",
        }
    }
}

impl fmt::Display for LayoutPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayoutPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "five_dice" => Ok(Self::FiveDice),
            "vertical" => Ok(Self::Vertical),
            "pentagon" => Ok(Self::Pentagon),
            "explicit" => Ok(Self::Explicit),
            other => Err(Error::UnknownPattern(other.to_string())),
        }
    }
}

/// Donor coordinates for a named layout. `explicit` has no canonical
/// positions and is rejected here.
pub fn donor_positions(pattern: LayoutPattern, map: &GridMap) -> Result<Vec<Point>> {
    let (w, h) = (map.width_m, map.height_m);
    let positions = match pattern {
        LayoutPattern::FiveDice => vec![
            Point::new(0.25 * w, 0.25 * h),
            Point::new(0.75 * w, 0.25 * h),
            Point::new(0.5 * w, 0.5 * h),
            Point::new(0.25 * w, 0.75 * h),
            Point::new(0.75 * w, 0.75 * h),
        ],
        LayoutPattern::Vertical => [0.1, 0.3, 0.5, 0.7, 0.9]
            .iter()
            .map(|f| Point::new(0.5 * w, f * h))
            .collect(),
        LayoutPattern::Pentagon => {
            let radius = 0.35 * w.min(h);
            (0..5)
                .map(|k| {
                    // first vertex at +y
                    let theta = FRAC_PI_2 + TAU * k as f64 / 5.0;
                    Point::new(
                        0.5 * w + radius * theta.cos(),
                        0.5 * h + radius * theta.sin(),
                    )
                })
                .collect()
        }
        LayoutPattern::Explicit => return Err(Error::UnknownPattern("explicit".into())),
    };
    Ok(positions)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DonorLayout {
    pub pattern: LayoutPattern,
    pub positions: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSites {
    positions: Vec<Point>,
    cells: Vec<usize>,
}

impl CandidateSites {
    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn cell(&self, site: usize) -> usize {
        self.cells[site]
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Rates in Gbps. JSON keys follow the config file schema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    #[serde(rename = "donor_fixed")]
    pub donor_fixed_rate: f64,
    #[serde(rename = "node_access")]
    pub node_access_rate: f64,
    #[serde(rename = "donor_access")]
    pub donor_access_rate: f64,
    pub overhead: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            donor_fixed_rate: 30.0,
            node_access_rate: 2.0,
            donor_access_rate: 2.0,
            overhead: 1.2,
        }
    }
}

impl RateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.overhead.is_nan() || self.overhead < 1.0 {
            return Err(Error::Config(format!(
                "overhead {} must be >= 1",
                self.overhead
            )));
        }
        let rates = [
            self.donor_fixed_rate,
            self.node_access_rate,
            self.donor_access_rate,
        ];
        if rates.iter().any(|r| r.is_nan() || *r <= 0.0) {
            return Err(Error::Config("all rates must be positive".into()));
        }
        Ok(())
    }

    /// Backhaul feed a leaf node needs from its parent.
    pub fn leaf_feed(&self) -> f64 {
        self.overhead * self.node_access_rate
    }

    /// Feed a donor can hand out before any children attach.
    pub fn donor_budget(&self) -> f64 {
        self.donor_fixed_rate / self.overhead - self.donor_access_rate
    }

    /// Upper bound on the number of children any provider can serve: every
    /// child draws at least one leaf feed from its donor's budget.
    pub fn max_children(&self) -> usize {
        ((self.donor_budget() / self.leaf_feed()).floor().max(1.0)) as usize
    }
}

/// Immutable world description with precomputed coverage and reachability
/// tables.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub map: GridMap,
    pub donors: DonorLayout,
    pub sites: CandidateSites,
    pub rates: RateConfig,
    pub radio: RadioConfig,
    donor_cells: Vec<usize>,
    site_cover: Vec<Vec<usize>>,
    donor_cover: Vec<Vec<usize>>,
    site_reach: Vec<bool>,
    donor_reach: Vec<bool>,
}

pub fn build_scenario(config: &ExperimentConfig) -> Result<Scenario> {
    let map = GridMap::new(
        config.map.width_m,
        config.map.height_m,
        config.map.cell_size_m,
    )?;
    let donors = config.donors.resolve(&map)?;
    Scenario::new(
        map,
        donors,
        config.sites.clone(),
        config.rates,
        config.radio.clone(),
    )
}

impl Scenario {
    /// Candidate sites default to every cell centre whose cell holds no donor.
    pub fn new(
        map: GridMap,
        donors: DonorLayout,
        sites: Option<Vec<Point>>,
        rates: RateConfig,
        radio: RadioConfig,
    ) -> Result<Self> {
        rates.validate()?;
        radio.validate()?;
        if donors.positions.is_empty() {
            return Err(Error::Config("at least one donor is required".into()));
        }
        if donors.pattern != LayoutPattern::Explicit && donors.positions.len() != 5 {
            return Err(Error::Config("named layouts place exactly 5 donors".into()));
        }
        let donor_cells = donors
            .positions
            .iter()
            .map(|&p| map.cell_of(p).ok_or(Error::OutsideMap { x: p.x, y: p.y }))
            .collect::<Result<Vec<_>>>()?;

        let positions = match sites {
            Some(explicit) => {
                for p in &explicit {
                    if !map.contains(*p) {
                        return Err(Error::OutsideMap { x: p.x, y: p.y });
                    }
                    if donors.positions.iter().any(|d| d == p) {
                        return Err(Error::Config(format!(
                            "site ({}, {}) coincides with a donor",
                            p.x, p.y
                        )));
                    }
                }
                explicit
            }
            None => map
                .cells
                .iter()
                .enumerate()
                .filter(|(cell, _)| !donor_cells.contains(cell))
                .map(|(_, &p)| p)
                .collect(),
        };
        let cells = positions
            .iter()
            .map(|&p| map.cell_of(p).expect("site inside map"))
            .collect();
        let sites = CandidateSites { positions, cells };

        let cover_of = |from: Point| -> Vec<usize> {
            map.cells
                .iter()
                .enumerate()
                .filter(|(_, &c)| link_model::covers(from, c, &radio))
                .map(|(k, _)| k)
                .collect()
        };
        let site_cover = sites.positions.iter().map(|&p| cover_of(p)).collect();
        let donor_cover = donors.positions.iter().map(|&p| cover_of(p)).collect();

        let j = sites.len();
        let mut site_reach = vec![false; j * j];
        for a in 0..j {
            for b in 0..j {
                site_reach[a * j + b] = a != b
                    && link_model::backhaul_reachable(
                        sites.positions[a],
                        sites.positions[b],
                        &radio,
                    );
            }
        }
        let donor_reach = donors
            .positions
            .iter()
            .flat_map(|&d| {
                sites
                    .positions
                    .iter()
                    .map(move |&s| (d, s))
                    .collect::<Vec<_>>()
            })
            .map(|(d, s)| link_model::backhaul_reachable(d, s, &radio))
            .collect();

        Ok(Self {
            map,
            donors,
            sites,
            rates,
            radio,
            donor_cells,
            site_cover,
            donor_cover,
            site_reach,
            donor_reach,
        })
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn num_donors(&self) -> usize {
        self.donors.positions.len()
    }

    pub fn num_cells(&self) -> usize {
        self.map.len()
    }

    /// `J + 1`: one deploy action per site plus the terminating no-op.
    pub fn num_actions(&self) -> usize {
        self.num_sites() + 1
    }

    pub fn site_position(&self, site: usize) -> Point {
        self.sites.positions[site]
    }

    pub fn donor_position(&self, donor: usize) -> Point {
        self.donors.positions[donor]
    }

    pub fn donor_cell(&self, donor: usize) -> usize {
        self.donor_cells[donor]
    }

    /// Cells covered by a node deployed at `site`.
    pub fn site_cover(&self, site: usize) -> &[usize] {
        &self.site_cover[site]
    }

    pub fn donor_cover(&self, donor: usize) -> &[usize] {
        &self.donor_cover[donor]
    }

    pub fn site_reaches_site(&self, from: usize, to: usize) -> bool {
        self.site_reach[from * self.num_sites() + to]
    }

    pub fn donor_reaches_site(&self, donor: usize, site: usize) -> bool {
        self.donor_reach[donor * self.num_sites() + site]
    }
}
