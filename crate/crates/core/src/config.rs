//! Experiment configuration file and the built-in presets.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::action_filter::FilterConfig;
use crate::agents::TrainConfig;
use crate::error::{Error, Result};
use crate::link_model::RadioConfig;
use crate::mdp_env::RewardConfig;
use crate::scenario::{donor_positions, DonorLayout, GridMap, LayoutPattern, Point, RateConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub width_m: f64,
    pub height_m: f64,
    pub cell_size_m: f64,
}

/// Either a named pattern or an explicit position list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DonorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<Point>>,
}

impl DonorConfig {
    pub fn named(pattern: LayoutPattern) -> Self {
        Self {
            pattern: Some(pattern.name().to_string()),
            positions: None,
        }
    }

    pub fn explicit(positions: Vec<Point>) -> Self {
        Self {
            pattern: None,
            positions: Some(positions),
        }
    }

    pub fn resolve(&self, map: &GridMap) -> Result<DonorLayout> {
        let pattern = match &self.pattern {
            Some(name) => name.parse()?,
            None => LayoutPattern::Explicit,
        };
        match (pattern, &self.positions) {
            (LayoutPattern::Explicit, Some(positions)) => Ok(DonorLayout {
                pattern,
                positions: positions.clone(),
            }),
            (LayoutPattern::Explicit, None) => Err(Error::Config(
                "explicit donor layout needs `positions`".into(),
            )),
            (named, None) => Ok(DonorLayout {
                pattern: named,
                positions: donor_positions(named, map)?,
            }),
            (named, Some(_)) => Err(Error::Config(format!(
                "donor pattern `{named}` does not take `positions`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: MapConfig,
    pub donors: DonorConfig,
    /// Explicit candidate sites; defaults to the cell centres free of donors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<Point>>,
    #[serde(default)]
    pub rates: RateConfig,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub training: TrainConfig,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        self.radio.validate()?;
        self.reward.validate()?;
        self.filter.validate()?;
        self.training.validate()?;
        Ok(())
    }

    /// 1000 m x 1000 m map, 50 m cells, one of the named five-donor layouts.
    pub fn full_scale(layout: LayoutPattern, seed: u64) -> Self {
        Self {
            map: MapConfig {
                width_m: 1000.0,
                height_m: 1000.0,
                cell_size_m: 50.0,
            },
            donors: DonorConfig::named(layout),
            sites: None,
            rates: RateConfig::default(),
            radio: RadioConfig::default(),
            reward: RewardConfig::default(),
            filter: FilterConfig::default(),
            training: TrainConfig::default(),
            seed,
        }
    }

    /// 500 m x 500 m map with 100 cells and two donors, sized for a single
    /// laptop core.
    pub fn desk_preset(seed: u64) -> Self {
        let mut config = Self::full_scale(LayoutPattern::FiveDice, seed);
        config.apply_desk_scale();
        config.donors =
            DonorConfig::explicit(vec![Point::new(150.0, 250.0), Point::new(350.0, 250.0)]);
        config
    }

    /// Shrinks map, training length and network in place; donors are left
    /// to the caller.
    pub fn apply_desk_scale(&mut self) {
        self.map = MapConfig {
            width_m: 500.0,
            height_m: 500.0,
            cell_size_m: 50.0,
        };
        self.training = TrainConfig::desk();
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Short content hash used to name output directories.
    pub fn short_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        let digest = Sha256::digest(&bytes);
        hex::encode(&digest[..6])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::build_scenario;

    const MINIMAL: &str = r#"{
        "map": {"width_m": 1000, "height_m": 1000, "cell_size_m": 50},
        "donors": {"pattern": "five_dice"},
        "seed": 7
    }"#;

    #[test]
    fn minimal_config_uses_documented_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.rates, RateConfig::default());
        assert_eq!(c.training.batch_size, 512);
        assert_eq!(c.training.hidden, vec![1024, 512, 256]);
        let s = build_scenario(&c).unwrap();
        assert_eq!(s.num_cells(), 400);
        assert_eq!(s.num_sites(), 395);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("\"seed\": 7", "\"seed\": 7, \"colour\": 1");
        assert!(matches!(
            ExperimentConfig::from_json(&text),
            Err(Error::Config(_))
        ));
        let nested = MINIMAL.replace("\"cell_size_m\": 50", "\"cell_size_m\": 50, \"depth_m\": 3");
        assert!(ExperimentConfig::from_json(&nested).is_err());
    }

    #[test]
    fn missing_required_field() {
        let text = MINIMAL.replace(",\n        \"seed\": 7", "");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn unknown_pattern_surfaces_at_build() {
        let text = MINIMAL.replace("five_dice", "hexagon");
        let c = ExperimentConfig::from_json(&text).unwrap();
        assert!(matches!(build_scenario(&c), Err(Error::UnknownPattern(_))));
    }

    #[test]
    fn explicit_positions() {
        let text = MINIMAL.replace(
            r#"{"pattern": "five_dice"}"#,
            r#"{"positions": [[25, 25], [475, 475]]}"#,
        );
        let c = ExperimentConfig::from_json(&text).unwrap();
        let s = build_scenario(&c).unwrap();
        assert_eq!(s.num_donors(), 2);
        assert_eq!(s.num_sites(), 398);
    }

    #[test]
    fn json_round_trip_and_hash() {
        let c = ExperimentConfig::desk_preset(11);
        let back = ExperimentConfig::from_json(&c.to_pretty_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.short_hash(), c.short_hash());
        assert_ne!(
            ExperimentConfig::desk_preset(12).short_hash(),
            c.short_hash()
        );
    }

    #[test]
    fn desk_preset_shape() {
        let s = build_scenario(&ExperimentConfig::desk_preset(0)).unwrap();
        assert_eq!(s.num_cells(), 100);
        assert_eq!(s.num_donors(), 2);
        assert_eq!(s.num_sites(), 98);
    }
}
