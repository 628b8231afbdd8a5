use std::path::PathBuf;

use thiserror::Error;

use crate::network_state::Provider;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("map {width_m} x {height_m} m is not a whole number of {cell_size_m} m cells")]
    DimensionMismatch {
        width_m: f64,
        height_m: f64,
        cell_size_m: f64,
    },

    #[error("position ({x}, {y}) lies outside the map")]
    OutsideMap { x: f64, y: f64 },

    #[error("unknown donor layout `{0}`")]
    UnknownPattern(String),

    #[error("bandwidth must be positive, got {0} Hz")]
    NonPositiveBandwidth(f64),

    #[error("link distance must be positive, got {0} m")]
    ZeroDistance(f64),

    #[error("provider {0:?} is neither a donor nor a deployed node")]
    InvalidParent(Provider),

    #[error("site {site} cannot be attached to {parent:?}")]
    AttachRejected { site: usize, parent: Provider },

    #[error("action {action} is not valid in the current state")]
    InvalidAction { action: usize },

    #[error("episode already finished; call reset first")]
    EpisodeDone,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("scenario has {sites} candidate sites, exhaustive search is limited to {limit}")]
    TooManySites { sites: usize, limit: usize },

    #[error("scenario is infeasible: {0}")]
    Infeasible(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("refusing to overwrite {0} with different contents")]
    WouldOverwrite(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
