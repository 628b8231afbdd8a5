//! Per-episode training records and their CSV export.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Smoothing window for the exported reward curve.
pub const REWARD_WINDOW: usize = 500;

/// Trailing mean over `min(window, i + 1)` samples.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (i, &x) in series.iter().enumerate() {
        sum += x;
        if i >= window {
            sum -= series[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub episode: usize,
    /// Undiscounted episode return.
    pub reward: f64,
    pub epsilon: f64,
    pub nodes_deployed: usize,
    pub coverage: f64,
    pub steps: usize,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub episodes: Vec<EpisodeReport>,
}

#[derive(Serialize)]
struct CsvRow {
    episode: usize,
    reward: f64,
    moving_avg_500: f64,
    epsilon: f64,
    nodes_deployed: usize,
    coverage: f64,
    wall_ms: u64,
}

impl RunMetrics {
    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.reward).collect()
    }

    pub fn smoothed_rewards(&self) -> Vec<f64> {
        moving_average(&self.rewards(), REWARD_WINDOW)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let smooth = self.smoothed_rewards();
        for (e, avg) in self.episodes.iter().zip(smooth) {
            w.serialize(CsvRow {
                episode: e.episode,
                reward: e.reward,
                moving_avg_500: avg,
                epsilon: e.epsilon,
                nodes_deployed: e.nodes_deployed,
                coverage: e.coverage,
                wall_ms: e.wall_ms,
            })?;
        }
        if self.episodes.is_empty() {
            w.write_record([
                "episode",
                "reward",
                "moving_avg_500",
                "epsilon",
                "nodes_deployed",
                "coverage",
                "wall_ms",
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_fixtures() {
        let s = [3.0, -1.0, 4.0, 1.5];
        assert_eq!(moving_average(&s, 1), s.to_vec());
        assert_eq!(moving_average(&[2.5; 7], 3), vec![2.5; 7]);
        assert_eq!(moving_average(&[0.0, 10.0], 2), vec![0.0, 5.0]);
        assert!(moving_average(&[], 5).is_empty());
        assert_eq!(
            moving_average(&[1.0, 2.0, 3.0, 4.0], 2),
            vec![1.0, 1.5, 2.5, 3.5]
        );
    }

    #[test]
    fn csv_header_and_rows() {
        let m = RunMetrics {
            episodes: vec![EpisodeReport {
                episode: 0,
                reward: -3.5,
                epsilon: 1.0,
                nodes_deployed: 2,
                coverage: 0.75,
                steps: 3,
                wall_ms: 0,
            }],
        };
        let text = m.to_csv_string();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "episode,reward,moving_avg_500,epsilon,nodes_deployed,coverage,wall_ms"
        );
        assert_eq!(lines.next().unwrap(), "0,-3.5,-3.5,1.0,2,0.75,0");
        assert_eq!(RunMetrics::default().to_csv_string().lines().count(), 1);
    }
}
