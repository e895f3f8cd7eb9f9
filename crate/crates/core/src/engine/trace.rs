use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::measures::Histogram;

pub const DEFAULT_RETAINED: usize = 150;

/// Which iterations are snapshotted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RetentionPlan {
    /// About `count` iterations, geometrically spaced over `[1, iterations]`.
    LogSpaced { count: usize },
    Explicit { iterations: Vec<u64> },
}

impl Default for RetentionPlan {
    fn default() -> Self {
        RetentionPlan::LogSpaced {
            count: DEFAULT_RETAINED,
        }
    }
}

impl RetentionPlan {
    /// Strictly increasing snapshot iterations, always ending at `iterations`.
    pub fn resolve(&self, iterations: u64) -> Result<Vec<u64>> {
        if iterations == 0 {
            return Err(validation("iterations must be at least 1"));
        }
        let mut points = match self {
            RetentionPlan::LogSpaced { count } => {
                if *count == 0 {
                    return Err(validation("retention count must be at least 1"));
                }
                let span = (iterations as f64).ln();
                let last = (*count - 1).max(1) as f64;
                (0..*count)
                    .map(|k| {
                        let t = (span * k as f64 / last).exp().round() as u64;
                        t.clamp(1, iterations)
                    })
                    .collect::<Vec<_>>()
            }
            RetentionPlan::Explicit { iterations: its } => {
                if let Some(bad) = its.iter().find(|&&t| t == 0 || t > iterations) {
                    return Err(validation(format!(
                        "retained iteration {bad} outside [1, {iterations}]"
                    )));
                }
                if its.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(validation("retained iterations must be strictly increasing"));
                }
                its.clone()
            }
        };
        points.dedup();
        if points.last() != Some(&iterations) {
            points.push(iterations);
        }
        Ok(points)
    }
}

/// Cumulative branch counts of one market.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTally {
    pub new_firm: u64,
    pub cross: u64,
    pub within: u64,
}

impl EventTally {
    pub fn total(&self) -> u64 {
        self.new_firm + self.cross + self.within
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketSnapshot {
    pub histogram: Histogram,
    pub firm_count: usize,
    pub herfindahl: f64,
    pub max_share: f64,
    pub events: EventTally,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: u64,
    /// Poisson clock, present in continuous mode only.
    pub clock: Option<f64>,
    pub markets: Vec<MarketSnapshot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub market_names: Vec<String>,
    pub n: usize,
    pub bins: usize,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}
