use serde::Serialize;

use crate::engine::MarketSnapshot;
use crate::state::MarketConfiguration;

/// Sum of squared market shares, `1/n <= H <= 1`.
pub fn herfindahl(config: &MarketConfiguration) -> f64 {
    let n = config.len() as f64;
    config
        .clusters()
        .map(|c| {
            let share = c.multiplicity as f64 / n;
            share * share
        })
        .sum()
}

/// Share of the largest firm.
pub fn max_share(config: &MarketConfiguration) -> f64 {
    let top = config.clusters().map(|c| c.multiplicity).max().unwrap_or(0);
    top as f64 / config.len() as f64
}

/// Concentration summary of one market at one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub firm_count: usize,
    pub herfindahl: f64,
    pub max_share: f64,
    pub histogram: Vec<u64>,
}

impl SummaryStats {
    pub fn of(config: &MarketConfiguration, bins: usize) -> crate::Result<Self> {
        Ok(SummaryStats {
            firm_count: config.firm_count(),
            herfindahl: herfindahl(config),
            max_share: max_share(config),
            histogram: crate::measures::histogram(config, bins)?.counts,
        })
    }
}

impl From<&MarketSnapshot> for SummaryStats {
    fn from(s: &MarketSnapshot) -> Self {
        SummaryStats {
            firm_count: s.firm_count,
            herfindahl: s.herfindahl,
            max_share: s.max_share,
            histogram: s.histogram.counts.clone(),
        }
    }
}
