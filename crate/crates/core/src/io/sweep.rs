use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{run, EngineConfig};
use crate::error::{validation, Result};
use crate::io::summary::SummaryStats;

/// Herfindahl level above which a market counts as concentrated.
pub const CONCENTRATION_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    /// Final-record summaries, one per market.
    pub markets: Vec<SummaryStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Quantiles {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Quantiles {
            min: v[0],
            q10: at(0.1),
            median: at(0.5),
            q90: at(0.9),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketAggregate {
    pub market: String,
    pub herfindahl: Quantiles,
    pub firm_count: Quantiles,
    pub max_share: Quantiles,
    /// Fraction of seeds whose final Herfindahl exceeds the threshold.
    pub concentrated_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub threshold: f64,
    pub seeds: Vec<SeedSummary>,
    pub markets: Vec<MarketAggregate>,
}

/// Runs one replica per seed (in parallel) and aggregates final summaries.
/// The report does not depend on scheduling: results are kept in seed order.
pub fn sweep(config: &EngineConfig, seeds: &[u64], threshold: f64) -> Result<SweepReport> {
    if seeds.is_empty() {
        return Err(validation("sweep needs at least one seed"));
    }
    config.validate()?;
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let replica = EngineConfig { seed, ..config.clone() };
            let trace = run(&replica)?;
            let last = trace.last().expect("run always retains the final iteration");
            Ok(SeedSummary {
                seed,
                markets: last.markets.iter().map(SummaryStats::from).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let markets = config
        .market_names
        .iter()
        .enumerate()
        .map(|(m, name)| {
            let column = |f: &dyn Fn(&SummaryStats) -> f64| -> Vec<f64> {
                per_seed.iter().map(|s| f(&s.markets[m])).collect()
            };
            let h = column(&|s| s.herfindahl);
            MarketAggregate {
                market: name.clone(),
                concentrated_fraction: h.iter().filter(|&&x| x > threshold).count() as f64 / h.len() as f64,
                herfindahl: Quantiles::of(&h),
                firm_count: Quantiles::of(&column(&|s| s.firm_count as f64)),
                max_share: Quantiles::of(&column(&|s| s.max_share)),
            }
        })
        .collect();
    Ok(SweepReport {
        threshold,
        seeds: per_seed,
        markets,
    })
}

/// Parses `a..b` (exclusive), `a..=b`, or a comma-separated list.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| validation(format!("bad seed `{s}`")))
    };
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = text.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        text.split(',').map(num).collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(validation(format!("seed range `{text}` is empty")));
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let q = Quantiles::of(&[3.0, 1.0, 2.0, 4.0, 5.0]);
        assert_eq!(q.min, 1.0);
        assert_eq!(q.median, 3.0);
        assert_eq!(q.max, 5.0);
        assert!((q.q10 - 1.4).abs() < 1e-12);
        let single = Quantiles::of(&[0.7]);
        assert_eq!(single.q90, 0.7);
    }

    #[test]
    fn seed_syntax() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("1..=3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("5, 9").unwrap(), vec![5, 9]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("x").is_err());
    }
}
