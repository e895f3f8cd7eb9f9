use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::measures::{sample_base, BaseMeasure};
use crate::state::{FirmLabel, MarketConfiguration};

const DISTINCT_DRAW_ATTEMPTS: usize = 10_000;

/// Initial configuration of one market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// `firms` distinct labels from the base measure sharing the units as
    /// evenly as possible; unit `i` goes to firm `i mod firms`.
    Competitive { firms: usize },
    Monopoly { label: FirmLabel },
    Custom { units: Vec<FirmLabel> },
}

pub fn initialize<R: Rng + ?Sized>(
    spec: &InitSpec,
    n: usize,
    base: &BaseMeasure,
    rng: &mut R,
) -> Result<MarketConfiguration> {
    match spec {
        InitSpec::Competitive { firms } => {
            let firms = *firms;
            if firms == 0 || firms > n {
                return Err(validation(format!(
                    "competitive start needs 1 <= firms <= n, got {firms} firms for n = {n}"
                )));
            }
            let mut labels: Vec<FirmLabel> = Vec::with_capacity(firms);
            let mut attempts = 0;
            while labels.len() < firms {
                let x = sample_base(base, rng);
                if !labels.contains(&x) {
                    labels.push(x);
                }
                attempts += 1;
                if attempts > DISTINCT_DRAW_ATTEMPTS + firms {
                    return Err(validation(format!(
                        "could not draw {firms} distinct labels from the base measure"
                    )));
                }
            }
            MarketConfiguration::new((0..n).map(|i| labels[i % firms]).collect())
        }
        InitSpec::Monopoly { label } => MarketConfiguration::monopoly(*label, n),
        InitSpec::Custom { units } => {
            if units.len() != n {
                return Err(validation(format!(
                    "custom start lists {} units, expected {n}",
                    units.len()
                )));
            }
            MarketConfiguration::new(units.clone())
        }
    }
}
