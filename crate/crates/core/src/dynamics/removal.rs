use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::measures::pick_categorical;
use crate::state::{ParameterSet, SystemState};

/// Which firm loses a share unit at a transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RemovalPolicy {
    /// Every firm equally likely, `1 / K`.
    Neutral,
    /// Proportional to share, `n_j / n`.
    Proportional,
    /// `(1 - n_j / n) / (K - 1)`; undefined for a monopoly.
    Inverse,
    /// Any firm holding more than `threshold * n` units is selected with
    /// certainty; otherwise `inner` applies.
    Antitrust {
        threshold: f64,
        inner: Box<RemovalPolicy>,
    },
    /// Every unit equally likely, `1 / n`.
    UniformUnit,
}

impl RemovalPolicy {
    pub fn validate(&self) -> Result<()> {
        if let RemovalPolicy::Antitrust { threshold, inner } = self {
            if !(*threshold > 0.0 && *threshold < 1.0) {
                return Err(validation(format!(
                    "antitrust threshold {threshold} must lie in (0, 1)"
                )));
            }
            inner.validate()?;
        }
        Ok(())
    }
}

/// Firm-level removal probabilities for a cluster table given as
/// multiplicities (in cluster order).
pub fn removal_weights(policy: &RemovalPolicy, multiplicities: &[usize], n: usize) -> Result<Vec<f64>> {
    let k = multiplicities.len();
    if k == 0 || multiplicities.contains(&0) || multiplicities.iter().sum::<usize>() != n {
        return Err(Error::InvalidState(format!(
            "cluster multiplicities {multiplicities:?} do not partition {n} units"
        )));
    }
    let nf = n as f64;
    let weights = match policy {
        RemovalPolicy::Neutral => vec![1.0 / k as f64; k],
        RemovalPolicy::Proportional | RemovalPolicy::UniformUnit => {
            multiplicities.iter().map(|&m| m as f64 / nf).collect()
        }
        RemovalPolicy::Inverse => {
            if k < 2 {
                return Err(Error::UndefinedPolicy(
                    "inverse-share removal needs at least two firms".into(),
                ));
            }
            let denom = (k - 1) as f64;
            multiplicities
                .iter()
                .map(|&m| (1.0 - m as f64 / nf) / denom)
                .collect()
        }
        RemovalPolicy::Antitrust { threshold, inner } => {
            let cap = nf * threshold;
            let over: Vec<bool> = multiplicities.iter().map(|&m| m as f64 > cap).collect();
            let count = over.iter().filter(|&&o| o).count();
            if count == 0 {
                removal_weights(inner, multiplicities, n)?
            } else {
                over.iter()
                    .map(|&o| if o { 1.0 / count as f64 } else { 0.0 })
                    .collect()
            }
        }
    };
    Ok(weights)
}

/// Picks the market to update and the unit that loses its share.
///
/// Consumes, in order: one uniform for the market (only when there is more
/// than one), then either one index draw (`UniformUnit`) or one uniform for
/// the firm followed by one index draw within that firm.
pub fn select_target<R: Rng + ?Sized>(
    state: &SystemState,
    params: &ParameterSet,
    rng: &mut R,
) -> Result<(usize, usize)> {
    let market = if state.market_count() == 1 {
        0
    } else {
        pick_categorical(params.market_weights.iter().copied(), rng.random::<f64>())
    };
    let config = &state.markets[market];
    let n = config.len();
    let unit = match &params.removal {
        RemovalPolicy::UniformUnit => rng.random_range(0..n),
        policy => {
            let clusters = config.cluster_view();
            let mult: Vec<usize> = clusters.iter().map(|c| c.multiplicity).collect();
            let weights = removal_weights(policy, &mult, n)?;
            let firm = pick_categorical(weights.into_iter(), rng.random::<f64>());
            let units = config.firm_units(clusters[firm].label);
            units[rng.random_range(0..units.len())]
        }
    };
    Ok((market, unit))
}
