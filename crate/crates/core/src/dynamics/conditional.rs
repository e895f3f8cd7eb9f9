//! The full conditional of one share unit: a new firm drawn from the
//! (tilted) base measure, a firm copied from another market, or a firm
//! already present in the same market.

use rand::Rng;

use crate::error::{validation, Error, Result};
use crate::measures::{pick_categorical, weighted_total, EmpiricalMeasure};
use crate::state::{FirmLabel, ParameterSet, SystemState};

/// Unnormalized masses of the three destinations of a vacant share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchTerms {
    pub new_firm: f64,
    pub cross: f64,
    pub within: f64,
}

impl BranchTerms {
    pub fn total(&self) -> f64 {
        self.new_firm + self.cross + self.within
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchProbabilities {
    pub new_firm: f64,
    pub cross: f64,
    pub within: f64,
}

impl BranchProbabilities {
    pub fn sum(&self) -> f64 {
        self.new_firm + self.cross + self.within
    }
}

/// Where a vacant share went.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchOutcome {
    /// Freshly drawn label.
    NewFirm { label: FirmLabel },
    /// Copied from unit `unit` of the same market.
    Within { unit: usize, label: FirmLabel },
    /// Copied from unit `unit` of market `market`.
    Cross {
        market: usize,
        unit: usize,
        label: FirmLabel,
    },
}

impl BranchOutcome {
    pub fn label(&self) -> FirmLabel {
        match *self {
            BranchOutcome::NewFirm { label }
            | BranchOutcome::Within { label, .. }
            | BranchOutcome::Cross { label, .. } => label,
        }
    }
}

/// `pi` as it acts in market `market`: a lone market has no cross-market
/// branch, so all of `theta` goes to new firms.
pub fn effective_pi(params: &ParameterSet, market: usize) -> f64 {
    if params.market_count() == 1 {
        1.0
    } else {
        params.pi[market]
    }
}

/// Per-source-market cross weights `m(r, r') * n^-1 sum_j beta(x^{r'}_j, mu_{r'})`.
fn cross_weights(state: &SystemState, market: usize, params: &ParameterSet) -> Result<Vec<f64>> {
    let n = state.units_per_market();
    let neutral = params.selection.is_neutral();
    let mut weights = Vec::with_capacity(state.market_count());
    for (source, config) in state.markets.iter().enumerate() {
        let m = params.migration.get(market, source);
        let w = if source == market || m == 0.0 {
            0.0
        } else if neutral {
            m
        } else {
            m * weighted_total(&EmpiricalMeasure::of(config), &params.selection)? / n as f64
        };
        weights.push(w);
    }
    Ok(weights)
}

fn terms_with(state: &SystemState, market: usize, unit: usize, params: &ParameterSet) -> Result<(BranchTerms, Vec<f64>)> {
    let config = &state.markets[market];
    let n = config.len();
    if unit >= n {
        return Err(Error::InvalidState(format!("unit {unit} out of range for n = {n}")));
    }
    let theta = params.theta[market];
    let pi = effective_pi(params, market);
    let new_mass = theta * pi;
    let cross_mass = theta * (1.0 - pi);
    let selection = &params.selection;

    let cross_by_market = if cross_mass > 0.0 {
        cross_weights(state, market, params)?
    } else {
        vec![0.0; state.market_count()]
    };

    let terms = if selection.is_neutral() {
        BranchTerms {
            new_firm: new_mass,
            cross: if cross_mass > 0.0 { cross_mass * cross_by_market.iter().sum::<f64>() } else { 0.0 },
            within: (n - 1) as f64,
        }
    } else {
        let vacant = EmpiricalMeasure::without_unit(config, unit);
        let new_firm = if new_mass > 0.0 {
            new_mass * selection.base_integral(&params.base[market], &vacant, n)?
        } else {
            0.0
        };
        BranchTerms {
            new_firm,
            cross: cross_mass * cross_by_market.iter().sum::<f64>(),
            within: weighted_total(&vacant, selection)?,
        }
    };
    if ![terms.new_firm, terms.cross, terms.within].iter().all(|t| t.is_finite()) {
        return Err(validation(format!("non-finite branch terms {terms:?}")));
    }
    if terms.total() <= 0.0 {
        return Err(Error::Degenerate(format!(
            "no destination for unit {unit} of market {market} (theta = {theta}, n = {n})"
        )));
    }
    Ok((terms, cross_by_market))
}

/// The three unnormalized terms of the full conditional of unit `unit` in
/// market `market`.
pub fn branch_terms(state: &SystemState, market: usize, unit: usize, params: &ParameterSet) -> Result<BranchTerms> {
    terms_with(state, market, unit, params).map(|(t, _)| t)
}

/// Normalizing constant of the full conditional. Equals `theta + n - 1`
/// exactly when `beta` is identically one.
pub fn normalizer(state: &SystemState, market: usize, unit: usize, params: &ParameterSet) -> Result<f64> {
    let terms = branch_terms(state, market, unit, params)?;
    if params.selection.is_neutral() {
        Ok(params.theta[market] + (state.units_per_market() - 1) as f64)
    } else {
        Ok(terms.total())
    }
}

pub fn branch_probabilities(
    state: &SystemState,
    market: usize,
    unit: usize,
    params: &ParameterSet,
) -> Result<BranchProbabilities> {
    let terms = branch_terms(state, market, unit, params)?;
    let total = terms.total();
    Ok(BranchProbabilities {
        new_firm: terms.new_firm / total,
        cross: terms.cross / total,
        within: terms.within / total,
    })
}

/// Draws a new label for unit `unit` of market `market` from its full
/// conditional. The state is not modified.
///
/// Consumes one uniform for the branch, then: for a new firm, whatever the
/// tilted base sampler needs; within the market, one index draw (neutral
/// selection) or one uniform for the firm plus one index draw; across
/// markets, one uniform for the source market, then the same as within.
pub fn sample_full_conditional<R: Rng + ?Sized>(
    state: &SystemState,
    market: usize,
    unit: usize,
    params: &ParameterSet,
    rng: &mut R,
) -> Result<BranchOutcome> {
    let (terms, cross_by_market) = terms_with(state, market, unit, params)?;
    let config = &state.markets[market];
    let n = config.len();
    let selection = &params.selection;
    let neutral = selection.is_neutral();
    let branch = pick_categorical(
        [terms.new_firm, terms.cross, terms.within].into_iter(),
        rng.random::<f64>(),
    );
    match branch {
        0 => {
            let vacant = EmpiricalMeasure::without_unit(config, unit);
            let label = selection.sample_tilted_base(&params.base[market], &vacant, n, rng)?;
            Ok(BranchOutcome::NewFirm { label })
        }
        1 => {
            let source = pick_categorical(cross_by_market.iter().copied(), rng.random::<f64>());
            let src = &state.markets[source];
            let picked = if neutral {
                rng.random_range(0..n)
            } else {
                pick_weighted_unit(&EmpiricalMeasure::of(src), None, selection, n, rng)?
            };
            Ok(BranchOutcome::Cross {
                market: source,
                unit: picked,
                label: src.label(picked),
            })
        }
        _ => {
            let picked = if neutral {
                let k = rng.random_range(0..n - 1);
                if k >= unit {
                    k + 1
                } else {
                    k
                }
            } else {
                let vacant = EmpiricalMeasure::without_unit(config, unit);
                pick_weighted_unit(&vacant, Some(unit), selection, n, rng)?
            };
            Ok(BranchOutcome::Within {
                unit: picked,
                label: config.label(picked),
            })
        }
    }
}

/// Picks a firm with probability proportional to `n_j * beta(x_j, mu)`, then
/// one of its units (other than `skip`) uniformly.
fn pick_weighted_unit<R: Rng + ?Sized>(
    mu: &EmpiricalMeasure<'_>,
    skip: Option<usize>,
    selection: &crate::dynamics::SelectionSpec,
    n: usize,
    rng: &mut R,
) -> Result<usize> {
    let clusters: Vec<_> = mu.clusters().collect();
    let mut weights = Vec::with_capacity(clusters.len());
    for c in &clusters {
        weights.push(c.multiplicity as f64 * selection.weight(c.label, mu, n)?);
    }
    let firm = clusters[pick_categorical(weights.into_iter(), rng.random::<f64>())];
    let units = mu.config().firm_units(firm.label);
    match skip.and_then(|s| units.iter().position(|&u| u == s)) {
        Some(pos) => {
            let k = rng.random_range(0..units.len() - 1);
            Ok(units[if k >= pos { k + 1 } else { k }])
        }
        None => Ok(units[rng.random_range(0..units.len())]),
    }
}
