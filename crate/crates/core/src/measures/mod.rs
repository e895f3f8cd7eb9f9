//! Base measures for new-firm labels, empirical measures of a market, and
//! histogram summaries.

mod quadrature;

pub use quadrature::{beta_rule, BetaRule};

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta as BetaDist, ContinuousCDF};

use crate::dynamics::SelectionSpec;
use crate::error::{validation, Result};
use crate::state::{Cluster, FirmLabel, MarketConfiguration};

pub const DEFAULT_BINS: usize = 15;

/// Law of a brand-new firm label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseMeasure {
    Beta { a: f64, b: f64 },
    Discrete { atoms: Vec<FirmLabel>, weights: Vec<f64> },
}

impl BaseMeasure {
    pub fn uniform() -> Self {
        BaseMeasure::Beta { a: 1.0, b: 1.0 }
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        let m = BaseMeasure::Beta { a, b };
        m.validate()?;
        Ok(m)
    }

    pub fn discrete(atoms: &[f64], weights: &[f64]) -> Result<Self> {
        let atoms = atoms
            .iter()
            .map(|&v| FirmLabel::new(v))
            .collect::<Result<Vec<_>>>()?;
        let m = BaseMeasure::Discrete {
            atoms,
            weights: weights.to_vec(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BaseMeasure::Beta { a, b } => {
                if !(a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0) {
                    return Err(validation(format!("beta({a}, {b}) needs a, b > 0")));
                }
            }
            BaseMeasure::Discrete { atoms, weights } => {
                if atoms.is_empty() || atoms.len() != weights.len() {
                    return Err(validation("discrete base needs one weight per atom"));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(validation("discrete base weights must be nonnegative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(validation(format!("discrete base weights sum to {total}")));
                }
                let mut sorted = atoms.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != atoms.len() {
                    return Err(validation("discrete base atoms must be distinct"));
                }
            }
        }
        Ok(())
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, BaseMeasure::Discrete { .. })
    }

    /// `P(Z < t)` for `Z` drawn from this measure.
    pub fn prob_below(&self, t: f64) -> f64 {
        match self {
            BaseMeasure::Beta { a, b } => {
                if t <= 0.0 {
                    0.0
                } else if t >= 1.0 {
                    1.0
                } else {
                    BetaDist::new(*a, *b).expect("validated").cdf(t)
                }
            }
            BaseMeasure::Discrete { atoms, weights } => atoms
                .iter()
                .zip(weights)
                .filter(|(x, _)| x.value() < t)
                .map(|(_, w)| w)
                .sum(),
        }
    }

    /// `E[f(Z)]`: exact for discrete measures, 64-node Gauss–Jacobi for Beta.
    pub fn expect(&self, mut f: impl FnMut(FirmLabel) -> f64) -> f64 {
        match self {
            BaseMeasure::Beta { a, b } => {
                beta_rule(*a, *b).expect(|x| f(FirmLabel::new(x).expect("node in [0,1]")))
            }
            BaseMeasure::Discrete { atoms, weights } => atoms
                .iter()
                .zip(weights)
                .map(|(&x, &w)| if w > 0.0 { w * f(x) } else { 0.0 })
                .sum(),
        }
    }
}

/// Draws one label from the base measure.
pub fn sample_base<R: Rng + ?Sized>(measure: &BaseMeasure, rng: &mut R) -> FirmLabel {
    match measure {
        BaseMeasure::Beta { a, b } => {
            let x: f64 = Beta::new(*a, *b).expect("validated").sample(rng);
            FirmLabel::new(x.clamp(0.0, 1.0)).expect("clamped")
        }
        BaseMeasure::Discrete { atoms, weights } => {
            atoms[pick_categorical(weights.iter().copied(), rng.random::<f64>())]
        }
    }
}

/// Mean of the base measure.
pub fn base_mean(measure: &BaseMeasure) -> f64 {
    match measure {
        BaseMeasure::Beta { a, b } => a / (a + b),
        BaseMeasure::Discrete { atoms, weights } => {
            atoms.iter().zip(weights).map(|(x, w)| w * x.value()).sum()
        }
    }
}

/// Inverse-CDF pick from unnormalized nonnegative weights, given
/// `u ~ Unif[0, 1)`. Zero-weight entries are never returned unless every
/// weight is zero.
pub(crate) fn pick_categorical(weights: impl Iterator<Item = f64> + Clone, u: f64) -> usize {
    let total: f64 = weights.clone().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, w) in weights.enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = k;
            if target < acc {
                return k;
            }
        }
    }
    last_positive
}

/// Empirical measure of a market, `n^-1 sum_i delta_{x_i}`, optionally with
/// one unit left out (the vacant share during an update).
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalMeasure<'a> {
    config: &'a MarketConfiguration,
    excluded: Option<FirmLabel>,
}

impl<'a> EmpiricalMeasure<'a> {
    pub fn of(config: &'a MarketConfiguration) -> Self {
        EmpiricalMeasure {
            config,
            excluded: None,
        }
    }

    /// The measure with unit `unit` removed.
    pub fn without_unit(config: &'a MarketConfiguration, unit: usize) -> Self {
        EmpiricalMeasure {
            config,
            excluded: Some(config.label(unit)),
        }
    }

    pub fn config(&self) -> &'a MarketConfiguration {
        self.config
    }

    /// Number of units carried by the measure.
    pub fn unit_count(&self) -> usize {
        self.config.len() - usize::from(self.excluded.is_some())
    }

    pub fn multiplicity(&self, label: FirmLabel) -> usize {
        let m = self.config.multiplicity(label);
        if self.excluded == Some(label) {
            m - 1
        } else {
            m
        }
    }

    pub fn mass(&self, label: FirmLabel) -> f64 {
        self.multiplicity(label) as f64 / self.unit_count() as f64
    }

    pub fn clusters(&self) -> impl Iterator<Item = Cluster> + '_ {
        let excluded = self.excluded;
        self.config.clusters().filter_map(move |c| {
            let multiplicity = c.multiplicity - usize::from(excluded == Some(c.label));
            (multiplicity > 0).then_some(Cluster {
                label: c.label,
                multiplicity,
            })
        })
    }

    pub fn firm_count(&self) -> usize {
        self.clusters().count()
    }
}

/// Counts of a market's labels over `bin_count` equal cells of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn edges(&self) -> Vec<f64> {
        let b = self.counts.len();
        (0..=b).map(|k| bin_edge(k, b)).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn bin_edge(k: usize, bins: usize) -> f64 {
    k as f64 / bins as f64
}

/// Cell of `x` under half-open cells `[e_k, e_{k+1})`, the last one closed.
pub fn bin_index(x: f64, bins: usize) -> usize {
    let mut k = ((x * bins as f64).floor().max(0.0) as usize).min(bins - 1);
    while k + 1 < bins && x >= bin_edge(k + 1, bins) {
        k += 1;
    }
    while k > 0 && x < bin_edge(k, bins) {
        k -= 1;
    }
    k
}

pub fn histogram(config: &MarketConfiguration, bin_count: usize) -> Result<Histogram> {
    if bin_count == 0 {
        return Err(validation("histogram needs at least one bin"));
    }
    let mut counts = vec![0u64; bin_count];
    for c in config.clusters() {
        counts[bin_index(c.label.value(), bin_count)] += c.multiplicity as u64;
    }
    Ok(Histogram { counts })
}

/// `sum_k beta(x_k, mu)` over the units of `measure`, computed per cluster.
pub fn weighted_total(measure: &EmpiricalMeasure<'_>, selection: &SelectionSpec) -> Result<f64> {
    let n = measure.config().len();
    let mut total = 0.0;
    for c in measure.clusters() {
        total += c.multiplicity as f64 * selection.weight(c.label, measure, n)?;
    }
    Ok(total)
}

/// `sum_k beta(x_k, mu_r)` over every unit of the market.
pub fn weighted_empirical_total(
    config: &MarketConfiguration,
    selection: &SelectionSpec,
) -> Result<f64> {
    weighted_total(&EmpiricalMeasure::of(config), selection)
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
