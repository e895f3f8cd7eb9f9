//! System state: firm labels, per-market configurations with incremental
//! cluster bookkeeping, and the parameter and schedule types.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::dynamics::{MigrationKernel, RemovalPolicy, SelectionSpec};
use crate::error::{validation, Error, Result};
use crate::measures::BaseMeasure;

/// A firm identifier: a point of the type space `[0, 1]`.
///
/// Equality is exact. Two share units belong to the same firm iff their
/// labels carry the same value, which only happens through copying.
#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FirmLabel(f64);

impl FirmLabel {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(validation(format!("firm label {value} outside [0, 1]")));
        }
        // -0.0 and 0.0 must hash and compare alike
        Ok(FirmLabel(if value == 0.0 { 0.0 } else { value }))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for FirmLabel {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        FirmLabel::new(value)
    }
}

impl From<FirmLabel> for f64 {
    fn from(label: FirmLabel) -> f64 {
        label.0
    }
}

impl PartialEq for FirmLabel {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for FirmLabel {}

impl PartialOrd for FirmLabel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FirmLabel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Hash for FirmLabel {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

impl fmt::Debug for FirmLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FirmLabel({})", self.0)
    }
}

impl fmt::Display for FirmLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// One row of the cluster table: a firm and its number of share units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cluster {
    pub label: FirmLabel,
    pub multiplicity: usize,
}

/// Builds the cluster table of a unit list from scratch, ordered by label.
pub fn cluster_table(units: &[FirmLabel]) -> Result<Vec<Cluster>> {
    if units.is_empty() {
        return Err(Error::InvalidState("market has no share units".into()));
    }
    let mut counts: BTreeMap<FirmLabel, usize> = BTreeMap::new();
    for &label in units {
        *counts.entry(label).or_default() += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(label, multiplicity)| Cluster {
            label,
            multiplicity,
        })
        .collect())
}

/// The `n` share units of one market together with an incrementally
/// maintained index from each firm to the units it holds.
#[derive(Clone)]
pub struct MarketConfiguration {
    units: Vec<FirmLabel>,
    members: BTreeMap<FirmLabel, Vec<usize>>,
    // position of unit i inside members[units[i]]
    slot: Vec<usize>,
}

impl MarketConfiguration {
    pub fn new(units: Vec<FirmLabel>) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::InvalidState("market has no share units".into()));
        }
        let mut members: BTreeMap<FirmLabel, Vec<usize>> = BTreeMap::new();
        let mut slot = Vec::with_capacity(units.len());
        for (i, &label) in units.iter().enumerate() {
            let list = members.entry(label).or_default();
            slot.push(list.len());
            list.push(i);
        }
        Ok(MarketConfiguration {
            units,
            members,
            slot,
        })
    }

    pub fn from_values(values: &[f64]) -> Result<Self> {
        let units = values
            .iter()
            .map(|&v| FirmLabel::new(v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(units)
    }

    /// A single firm holding every unit.
    pub fn monopoly(label: FirmLabel, n: usize) -> Result<Self> {
        Self::new(vec![label; n])
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn units(&self) -> &[FirmLabel] {
        &self.units
    }

    pub fn label(&self, unit: usize) -> FirmLabel {
        self.units[unit]
    }

    /// Number of distinct firms, `K_n`.
    pub fn firm_count(&self) -> usize {
        self.members.len()
    }

    pub fn multiplicity(&self, label: FirmLabel) -> usize {
        self.members.get(&label).map_or(0, Vec::len)
    }

    /// Units held by a firm, in maintenance order.
    pub fn firm_units(&self, label: FirmLabel) -> &[usize] {
        self.members.get(&label).map_or(&[], Vec::as_slice)
    }

    /// Cluster table ordered by ascending label.
    pub fn clusters(&self) -> impl ExactSizeIterator<Item = Cluster> + '_ {
        self.members.iter().map(|(&label, list)| Cluster {
            label,
            multiplicity: list.len(),
        })
    }

    pub fn cluster_view(&self) -> Vec<Cluster> {
        self.clusters().collect()
    }

    /// Reassigns one share unit and returns the label it held before.
    pub fn replace(&mut self, unit: usize, label: FirmLabel) -> FirmLabel {
        let old = self.units[unit];
        if old == label {
            return old;
        }
        let pos = self.slot[unit];
        let list = self.members.get_mut(&old).expect("unit indexed under its label");
        list.swap_remove(pos);
        if let Some(&moved) = list.get(pos) {
            self.slot[moved] = pos;
        }
        if list.is_empty() {
            self.members.remove(&old);
        }
        let list = self.members.entry(label).or_default();
        self.slot[unit] = list.len();
        list.push(unit);
        self.units[unit] = label;
        old
    }

    /// Compares the incremental index against a full rebuild.
    pub fn check_consistency(&self) -> Result<()> {
        let rebuilt = cluster_table(&self.units)?;
        if rebuilt != self.cluster_view() {
            return Err(Error::InvalidState(
                "incremental cluster table diverged from rebuild".into(),
            ));
        }
        for (&label, list) in &self.members {
            for (pos, &unit) in list.iter().enumerate() {
                if self.units[unit] != label || self.slot[unit] != pos {
                    return Err(Error::InvalidState(format!(
                        "unit {unit} mis-indexed under firm {label}"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl PartialEq for MarketConfiguration {
    fn eq(&self, other: &Self) -> bool {
        self.units == other.units
    }
}

impl fmt::Debug for MarketConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MarketConfiguration")
            .field("n", &self.units.len())
            .field("clusters", &self.cluster_view())
            .finish()
    }
}

/// Every market of the system plus the chain's position in time.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub markets: Vec<MarketConfiguration>,
    pub iteration: u64,
    pub clock: f64,
}

impl SystemState {
    pub fn new(markets: Vec<MarketConfiguration>) -> Result<Self> {
        let n = markets
            .first()
            .ok_or_else(|| Error::InvalidState("system has no markets".into()))?
            .len();
        if markets.iter().any(|m| m.len() != n) {
            return Err(Error::InvalidState(
                "all markets must hold the same number of share units".into(),
            ));
        }
        Ok(SystemState {
            markets,
            iteration: 0,
            clock: 0.0,
        })
    }

    /// Share units per market.
    pub fn units_per_market(&self) -> usize {
        self.markets[0].len()
    }

    pub fn market_count(&self) -> usize {
        self.markets.len()
    }

    /// Total number of components, `n` times the number of markets.
    pub fn total_components(&self) -> usize {
        self.units_per_market() * self.market_count()
    }
}

/// A scalar applied to every market, or one value per market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarketValue {
    All(f64),
    Each(Vec<f64>),
}

impl MarketValue {
    pub fn resolve(&self, markets: usize) -> Result<Vec<f64>> {
        match self {
            MarketValue::All(v) => Ok(vec![*v; markets]),
            MarketValue::Each(vs) if vs.len() == markets => Ok(vs.clone()),
            MarketValue::Each(vs) => Err(validation(format!(
                "expected {markets} per-market values, got {}",
                vs.len()
            ))),
        }
    }

    /// Collapses to `All` when every entry agrees.
    pub fn compact(values: &[f64]) -> MarketValue {
        match values.split_first() {
            Some((first, rest)) if rest.iter().all(|v| v.to_bits() == first.to_bits()) => {
                MarketValue::All(*first)
            }
            _ => MarketValue::Each(values.to_vec()),
        }
    }
}

/// Model parameters. Entry mass `theta` and sunk-cost split `pi` are held
/// per market so that scenarios with structurally different markets can be
/// expressed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub theta: Vec<f64>,
    pub pi: Vec<f64>,
    pub migration: MigrationKernel,
    pub market_weights: Vec<f64>,
    pub removal: RemovalPolicy,
    pub selection: SelectionSpec,
    pub base: Vec<BaseMeasure>,
    /// Poisson clock intensity; `None` means `n^2` times the number of markets.
    pub lambda_n: Option<f64>,
}

const SIMPLEX_TOL: f64 = 1e-9;

impl ParameterSet {
    /// Parameters for `markets` markets sharing one base measure, uniform
    /// market weights and uniform migration between distinct markets.
    pub fn uniform(markets: usize, theta: f64, pi: f64, base: BaseMeasure) -> Self {
        ParameterSet {
            theta: vec![theta; markets],
            pi: vec![pi; markets],
            migration: MigrationKernel::uniform(markets),
            market_weights: vec![1.0 / markets as f64; markets],
            removal: RemovalPolicy::UniformUnit,
            selection: SelectionSpec::Unit,
            base: vec![base; markets],
            lambda_n: None,
        }
    }

    pub fn market_count(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let markets = self.theta.len();
        if markets == 0 {
            return Err(validation("at least one market is required"));
        }
        if self.pi.len() != markets
            || self.base.len() != markets
            || self.market_weights.len() != markets
        {
            return Err(validation(
                "theta, pi, base and market_weights must have one entry per market",
            ));
        }
        for (r, &theta) in self.theta.iter().enumerate() {
            if !(theta.is_finite() && theta >= 0.0) {
                return Err(validation(format!("theta[{r}] = {theta} must be finite and >= 0")));
            }
        }
        for (r, &pi) in self.pi.iter().enumerate() {
            if !(0.0..=1.0).contains(&pi) {
                return Err(validation(format!("pi[{r}] = {pi} must lie in [0, 1]")));
            }
        }
        if self.market_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(validation("market weights must be nonnegative"));
        }
        let total: f64 = self.market_weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(validation(format!("market weights sum to {total}, not 1")));
        }
        if self.migration.size() != markets {
            return Err(validation(format!(
                "migration kernel is {0}x{0} but there are {markets} markets",
                self.migration.size()
            )));
        }
        self.migration.validate()?;
        self.removal.validate()?;
        for base in &self.base {
            base.validate()?;
        }
        self.selection.validate_shape()?;
        if let Some(lambda) = self.lambda_n {
            if !(lambda.is_finite() && lambda > 0.0) {
                return Err(validation(format!("lambda_n = {lambda} must be positive")));
            }
        }
        Ok(())
    }
}

/// Partial parameter set applied at a scheduled iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterPatch {
    pub theta: Option<MarketValue>,
    pub pi: Option<MarketValue>,
    pub migration: Option<MigrationKernel>,
    pub market_weights: Option<Vec<f64>>,
    pub removal: Option<RemovalPolicy>,
    pub selection: Option<SelectionSpec>,
    pub base: Option<Vec<BaseMeasure>>,
    pub lambda_n: Option<f64>,
}

impl ParameterPatch {
    pub fn is_empty(&self) -> bool {
        *self == ParameterPatch::default()
    }
}

/// Returns `params` with the fields present in `patch` overwritten. The
/// result is validated as a whole.
pub fn apply_patch(params: &ParameterSet, patch: &ParameterPatch) -> Result<ParameterSet> {
    let markets = params.market_count();
    let mut next = params.clone();
    if let Some(theta) = &patch.theta {
        next.theta = theta.resolve(markets)?;
    }
    if let Some(pi) = &patch.pi {
        next.pi = pi.resolve(markets)?;
    }
    if let Some(migration) = &patch.migration {
        next.migration = migration.clone();
    }
    if let Some(weights) = &patch.market_weights {
        next.market_weights = weights.clone();
    }
    if let Some(removal) = &patch.removal {
        next.removal = removal.clone();
    }
    if let Some(selection) = &patch.selection {
        next.selection = selection.clone();
    }
    if let Some(base) = &patch.base {
        next.base = base.clone();
    }
    if let Some(lambda) = patch.lambda_n {
        next.lambda_n = Some(lambda);
    }
    next.validate()?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEntry {
    pub at: u64,
    pub patch: ParameterPatch,
}

/// Timed parameter patches. A patch triggered at iteration `t` takes effect
/// before the `t`-th update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schedule {
    entries: Vec<ScheduleEntry>,
}

impl Schedule {
    pub fn new(entries: Vec<ScheduleEntry>) -> Result<Self> {
        for pair in entries.windows(2) {
            if pair[1].at <= pair[0].at {
                return Err(validation(format!(
                    "schedule triggers must be strictly increasing ({} then {})",
                    pair[0].at, pair[1].at
                )));
            }
        }
        if let Some(first) = entries.first() {
            if first.at == 0 {
                return Err(validation("schedule triggers start at iteration 1"));
            }
        }
        Ok(Schedule { entries })
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
