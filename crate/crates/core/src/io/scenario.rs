//! TOML scenario files.
//!
//! ```toml
//! schema_version = 1
//! n = 500
//! iterations = 500000
//! seed = 1
//!
//! [[market]]
//! name = "a"
//! theta = 1.0
//! pi = 1.0
//! base = { kind = "beta", a = 1.0, b = 1.0 }
//! init = { kind = "competitive", firms = 10 }
//!
//! [[schedule]]
//! at = 200
//! theta = 100.0
//! ```
//!
//! Market-level `theta`, `pi` and `base` become the per-market parameter
//! vectors. `migration`, `market_weights`, `removal`, `selection`,
//! `retention`, `bins`, `mode` and `lambda_n` are optional top-level keys.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::dynamics::{MigrationKernel, RemovalPolicy, SelectionSpec};
use crate::engine::{EngineConfig, InitSpec, Mode, RetentionPlan};
use crate::error::{Error, Result};
use crate::measures::{BaseMeasure, DEFAULT_BINS};
use crate::state::{MarketValue, ParameterPatch, ParameterSet, Schedule, ScheduleEntry};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub n: usize,
    pub iterations: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market_weights: Option<Spanned<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub migration: Option<Spanned<MigrationKernel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removal: Option<RemovalPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retention: Option<RetentionPlan>,
    pub market: Vec<Spanned<MarketFile>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<Spanned<ScheduleFile>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketFile {
    pub name: String,
    pub theta: f64,
    #[serde(default = "one")]
    pub pi: f64,
    pub base: BaseMeasure,
    pub init: InitSpec,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    pub at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<MarketValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<MarketValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub migration: Option<MigrationKernel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removal: Option<RemovalPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Vec<BaseMeasure>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_n: Option<f64>,
}

fn line_of(text: &str, span: &Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

fn at_line(text: &str, span: &Range<usize>, what: &str, err: Error) -> Error {
    let detail = match err {
        Error::Validation(m) | Error::InvalidState(m) | Error::UndefinedPolicy(m) => m,
        other => other.to_string(),
    };
    Error::Scenario(format!("line {}: {what}: {detail}", line_of(text, span)))
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<EngineConfig> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Scenario(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    if file.market.is_empty() {
        return Err(Error::Scenario("at least one [[market]] is required".into()));
    }
    let markets = file.market.len();
    let whole = 0..0;
    let mut params = ParameterSet {
        theta: file.market.iter().map(|m| m.get_ref().theta).collect(),
        pi: file.market.iter().map(|m| m.get_ref().pi).collect(),
        migration: MigrationKernel::uniform(markets),
        market_weights: vec![1.0 / markets as f64; markets],
        removal: file.removal.clone().unwrap_or(RemovalPolicy::UniformUnit),
        selection: file.selection.clone().unwrap_or_default(),
        base: file.market.iter().map(|m| m.get_ref().base.clone()).collect(),
        lambda_n: file.lambda_n,
    };
    for (r, market) in file.market.iter().enumerate() {
        let m = market.get_ref();
        let one_market = ParameterSet::uniform(1, m.theta, m.pi, m.base.clone());
        one_market
            .validate()
            .map_err(|e| at_line(text, &market.span(), &format!("market[{r}] ({})", m.name), e))?;
    }
    if let Some(weights) = &file.market_weights {
        params.market_weights = weights.get_ref().clone();
        let mut probe = ParameterSet::uniform(markets, 0.0, 1.0, BaseMeasure::uniform());
        probe.market_weights = params.market_weights.clone();
        probe.validate().map_err(|e| at_line(text, &weights.span(), "market_weights", e))?;
    }
    if let Some(migration) = &file.migration {
        params.migration = migration.get_ref().clone();
        let mut probe = ParameterSet::uniform(markets, 0.0, 1.0, BaseMeasure::uniform());
        probe.migration = params.migration.clone();
        probe.validate().map_err(|e| at_line(text, &migration.span(), "migration", e))?;
    }
    params.validate().map_err(|e| at_line(text, &whole, "parameters", e))?;

    let mut entries = Vec::with_capacity(file.schedule.len());
    for entry in &file.schedule {
        let s = entry.get_ref();
        entries.push(ScheduleEntry {
            at: s.at,
            patch: ParameterPatch {
                theta: s.theta.clone(),
                pi: s.pi.clone(),
                migration: s.migration.clone(),
                market_weights: s.market_weights.clone(),
                removal: s.removal.clone(),
                selection: s.selection.clone(),
                base: s.base.clone(),
                lambda_n: s.lambda_n,
            },
        });
        let so_far = Schedule::new(entries.clone())
            .map_err(|e| at_line(text, &entry.span(), &format!("schedule at {}", s.at), e))?;
        let probe = EngineConfig {
            schedule: so_far,
            ..config_from(&file, params.clone(), Schedule::default())
        };
        probe
            .validate()
            .map_err(|e| at_line(text, &entry.span(), &format!("schedule at {}", s.at), e))?;
    }
    let schedule = Schedule::new(entries).map_err(|e| Error::Scenario(e.to_string()))?;
    let config = config_from(&file, params, schedule);
    config.validate().map_err(|e| at_line(text, &whole, "scenario", e))?;
    Ok(config)
}

fn config_from(file: &ScenarioFile, params: ParameterSet, schedule: Schedule) -> EngineConfig {
    EngineConfig {
        n: file.n,
        market_names: file.market.iter().map(|m| m.get_ref().name.clone()).collect(),
        init: file.market.iter().map(|m| m.get_ref().init.clone()).collect(),
        params,
        schedule,
        iterations: file.iterations,
        retention: file.retention.clone().unwrap_or_default(),
        seed: file.seed,
        mode: file.mode.unwrap_or_default(),
        bins: file.bins.unwrap_or(DEFAULT_BINS),
    }
}

/// The document form of a config, with every default made explicit.
pub fn scenario_file(config: &EngineConfig) -> Result<ScenarioFile> {
    let custom = |s: &SelectionSpec| matches!(s, SelectionSpec::Custom(_));
    if custom(&config.params.selection)
        || config
            .schedule
            .entries()
            .iter()
            .any(|e| e.patch.selection.as_ref().is_some_and(custom))
    {
        return Err(Error::Scenario("custom selection weights cannot be written to a scenario file".into()));
    }
    let p = &config.params;
    let unspanned = |r| Spanned::new(0..0, r);
    Ok(ScenarioFile {
        schema_version: SCHEMA_VERSION,
        n: config.n,
        iterations: config.iterations,
        seed: config.seed,
        bins: Some(config.bins),
        mode: Some(config.mode),
        lambda_n: p.lambda_n,
        market_weights: Some(Spanned::new(0..0, p.market_weights.clone())),
        migration: Some(Spanned::new(0..0, p.migration.clone())),
        removal: Some(p.removal.clone()),
        selection: Some(p.selection.clone()),
        retention: Some(config.retention.clone()),
        market: (0..config.market_count())
            .map(|r| {
                unspanned(MarketFile {
                    name: config.market_names[r].clone(),
                    theta: p.theta[r],
                    pi: p.pi[r],
                    base: p.base[r].clone(),
                    init: config.init[r].clone(),
                })
            })
            .collect(),
        schedule: config
            .schedule
            .entries()
            .iter()
            .map(|e| {
                Spanned::new(
                    0..0,
                    ScheduleFile {
                        at: e.at,
                        theta: e.patch.theta.clone(),
                        pi: e.patch.pi.clone(),
                        migration: e.patch.migration.clone(),
                        market_weights: e.patch.market_weights.clone(),
                        removal: e.patch.removal.clone(),
                        selection: e.patch.selection.clone(),
                        base: e.patch.base.clone(),
                        lambda_n: e.patch.lambda_n,
                    },
                )
            })
            .collect(),
    })
}

/// Serializes a config so that [`parse_scenario`] reads it back unchanged.
pub fn to_scenario(config: &EngineConfig) -> Result<String> {
    let file = scenario_file(config)?;
    toml::to_string(&file).map_err(|e| Error::Scenario(e.to_string()))
}
