//! Drives the random-scan Gibbs chain: scheduled parameter changes, the
//! optional Poisson clock, and snapshot retention.
//!
//! # Reproducibility
//!
//! A replica is fully determined by its seed. Two independent ChaCha8
//! streams are derived from it: stream 0 drives the chain and stream 1 the
//! Poisson clock, so a continuous-time run visits exactly the same states as
//! a discrete run with the same seed. Within one update stream 0 is consumed
//! in this order: market choice, unit choice ([`select_target`]), branch
//! choice and label draw ([`sample_full_conditional`]). Competitive initial
//! configurations are drawn from stream 0 before the first update, market by
//! market.

mod init;
mod trace;

pub use init::{initialize, InitSpec};
pub use trace::{EventTally, MarketSnapshot, RetentionPlan, Trace, TraceRecord, DEFAULT_RETAINED};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::dynamics::{sample_full_conditional, select_target, BranchOutcome};
use crate::error::{validation, Result};
use crate::io::summary::{herfindahl, max_share};
use crate::measures::{histogram, DEFAULT_BINS};
use crate::state::{apply_patch, FirmLabel, ParameterSet, Schedule, SystemState};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Discrete,
    /// Updates occur at the points of a Poisson process of intensity
    /// `lambda_n` (see [`ParameterSet::lambda_n`]).
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub n: usize,
    pub market_names: Vec<String>,
    pub init: Vec<InitSpec>,
    pub params: ParameterSet,
    pub schedule: Schedule,
    /// Number of single-unit updates (not sweeps).
    pub iterations: u64,
    pub retention: RetentionPlan,
    pub seed: u64,
    pub mode: Mode,
    pub bins: usize,
}

impl EngineConfig {
    /// A config with default names, no schedule, default retention and bins.
    pub fn new(n: usize, init: Vec<InitSpec>, params: ParameterSet, iterations: u64, seed: u64) -> Self {
        let market_names = (0..init.len()).map(default_market_name).collect();
        EngineConfig {
            n,
            market_names,
            init,
            params,
            schedule: Schedule::default(),
            iterations,
            retention: RetentionPlan::default(),
            seed,
            mode: Mode::Discrete,
            bins: DEFAULT_BINS,
        }
    }

    pub fn market_count(&self) -> usize {
        self.init.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(validation("n must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(validation("iterations must be at least 1"));
        }
        if self.bins == 0 {
            return Err(validation("bins must be at least 1"));
        }
        let markets = self.init.len();
        if markets == 0 || self.market_names.len() != markets {
            return Err(validation("each market needs a name and an initial configuration"));
        }
        if self.params.market_count() != markets {
            return Err(validation(format!(
                "parameters describe {} markets, configuration has {markets}",
                self.params.market_count()
            )));
        }
        self.params.validate()?;
        self.params.selection.validate_for(self.n)?;
        self.retention.resolve(self.iterations)?;
        let mut params = self.params.clone();
        for entry in self.schedule.entries() {
            if entry.at > self.iterations {
                return Err(validation(format!(
                    "schedule trigger {} beyond {} iterations",
                    entry.at, self.iterations
                )));
            }
            params = apply_patch(&params, &entry.patch)?;
            params.selection.validate_for(self.n)?;
        }
        Ok(())
    }

    pub fn lambda(&self, params: &ParameterSet) -> f64 {
        params
            .lambda_n
            .unwrap_or((self.n * self.n * self.market_count()) as f64)
    }
}

pub fn default_market_name(index: usize) -> String {
    let letters = b"abcdefghijklmnopqrstuvwxyz";
    match letters.get(index) {
        Some(&c) => (c as char).to_string(),
        None => format!("m{index}"),
    }
}

/// The chain stream of a replica.
pub fn chain_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The clock stream of a replica, independent of [`chain_rng`].
pub fn clock_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// One completed update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    pub market: usize,
    pub unit: usize,
    pub previous: FirmLabel,
    pub outcome: BranchOutcome,
}

/// Replaces one unit label by a draw from its full conditional. All other
/// components are left untouched.
pub fn gibbs_step<R: Rng + ?Sized>(state: &mut SystemState, params: &ParameterSet, rng: &mut R) -> Result<StepEvent> {
    let (market, unit) = select_target(state, params, rng)?;
    let outcome = sample_full_conditional(state, market, unit, params, rng)?;
    let previous = state.markets[market].replace(unit, outcome.label());
    state.iteration += 1;
    Ok(StepEvent {
        market,
        unit,
        previous,
        outcome,
    })
}

/// A running replica.
#[derive(Debug, Clone)]
pub struct Engine {
    config: EngineConfig,
    params: ParameterSet,
    state: SystemState,
    rng: ChaCha8Rng,
    clock_rng: Option<ChaCha8Rng>,
    next_patch: usize,
    tallies: Vec<EventTally>,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Engine> {
        config.validate()?;
        let mut rng = chain_rng(config.seed);
        let markets = config
            .init
            .iter()
            .zip(&config.params.base)
            .map(|(spec, base)| initialize(spec, config.n, base, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let state = SystemState::new(markets)?;
        let clock_rng = (config.mode == Mode::Continuous).then(|| clock_rng(config.seed));
        Ok(Engine {
            params: config.params.clone(),
            tallies: vec![EventTally::default(); config.market_count()],
            config,
            state,
            rng,
            clock_rng,
            next_patch: 0,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    /// Parameters currently in force.
    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn tallies(&self) -> &[EventTally] {
        &self.tallies
    }

    pub fn iteration(&self) -> u64 {
        self.state.iteration
    }

    pub fn is_finished(&self) -> bool {
        self.state.iteration >= self.config.iterations
    }

    /// Applies patches due at the coming iteration, advances the clock, and
    /// performs one update.
    pub fn step(&mut self) -> Result<StepEvent> {
        let upcoming = self.state.iteration + 1;
        let entries = self.config.schedule.entries();
        while let Some(entry) = entries.get(self.next_patch) {
            if entry.at > upcoming {
                break;
            }
            self.params = apply_patch(&self.params, &entry.patch)?;
            self.next_patch += 1;
        }
        if let Some(clock) = self.clock_rng.as_mut() {
            let lambda = self.config.lambda(&self.params);
            let wait: f64 = Exp::new(lambda).map_err(|e| validation(e.to_string()))?.sample(clock);
            self.state.clock += wait;
        }
        let event = gibbs_step(&mut self.state, &self.params, &mut self.rng)?;
        let tally = &mut self.tallies[event.market];
        match event.outcome {
            BranchOutcome::NewFirm { .. } => tally.new_firm += 1,
            BranchOutcome::Cross { .. } => tally.cross += 1,
            BranchOutcome::Within { .. } => tally.within += 1,
        }
        Ok(event)
    }

    pub fn snapshot(&self) -> Result<TraceRecord> {
        let markets = self
            .state
            .markets
            .iter()
            .zip(&self.tallies)
            .map(|(config, &events)| {
                Ok(MarketSnapshot {
                    histogram: histogram(config, self.config.bins)?,
                    firm_count: config.firm_count(),
                    herfindahl: herfindahl(config),
                    max_share: max_share(config),
                    events,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TraceRecord {
            iteration: self.state.iteration,
            clock: self.clock_rng.as_ref().map(|_| self.state.clock),
            markets,
        })
    }

    /// Runs the remaining iterations, snapshotting per the retention plan.
    pub fn run_to_end(&mut self) -> Result<Trace> {
        let retained = self.config.retention.resolve(self.config.iterations)?;
        let mut records = Vec::with_capacity(retained.len());
        let start = self.state.iteration;
        for &target in retained.iter().filter(|&&t| t > start) {
            while self.state.iteration < target {
                self.step()?;
            }
            records.push(self.snapshot()?);
        }
        Ok(Trace {
            market_names: self.config.market_names.clone(),
            n: self.config.n,
            bins: self.config.bins,
            records,
        })
    }
}

/// Runs a replica to completion in the mode its config asks for.
pub fn run(config: &EngineConfig) -> Result<Trace> {
    Engine::new(config.clone())?.run_to_end()
}

/// Runs a replica on the Poisson clock. The jump chain is the one [`run`]
/// produces in discrete mode with the same seed.
pub fn continuous_run(config: &EngineConfig) -> Result<Trace> {
    if config.mode != Mode::Continuous {
        return Err(validation("continuous_run needs a config in continuous mode"));
    }
    run(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::BaseMeasure;
    use crate::state::{MarketValue, ParameterPatch, ScheduleEntry};

    fn single_market(theta: f64, init: InitSpec, iterations: u64, seed: u64) -> EngineConfig {
        let params = ParameterSet::uniform(1, theta, 1.0, BaseMeasure::uniform());
        EngineConfig::new(20, vec![init], params, iterations, seed)
    }

    #[test]
    fn zero_theta_monopoly_never_moves() {
        let label = FirmLabel::new(0.3).unwrap();
        let mut engine = Engine::new(single_market(0.0, InitSpec::Monopoly { label }, 1000, 1)).unwrap();
        let before = engine.state().markets[0].clone();
        for _ in 0..1000 {
            engine.step().unwrap();
        }
        assert_eq!(engine.state().markets[0], before);
    }

    #[test]
    fn each_step_changes_at_most_one_unit() {
        let mut engine = Engine::new(single_market(2.0, InitSpec::Competitive { firms: 4 }, 500, 2)).unwrap();
        for _ in 0..500 {
            let before = engine.state().markets[0].units().to_vec();
            let event = engine.step().unwrap();
            let after = engine.state().markets[0].units();
            let changed: Vec<usize> = (0..before.len()).filter(|&i| before[i] != after[i]).collect();
            assert!(changed.is_empty() || changed == vec![event.unit]);
            assert_eq!(after[event.unit], event.outcome.label());
            assert_eq!(before[event.unit], event.previous);
        }
        engine.state().markets[0].check_consistency().unwrap();
    }

    #[test]
    fn same_seed_same_successor() {
        let config = single_market(1.0, InitSpec::Competitive { firms: 5 }, 100, 3);
        let mut a = Engine::new(config.clone()).unwrap();
        let mut b = Engine::new(config).unwrap();
        for _ in 0..100 {
            assert_eq!(a.step().unwrap(), b.step().unwrap());
        }
        assert_eq!(a.state(), b.state());
    }

    #[test]
    fn single_iteration_trace() {
        let mut config = single_market(1.0, InitSpec::Competitive { firms: 5 }, 1, 4);
        config.retention = RetentionPlan::Explicit { iterations: vec![1] };
        let trace = run(&config).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].iteration, 1);
        assert_eq!(trace.records[0].markets[0].events.total(), 1);
    }

    #[test]
    fn schedule_beyond_iterations_is_rejected() {
        let mut config = single_market(1.0, InitSpec::Competitive { firms: 5 }, 10, 5);
        config.schedule = Schedule::new(vec![ScheduleEntry {
            at: 11,
            patch: ParameterPatch::default(),
        }])
        .unwrap();
        assert!(run(&config).is_err());
    }

    #[test]
    fn patches_take_effect_at_their_trigger() {
        let mut config = single_market(1.0, InitSpec::Competitive { firms: 5 }, 50, 6);
        config.schedule = Schedule::new(vec![ScheduleEntry {
            at: 20,
            patch: ParameterPatch {
                theta: Some(MarketValue::All(0.0)),
                ..Default::default()
            },
        }])
        .unwrap();
        let mut engine = Engine::new(config).unwrap();
        for _ in 0..19 {
            engine.step().unwrap();
        }
        assert_eq!(engine.params().theta, vec![1.0]);
        engine.step().unwrap();
        assert_eq!(engine.params().theta, vec![0.0]);
        let before = engine.tallies()[0].new_firm;
        for _ in 0..30 {
            engine.step().unwrap();
        }
        assert_eq!(engine.tallies()[0].new_firm, before);
    }

    #[test]
    fn continuous_run_requires_continuous_mode() {
        let config = single_market(1.0, InitSpec::Competitive { firms: 5 }, 10, 7);
        assert!(continuous_run(&config).is_err());
    }
}
