//! Long-run moments of the share held by firms with labels in `[0, p)`,
//! compared with the beta-binomial law of the stationary urn.

use serde::Serialize;

use crate::engine::{gibbs_step, initialize, InitSpec};
use crate::engine::chain_rng;
use crate::error::{validation, Result};
use crate::measures::BaseMeasure;
use crate::state::{ParameterSet, SystemState};

#[derive(Debug, Clone, PartialEq)]
pub struct MomentConfig {
    pub n: usize,
    pub theta: f64,
    /// Base mass of the test set `[0, p)` under the uniform base measure.
    pub p: f64,
    /// Recorded updates, after burn-in.
    pub steps: u64,
    pub burn_in: u64,
    /// Number of batches for the batch-means standard errors.
    pub batches: usize,
    pub seed: u64,
    pub init: InitSpec,
    /// Absolute tolerance on the mean, used for the precision warning.
    pub mean_tolerance: f64,
}

impl MomentConfig {
    /// Uniform base, `n` distinct initial firms, 100 batches.
    pub fn new(n: usize, theta: f64, p: f64, steps: u64, burn_in: u64, seed: u64) -> Self {
        MomentConfig {
            n,
            theta,
            p,
            steps,
            burn_in,
            batches: 100,
            seed,
            init: InitSpec::Competitive { firms: n },
            mean_tolerance: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub mean: f64,
    pub variance: f64,
    pub target_mean: f64,
    pub target_variance: f64,
    pub mean_error: f64,
    /// `|variance - target| / target`.
    pub variance_relative_error: f64,
    /// Batch-means Monte Carlo standard errors.
    pub mean_mcse: f64,
    pub variance_mcse: f64,
    pub steps: u64,
    pub warning: Option<String>,
}

/// Beta-binomial moments of `N_B / n` under the stationary urn law:
/// mean `p`, variance `p (1 - p) (theta + n) / (n (theta + 1))`.
pub fn beta_binomial_share_moments(n: usize, theta: f64, p: f64) -> (f64, f64) {
    let n = n as f64;
    (p, p * (1.0 - p) * (theta + n) / (n * (theta + 1.0)))
}

fn sample_stats(xs: &[f64]) -> (f64, f64) {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
    (mean, var)
}

/// Runs one single-market chain (`beta = 1`, uniform unit removal) and
/// estimates the mean and variance of the share in `[0, p)`.
pub fn stationary_moment_check(config: &MomentConfig) -> Result<MomentReport> {
    if !(config.p > 0.0 && config.p < 1.0) {
        return Err(validation("p must lie in (0, 1)"));
    }
    if config.batches < 2 || config.steps < config.batches as u64 {
        return Err(validation("need at least two batches and one step per batch"));
    }
    let params = ParameterSet::uniform(1, config.theta, 1.0, BaseMeasure::uniform());
    params.validate()?;
    let mut rng = chain_rng(config.seed);
    let market = initialize(&config.init, config.n, &params.base[0], &mut rng)?;
    let mut state = SystemState::new(vec![market])?;
    let in_set = |x: f64| x < config.p;
    for _ in 0..config.burn_in {
        gibbs_step(&mut state, &params, &mut rng)?;
    }
    let mut count = state.markets[0].units().iter().filter(|l| in_set(l.value())).count() as i64;
    let n = config.n as f64;
    let batch_len = config.steps / config.batches as u64;
    let recorded = batch_len * config.batches as u64;
    let mut shares = Vec::with_capacity(recorded as usize);
    for _ in 0..recorded {
        let event = gibbs_step(&mut state, &params, &mut rng)?;
        count += in_set(event.outcome.label().value()) as i64 - in_set(event.previous.value()) as i64;
        shares.push(count as f64 / n);
    }
    let (mean, variance) = sample_stats(&shares);
    let (target_mean, target_variance) = beta_binomial_share_moments(config.n, config.theta, config.p);

    let mut batch_means = Vec::with_capacity(config.batches);
    let mut batch_vars = Vec::with_capacity(config.batches);
    for chunk in shares.chunks(batch_len as usize) {
        let sq: Vec<f64> = chunk.iter().map(|x| (x - mean) * (x - mean)).collect();
        batch_means.push(chunk.iter().sum::<f64>() / chunk.len() as f64);
        batch_vars.push(sq.iter().sum::<f64>() / sq.len() as f64);
    }
    let b = config.batches as f64;
    let mean_mcse = (sample_stats(&batch_means).1 * b / (b - 1.0) / b).sqrt();
    let variance_mcse = (sample_stats(&batch_vars).1 * b / (b - 1.0) / b).sqrt();

    let mut warnings = Vec::new();
    if 2.0 * mean_mcse > config.mean_tolerance {
        warnings.push(format!(
            "mean standard error {mean_mcse:.4} is not small against tolerance {}; more steps are needed for a reliable check",
            config.mean_tolerance
        ));
    }
    if 2.0 * variance_mcse > 0.1 * target_variance {
        warnings.push(format!(
            "variance standard error {variance_mcse:.4} is not small against 10% of the target"
        ));
    }
    Ok(MomentReport {
        mean,
        variance,
        target_mean,
        target_variance,
        mean_error: (mean - target_mean).abs(),
        variance_relative_error: (variance - target_variance).abs() / target_variance,
        mean_mcse,
        variance_mcse,
        steps: recorded,
        warning: (!warnings.is_empty()).then(|| warnings.join("; ")),
    })
}
