//! Acceptance criteria. Runs every criterion, prints one PASS/FAIL line for
//! each, and exits non-zero if any fails.

mod support;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use polya_market::dynamics::{branch_probabilities, normalizer, select_target, RemovalPolicy, SelectionSpec, Sigma};
use polya_market::engine::{run, EngineConfig};
use polya_market::io::{csv_string, parse_scenario};
use polya_market::measures::BaseMeasure;
use polya_market::oracle::{
    check_lemma1, exact_joint, one_step_drift_check, stationary_moment_check, transition_matrix, FiniteInstance,
    MomentConfig, UnitChoice,
};
use polya_market::state::{MarketConfiguration, ParameterSet, SystemState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{label, random_instance, Weight, ALL_WEIGHTS};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    check: fn() -> Outcome,
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scenario(name: &str) -> EngineConfig {
    let path: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    parse_scenario(&fs::read_to_string(&path).unwrap()).unwrap()
}

/// Random multi-market states for every selection weight; branch
/// probabilities sum to one and agree with a unit-by-unit evaluation.
fn branch_normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_sum: f64 = 0.0;
    let mut worst_term: f64 = 0.0;
    let mut evaluated = 0;
    for weight in ALL_WEIGHTS {
        for _ in 0..1000 {
            let inst = random_instance(weight, &mut rng);
            let (state, params) = (inst.state(), inst.params());
            for market in 0..inst.markets() {
                let unit = rng.random_range(0..inst.n());
                let want = inst.brute_terms(market, unit);
                if want.total() == 0.0 {
                    continue;
                }
                let got = branch_probabilities(&state, market, unit, &params).map_err(|e| e.to_string())?;
                let want = want.probabilities();
                worst_sum = worst_sum.max((got.sum() - 1.0).abs());
                for (g, w) in [got.new_firm, got.cross, got.within].iter().zip(want) {
                    worst_term = worst_term.max((g - w).abs());
                }
                evaluated += 1;
            }
        }
    }
    ensure(
        worst_sum <= 1e-12 && worst_term <= 1e-12,
        format!("{evaluated} conditionals over 7000 states; max |sum - 1| = {worst_sum:.1e}, max term deviation = {worst_term:.1e}"),
    )
}

fn lemma1_invariance() -> Outcome {
    let mut worst: f64 = 0.0;
    for atoms in [2, 3] {
        for n in [2, 3] {
            for theta in [0.5, 1.0, 5.0] {
                let inst = FiniteInstance::uniform(atoms, theta, n).map_err(|e| e.to_string())?;
                worst = worst.max(check_lemma1(&inst).map_err(|e| e.to_string())?);
            }
        }
    }
    ensure(worst <= 1e-12, format!("max discrepancy {worst:.1e} over 12 instances"))
}

fn gibbs_stationarity() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for beta in [[1.0, 1.0, 1.0], [2.0, 1.0, 1.0]] {
        let inst = FiniteInstance::uniform(3, 1.0, 3)
            .and_then(|i| i.with_beta(&beta))
            .map_err(|e| e.to_string())?;
        let pi = exact_joint(&inst).map_err(|e| e.to_string())?;
        let t = transition_matrix(&inst, UnitChoice::Uniform).map_err(|e| e.to_string())?;
        let (s, d) = (t.stationarity_error(&pi), t.detailed_balance_error(&pi));
        ok &= s <= 1e-10 && d <= 1e-10;
        lines.push(format!("beta {beta:?}: stationarity {s:.1e}, detailed balance {d:.1e}"));
    }
    ensure(ok, lines.join("; "))
}

fn stationary_moments() -> Outcome {
    let r = stationary_moment_check(&MomentConfig::new(50, 2.0, 0.3, 2_000_000, 100_000, 1)).map_err(|e| e.to_string())?;
    let detail = format!(
        "mean {:.4} (|err| {:.4}, MCSE {:.4}), variance {:.4} (rel err {:.3}, MCSE {:.4}){}",
        r.mean,
        r.mean_error,
        r.mean_mcse,
        r.variance,
        r.variance_relative_error,
        r.variance_mcse,
        r.warning.map(|w| format!("; warning: {w}")).unwrap_or_default()
    );
    ensure(r.mean_error < 0.01 && r.variance_relative_error < 0.10, detail)
}

fn one_step_drift() -> Outcome {
    let mut worst: f64 = 0.0;
    for theta in [0.0, 1.0] {
        let inst = FiniteInstance::new(&[0.3, 0.7], theta, 3).map_err(|e| e.to_string())?;
        worst = worst.max(one_step_drift_check(&inst).map_err(|e| e.to_string())?);
    }
    ensure(worst <= 1e-12, format!("max discrepancy {worst:.1e}"))
}

fn concentration() -> Outcome {
    let base = scenario("concentration.toml");
    let mut finals = Vec::new();
    for seed in 1..=10u64 {
        let trace = run(&EngineConfig { seed, ..base.clone() }).map_err(|e| e.to_string())?;
        finals.push(trace.last().unwrap().markets[0].herfindahl);
    }
    let hits = finals.iter().filter(|&&h| h > 0.8).count();
    let shown: Vec<String> = finals.iter().map(|h| format!("{h:.3}")).collect();
    ensure(hits >= 8, format!("{hits}/10 seeds with final H > 0.8; final H = [{}]", shown.join(", ")))
}

fn closed_monopoly() -> Outcome {
    let base = scenario("closed_markets.toml");
    let mut snapshots = 0;
    for seed in 1..=10u64 {
        let trace = run(&EngineConfig { seed, ..base.clone() }).map_err(|e| e.to_string())?;
        for record in &trace.records {
            let k = record.markets[0].firm_count;
            if k != 1 {
                return Err(format!("seed {seed}: K_n(a) = {k} at iteration {}", record.iteration));
            }
            snapshots += 1;
        }
    }
    Ok(format!("K_n(a) = 1 in all {snapshots} snapshots over 10 seeds"))
}

fn closed_form_normalizers() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for weight in [Weight::Unit, Weight::Constant(0.0)] {
        for _ in 0..100 {
            let inst = random_instance(weight, &mut rng);
            let mut params = inst.params();
            if weight != Weight::Unit {
                params.selection = SelectionSpec::SigmaForm {
                    sigma: Sigma::Constant { value: 0.0 },
                };
            }
            let market = rng.random_range(0..inst.markets());
            let z = normalizer(&inst.state(), market, 0, &params).map_err(|e| e.to_string())?;
            let want = inst.theta[market] + (inst.n() - 1) as f64;
            if z != want {
                return Err(format!("sigma = 0 normalizer {z} != theta + n - 1 = {want}"));
            }
        }
    }
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let inst = random_instance(Weight::Identity, &mut rng);
        let market = rng.random_range(0..inst.markets());
        let unit = rng.random_range(0..inst.n());
        let z = normalizer(&inst.state(), market, unit, &inst.params()).map_err(|e| e.to_string())?;
        worst = worst.max((z - inst.brute_terms(market, unit).total()).abs());
    }
    ensure(worst <= 1e-12, format!("sigma = 0 exact on 200 states; identity weight max deviation {worst:.1e} on 100 states"))
}

fn antitrust() -> Outcome {
    let mut values = vec![0.25; 60];
    values.extend((0..40).map(|k| 0.3 + k as f64 * 0.01));
    let state = SystemState::new(vec![MarketConfiguration::from_values(&values).unwrap()]).unwrap();
    let mut params = ParameterSet::uniform(1, 1.0, 1.0, BaseMeasure::uniform());
    params.removal = RemovalPolicy::Antitrust {
        threshold: 0.5,
        inner: Box::new(RemovalPolicy::Proportional),
    };
    let dominant = label(0.25);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut exceptions = 0;
    for _ in 0..10_000 {
        let (_, unit) = select_target(&state, &params, &mut rng).map_err(|e| e.to_string())?;
        exceptions += (state.markets[0].label(unit) != dominant) as usize;
    }
    ensure(exceptions == 0, format!("firm with 60 of 100 units, threshold 0.5: {exceptions} exceptions in 10^4 draws"))
}

fn reproducibility() -> Outcome {
    let mut lines = Vec::new();
    for name in ["regulation_cycle.toml", "open_competitive.toml"] {
        let config = scenario(name);
        let a = csv_string(&run(&config).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let b = csv_string(&run(&config).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let other = EngineConfig { seed: config.seed + 1, ..config.clone() };
        let c = csv_string(&run(&other).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{name}: same seed gave different CSV"));
        }
        if a == c {
            return Err(format!("{name}: different seeds gave identical CSV"));
        }
        lines.push(format!("{name}: {} bytes identical, other seed differs", a.len()));
    }
    Ok(lines.join("; "))
}

const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, name: "branch normalization", limit: Some(Duration::from_secs(5)), check: branch_normalization },
    Criterion { id: 2, name: "marginal invariance", limit: Some(Duration::from_secs(10)), check: lemma1_invariance },
    Criterion { id: 3, name: "Gibbs stationarity and reversibility", limit: Some(Duration::from_secs(10)), check: gibbs_stationarity },
    Criterion { id: 4, name: "stationary beta-binomial moments", limit: Some(Duration::from_secs(60)), check: stationary_moments },
    Criterion { id: 5, name: "one-step drift", limit: Some(Duration::from_secs(5)), check: one_step_drift },
    Criterion { id: 6, name: "competitive market concentrates", limit: Some(Duration::from_secs(120)), check: concentration },
    Criterion { id: 7, name: "closed monopoly stays a monopoly", limit: Some(Duration::from_secs(60)), check: closed_monopoly },
    Criterion { id: 8, name: "closed-form normalizers", limit: None, check: closed_form_normalizers },
    Criterion { id: 9, name: "antitrust removal", limit: None, check: antitrust },
    Criterion { id: 10, name: "reproducibility", limit: None, check: reproducibility },
];

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for c in CRITERIA.iter() {
        if !filter.is_empty() && !filter.iter().any(|f| c.id.to_string() == *f || c.name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(d), Some(limit)) if elapsed > limit => Err(format!("{d}; too slow: limit {limit:?}")),
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failed += outcome.is_err() as usize;
        println!("[{tag}] criterion {:>2} {}: {} ({:.2} s)", c.id, c.name, detail, elapsed.as_secs_f64());
    }
    println!("acceptance: {}/{} criteria passed", ran - failed, ran);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
