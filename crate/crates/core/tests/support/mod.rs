//! Shared helpers for the integration tests: random system states and a
//! unit-by-unit evaluation of the three-branch full conditional that does
//! not go through cluster tables.

#![allow(dead_code)]

use polya_market::dynamics::{CustomSelection, MigrationKernel, SelectionSpec, Sigma};
use polya_market::measures::BaseMeasure;
use polya_market::state::{FirmLabel, MarketConfiguration, ParameterSet, SystemState};
use rand::seq::IndexedRandom;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Selection weights described independently of the library's own types.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Unit,
    Constant(f64),
    Linear(f64, f64),
    Step(f64, f64, f64),
    Identity,
    InverseCluster,
    /// `1 + x^2`.
    Quadratic,
}

pub const ALL_WEIGHTS: [Weight; 7] = [
    Weight::Unit,
    Weight::Constant(0.0),
    Weight::Linear(0.5, -1.5),
    Weight::Step(0.4, 2.0, -1.0),
    Weight::Identity,
    Weight::InverseCluster,
    Weight::Quadratic,
];

impl Weight {
    pub fn spec(self) -> SelectionSpec {
        match self {
            Weight::Unit => SelectionSpec::Unit,
            Weight::Constant(value) => SelectionSpec::SigmaForm {
                sigma: Sigma::Constant { value },
            },
            Weight::Linear(intercept, slope) => SelectionSpec::SigmaForm {
                sigma: Sigma::Linear { intercept, slope },
            },
            Weight::Step(threshold, below, above) => SelectionSpec::SigmaForm {
                sigma: Sigma::Step {
                    threshold,
                    below,
                    above,
                },
            },
            Weight::Identity => SelectionSpec::Identity,
            Weight::InverseCluster => SelectionSpec::InverseCluster,
            Weight::Quadratic => {
                SelectionSpec::Custom(CustomSelection::new("quadratic", 2.0, |x, _| 1.0 + x.value() * x.value()))
            }
        }
    }

    /// Weight of label `x` when `copies` units of the reference measure carry
    /// it, in markets of `n` units.
    pub fn eval(self, x: f64, copies: usize, n: usize) -> f64 {
        let n = n as f64;
        match self {
            Weight::Unit => 1.0,
            Weight::Constant(c) => 1.0 + c / n,
            Weight::Linear(a, b) => 1.0 + (a + b * x) / n,
            Weight::Step(t, lo, hi) => 1.0 + (if x < t { lo } else { hi }) / n,
            Weight::Identity => x,
            Weight::InverseCluster => 1.0 / copies.max(1) as f64,
            Weight::Quadratic => 1.0 + x * x,
        }
    }
}

/// Independent description of a base measure for the brute-force integral.
#[derive(Debug, Clone, PartialEq)]
pub enum Base {
    Beta(f64, f64),
    Atoms(Vec<f64>, Vec<f64>),
}

impl Base {
    pub fn measure(&self) -> BaseMeasure {
        match self {
            Base::Beta(a, b) => BaseMeasure::beta(*a, *b).unwrap(),
            Base::Atoms(x, w) => BaseMeasure::discrete(x, w).unwrap(),
        }
    }

    /// `int weight(y, mu) base(dy)`, where `others` are the labels of `mu`.
    pub fn integral(&self, weight: Weight, others: &[f64], n: usize) -> f64 {
        match self {
            Base::Atoms(x, w) => x
                .iter()
                .zip(w)
                .map(|(&y, &p)| p * weight.eval(y, others.iter().filter(|&&o| o == y).count(), n))
                .sum(),
            &Base::Beta(a, b) => {
                let m1 = a / (a + b);
                let m2 = a * (a + 1.0) / ((a + b) * (a + b + 1.0));
                let nf = n as f64;
                match weight {
                    Weight::Unit | Weight::InverseCluster => 1.0,
                    Weight::Constant(c) => 1.0 + c / nf,
                    Weight::Linear(i, s) => 1.0 + (i + s * m1) / nf,
                    Weight::Step(t, lo, hi) => {
                        let below = statrs::distribution::Beta::new(a, b).unwrap().cdf(t);
                        1.0 + (lo * below + hi * (1.0 - below)) / nf
                    }
                    Weight::Identity => m1,
                    Weight::Quadratic => 1.0 + m2,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terms {
    pub new_firm: f64,
    pub cross: f64,
    pub within: f64,
}

impl Terms {
    pub fn total(&self) -> f64 {
        self.new_firm + self.cross + self.within
    }

    pub fn probabilities(&self) -> [f64; 3] {
        let t = self.total();
        [self.new_firm / t, self.cross / t, self.within / t]
    }
}

/// A random multi-market instance in plain vectors.
#[derive(Debug, Clone)]
pub struct Instance {
    pub labels: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub pi: Vec<f64>,
    pub migration: Vec<Vec<f64>>,
    pub weight: Weight,
    pub base: Vec<Base>,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.labels[0].len()
    }

    pub fn markets(&self) -> usize {
        self.labels.len()
    }

    pub fn state(&self) -> SystemState {
        SystemState::new(
            self.labels
                .iter()
                .map(|u| MarketConfiguration::from_values(u).unwrap())
                .collect(),
        )
        .unwrap()
    }

    pub fn params(&self) -> ParameterSet {
        let m = self.markets();
        ParameterSet {
            theta: self.theta.clone(),
            pi: self.pi.clone(),
            migration: MigrationKernel::new(self.migration.clone()),
            market_weights: vec![1.0 / m as f64; m],
            removal: polya_market::dynamics::RemovalPolicy::UniformUnit,
            selection: self.weight.spec(),
            base: self.base.iter().map(Base::measure).collect(),
            lambda_n: None,
        }
    }

    /// Term by term: new firm `theta pi int beta dnu0`, cross
    /// `theta (1 - pi) sum_r' m(r, r') n^-1 sum_j beta(x^{r'}_j)`, within
    /// `sum_{k != i} beta(x_k)`, with multiplicities counted by scanning.
    pub fn brute_terms(&self, market: usize, unit: usize) -> Terms {
        let n = self.n();
        let pi = if self.markets() == 1 { 1.0 } else { self.pi[market] };
        let theta = self.theta[market];
        let own = &self.labels[market];
        let others: Vec<f64> = own
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != unit)
            .map(|(_, &x)| x)
            .collect();
        let copies = |xs: &[f64], x: f64| xs.iter().filter(|&&y| y == x).count();
        let new_firm = theta * pi * self.base[market].integral(self.weight, &others, n);
        let mut cross = 0.0;
        for (source, xs) in self.labels.iter().enumerate() {
            if source == market {
                continue;
            }
            let mean: f64 = xs.iter().map(|&x| self.weight.eval(x, copies(xs, x), n)).sum::<f64>() / n as f64;
            cross += self.migration[market][source] * mean;
        }
        cross *= theta * (1.0 - pi);
        let within = others.iter().map(|&x| self.weight.eval(x, copies(&others, x), n)).sum();
        Terms { new_firm, cross, within }
    }
}

fn random_kernel<R: Rng>(m: usize, rng: &mut R) -> Vec<Vec<f64>> {
    if m == 1 {
        return vec![vec![0.0]];
    }
    (0..m)
        .map(|r| {
            let raw: Vec<f64> = (0..m).map(|s| if s == r { 0.0 } else { rng.random::<f64>() + 0.01 }).collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|x| x / total).collect()
        })
        .collect()
}

/// Up to three markets of up to 50 units; labels come from a small pool so
/// that firms hold several units. Half of the bases are discrete with atoms
/// drawn from the same pool.
pub fn random_instance<R: Rng>(weight: Weight, rng: &mut R) -> Instance {
    let markets = rng.random_range(1..=3);
    let n = rng.random_range(2..=50);
    let pool: Vec<f64> = (0..rng.random_range(1..=8)).map(|_| rng.random::<f64>()).collect();
    let labels = (0..markets)
        .map(|_| (0..n).map(|_| *pool.choose(rng).unwrap()).collect())
        .collect();
    let base = (0..markets)
        .map(|_| {
            if rng.random_bool(0.5) {
                Base::Beta(rng.random_range(0.5..5.0), rng.random_range(0.5..5.0))
            } else {
                let k = rng.random_range(1..=pool.len());
                let atoms: Vec<f64> = pool[..k].to_vec();
                let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
                let total: f64 = raw.iter().sum();
                Base::Atoms(atoms, raw.iter().map(|x| x / total).collect())
            }
        })
        .collect();
    Instance {
        labels,
        theta: (0..markets).map(|_| rng.random_range(0.0..10.0)).collect(),
        pi: (0..markets).map(|_| rng.random::<f64>()).collect(),
        migration: random_kernel(markets, rng),
        weight,
        base,
    }
}

/// Pearson statistic and its upper-tail p-value for observed counts against
/// expected probabilities; cells with zero probability must be empty.
pub fn chi_square(observed: &[u64], probabilities: &[f64]) -> (f64, f64) {
    let total: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(probabilities) {
        if p == 0.0 {
            assert_eq!(o, 0, "observation in a zero-probability cell");
            continue;
        }
        let e = p * total as f64;
        stat += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    let p_value = p_value(stat, cells.saturating_sub(1));
    (stat, p_value)
}

pub fn p_value(stat: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat)
}

pub fn label(x: f64) -> FirmLabel {
    FirmLabel::new(x).unwrap()
}
