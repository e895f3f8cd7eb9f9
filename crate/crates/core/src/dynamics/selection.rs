use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::measures::{base_mean, pick_categorical, sample_base, BaseMeasure, EmpiricalMeasure};
use crate::state::FirmLabel;

/// Proposals tried by the rejection sampler before giving up.
pub const MAX_REJECTION_ATTEMPTS: usize = 100_000;

/// Bounded perturbation `sigma` in `beta_n(z) = 1 + sigma(z) / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sigma {
    Constant { value: f64 },
    Linear { intercept: f64, slope: f64 },
    /// `below` on `[0, threshold)`, `above` on `[threshold, 1]`.
    Step { threshold: f64, below: f64, above: f64 },
}

impl Sigma {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            Sigma::Constant { value } => value,
            Sigma::Linear { intercept, slope } => intercept + slope * z,
            Sigma::Step {
                threshold,
                below,
                above,
            } => {
                if z < threshold {
                    below
                } else {
                    above
                }
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            Sigma::Constant { value } => value,
            Sigma::Linear { intercept, slope } => intercept.max(intercept + slope),
            Sigma::Step { below, above, .. } => below.max(above),
        }
    }

    pub fn inf(&self) -> f64 {
        match *self {
            Sigma::Constant { value } => value,
            Sigma::Linear { intercept, slope } => intercept.min(intercept + slope),
            Sigma::Step { below, above, .. } => below.min(above),
        }
    }

    /// `E[sigma(Z)]` under the base measure, in closed form.
    pub fn expect(&self, base: &BaseMeasure) -> f64 {
        match *self {
            Sigma::Constant { value } => value,
            Sigma::Linear { intercept, slope } => intercept + slope * base_mean(base),
            Sigma::Step {
                threshold,
                below,
                above,
            } => {
                let p = base.prob_below(threshold);
                below * p + above * (1.0 - p)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sup() == 0.0 && self.inf() == 0.0
    }

    fn validate(&self) -> Result<()> {
        let finite = match *self {
            Sigma::Constant { value } => value.is_finite(),
            Sigma::Linear { intercept, slope } => intercept.is_finite() && slope.is_finite(),
            Sigma::Step {
                threshold,
                below,
                above,
            } => (0.0..=1.0).contains(&threshold) && below.is_finite() && above.is_finite(),
        };
        if finite {
            Ok(())
        } else {
            Err(validation(format!("sigma {self:?} is not bounded on [0, 1]")))
        }
    }
}

pub type WeightFn = dyn Fn(FirmLabel, &EmpiricalMeasure<'_>) -> f64 + Send + Sync;

/// A user-supplied selection weight with a known upper bound.
#[derive(Clone)]
pub struct CustomSelection {
    pub name: String,
    pub bound: f64,
    pub weight: Arc<WeightFn>,
}

impl CustomSelection {
    pub fn new(
        name: impl Into<String>,
        bound: f64,
        weight: impl Fn(FirmLabel, &EmpiricalMeasure<'_>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CustomSelection {
            name: name.into(),
            bound,
            weight: Arc::new(weight),
        }
    }
}

impl fmt::Debug for CustomSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomSelection")
            .field("name", &self.name)
            .field("bound", &self.bound)
            .finish_non_exhaustive()
    }
}

impl PartialEq for CustomSelection {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.weight, &other.weight)
    }
}

/// Selection weight `beta_n(x, mu_r)`, which tilts the urn toward favoured
/// labels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectionSpec {
    /// `beta = 1`.
    #[default]
    Unit,
    /// `beta_n(z) = 1 + sigma(z) / n`.
    SigmaForm { sigma: Sigma },
    /// `beta(x) = x`.
    Identity,
    /// `beta(x, mu) = 1 / n_j`, where `n_j` is the multiplicity of `x` in
    /// `mu`; a label absent from `mu` weighs 1, the weight it would have as
    /// a fresh single-unit firm.
    InverseCluster,
    #[serde(skip)]
    Custom(CustomSelection),
}

impl SelectionSpec {
    /// True when `beta` is identically one.
    pub fn is_neutral(&self) -> bool {
        match self {
            SelectionSpec::Unit => true,
            SelectionSpec::SigmaForm { sigma } => sigma.is_zero(),
            _ => false,
        }
    }

    pub fn validate_shape(&self) -> Result<()> {
        match self {
            SelectionSpec::SigmaForm { sigma } => sigma.validate(),
            SelectionSpec::Custom(c) if !(c.bound.is_finite() && c.bound > 0.0) => Err(validation(
                format!("custom selection '{}' needs a positive finite bound", c.name),
            )),
            _ => Ok(()),
        }
    }

    /// Checks nonnegativity for markets of `n` units.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.validate_shape()?;
        if let SelectionSpec::SigmaForm { sigma } = self {
            if 1.0 + sigma.inf() / (n as f64) < 0.0 {
                return Err(validation(format!(
                    "1 + sigma/n goes negative for n = {n} (inf sigma = {})",
                    sigma.inf()
                )));
            }
        }
        Ok(())
    }

    /// `beta_n(label, mu)` for markets of `n` units. Negative or non-finite
    /// weights are rejected.
    pub fn weight(&self, label: FirmLabel, mu: &EmpiricalMeasure<'_>, n: usize) -> Result<f64> {
        let w = match self {
            SelectionSpec::Unit => 1.0,
            SelectionSpec::SigmaForm { sigma } => 1.0 + sigma.eval(label.value()) / n as f64,
            SelectionSpec::Identity => label.value(),
            SelectionSpec::InverseCluster => 1.0 / mu.multiplicity(label).max(1) as f64,
            SelectionSpec::Custom(c) => (c.weight)(label, mu),
        };
        if !w.is_finite() {
            return Err(validation(format!("selection weight at {label} is not finite")));
        }
        if w < 0.0 {
            return Err(validation(format!("selection weight at {label} is negative ({w})")));
        }
        Ok(w)
    }

    /// Upper bound on `beta_n` used as the rejection envelope.
    pub fn bound(&self, n: usize) -> f64 {
        match self {
            SelectionSpec::Unit | SelectionSpec::Identity | SelectionSpec::InverseCluster => 1.0,
            SelectionSpec::SigmaForm { sigma } => 1.0 + sigma.sup() / n as f64,
            SelectionSpec::Custom(c) => c.bound,
        }
    }

    /// `int beta_n(y, mu) base(dy)`.
    pub fn base_integral(&self, base: &BaseMeasure, mu: &EmpiricalMeasure<'_>, n: usize) -> Result<f64> {
        if base.is_discrete() {
            return self.expect_over(base, mu, n);
        }
        Ok(match self {
            SelectionSpec::Unit => 1.0,
            SelectionSpec::SigmaForm { sigma } => 1.0 + sigma.expect(base) / n as f64,
            SelectionSpec::Identity => base_mean(base),
            // existing labels carry no mass under a continuous base
            SelectionSpec::InverseCluster => 1.0,
            SelectionSpec::Custom(_) => self.expect_over(base, mu, n)?,
        })
    }

    fn expect_over(&self, base: &BaseMeasure, mu: &EmpiricalMeasure<'_>, n: usize) -> Result<f64> {
        let mut failure = None;
        let value = base.expect(|y| match self.weight(y, mu, n) {
            Ok(w) => w,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }

    /// Draws from `beta_n(y, mu) base(dy)`, normalized.
    ///
    /// Discrete bases are sampled exactly. Continuous bases use a direct draw
    /// when `beta` is constant, `Beta(a + 1, b)` for the identity weight, and
    /// rejection against the base otherwise.
    pub fn sample_tilted_base<R: Rng + ?Sized>(
        &self,
        base: &BaseMeasure,
        mu: &EmpiricalMeasure<'_>,
        n: usize,
        rng: &mut R,
    ) -> Result<FirmLabel> {
        match base {
            BaseMeasure::Discrete { atoms, weights } => {
                let mut tilted = Vec::with_capacity(atoms.len());
                for (&x, &w) in atoms.iter().zip(weights) {
                    tilted.push(if w > 0.0 { w * self.weight(x, mu, n)? } else { 0.0 });
                }
                if tilted.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::Degenerate("tilted base measure has no mass".into()));
                }
                Ok(atoms[pick_categorical(tilted.into_iter(), rng.random::<f64>())])
            }
            BaseMeasure::Beta { a, b } => match self {
                SelectionSpec::Unit | SelectionSpec::InverseCluster => Ok(sample_base(base, rng)),
                SelectionSpec::SigmaForm { sigma } if sigma.sup() == sigma.inf() => {
                    Ok(sample_base(base, rng))
                }
                SelectionSpec::Identity => {
                    let x: f64 = Beta::new(a + 1.0, *b).expect("validated").sample(rng);
                    FirmLabel::new(x.clamp(0.0, 1.0))
                }
                _ => self.rejection_sample(base, mu, n, rng),
            },
        }
    }

    fn rejection_sample<R: Rng + ?Sized>(
        &self,
        base: &BaseMeasure,
        mu: &EmpiricalMeasure<'_>,
        n: usize,
        rng: &mut R,
    ) -> Result<FirmLabel> {
        let bound = self.bound(n);
        let mut last_weight = f64::NAN;
        for _ in 0..MAX_REJECTION_ATTEMPTS {
            let y = sample_base(base, rng);
            let w = self.weight(y, mu, n)?;
            if w > bound * (1.0 + 1e-12) {
                return Err(validation(format!(
                    "selection weight {w} at {y} exceeds declared bound {bound}"
                )));
            }
            last_weight = w;
            if rng.random::<f64>() * bound < w {
                return Ok(y);
            }
        }
        Err(Error::Sampler {
            attempts: MAX_REJECTION_ATTEMPTS,
            bound,
            last_weight,
        })
    }
}
