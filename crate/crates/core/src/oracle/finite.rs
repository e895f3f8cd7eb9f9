//! Exact computations on a single market with finitely many atoms. These are
//! written straight from the urn formulas and share no code with the
//! sampler.

use crate::error::{validation, Error, Result};
use crate::state::FirmLabel;

/// Default bound on the number of enumerated configurations.
pub const ENUMERATION_CAP: usize = 100_000;
pub const MAX_ATOMS: usize = 5;
pub const MAX_UNITS: usize = 5;

/// A single market with a discrete base measure, small enough to enumerate.
/// States are indexed in base `atoms.len()`, unit 0 being the most
/// significant digit.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteInstance {
    pub atoms: Vec<FirmLabel>,
    pub weights: Vec<f64>,
    pub theta: f64,
    pub n: usize,
    /// Selection weight of each atom.
    pub beta: Vec<f64>,
    /// Membership of each atom in the test set used by the drift check.
    pub in_set: Vec<bool>,
    pub cap: usize,
}

/// How the oracle picks the unit that is updated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnitChoice {
    /// Every unit with probability `1/n`.
    Uniform,
    /// Every firm with probability `1/K`, then a unit within it.
    PerFirm,
    /// Firm `j` with probability proportional to `n - n_j`, then a unit within it.
    Inverse,
}

impl FiniteInstance {
    /// Equally spaced atoms in (0,1) with the given weights, `beta = 1`, and
    /// the test set containing the first atom only.
    pub fn new(weights: &[f64], theta: f64, n: usize) -> Result<Self> {
        let a = weights.len();
        let atoms = (0..a)
            .map(|k| FirmLabel::new((k as f64 + 1.0) / (a as f64 + 1.0)))
            .collect::<Result<Vec<_>>>()?;
        let mut in_set = vec![false; a];
        if let Some(first) = in_set.first_mut() {
            *first = true;
        }
        let inst = FiniteInstance {
            atoms,
            weights: weights.to_vec(),
            theta,
            n,
            beta: vec![1.0; a],
            in_set,
            cap: ENUMERATION_CAP,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Equal weights over `atoms` atoms.
    pub fn uniform(atoms: usize, theta: f64, n: usize) -> Result<Self> {
        Self::new(&vec![1.0 / atoms as f64; atoms], theta, n)
    }

    pub fn with_beta(mut self, beta: &[f64]) -> Result<Self> {
        self.beta = beta.to_vec();
        self.validate()?;
        Ok(self)
    }

    pub fn with_set(mut self, in_set: &[bool]) -> Result<Self> {
        self.in_set = in_set.to_vec();
        self.validate()?;
        Ok(self)
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.atoms.len();
        if a == 0 || a > MAX_ATOMS {
            return Err(validation(format!("need 1..={MAX_ATOMS} atoms, got {a}")));
        }
        if self.n == 0 || self.n > MAX_UNITS {
            return Err(validation(format!("need 1..={MAX_UNITS} units, got {}", self.n)));
        }
        if self.weights.len() != a || self.beta.len() != a || self.in_set.len() != a {
            return Err(validation("weights, beta and set membership need one entry per atom"));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(validation("base weights must be a probability vector"));
        }
        if self.beta.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(validation("beta table entries must be positive and finite"));
        }
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return Err(validation(format!("theta = {} must be finite and >= 0", self.theta)));
        }
        if self.theta == 0.0 && self.n == 1 {
            return Err(validation("theta = 0 with a single unit has no full conditional"));
        }
        Ok(())
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_unweighted(&self) -> bool {
        self.beta.iter().all(|&b| b == 1.0)
    }

    /// Number of configurations, `atoms^n`, checked against the cap.
    pub fn state_count(&self) -> Result<usize> {
        self.checked_power(self.n)
    }

    fn checked_power(&self, exp: usize) -> Result<usize> {
        let a = self.atoms.len();
        let mut size: usize = 1;
        for _ in 0..exp {
            size = size.checked_mul(a).filter(|&s| s <= self.cap).ok_or(Error::Capacity {
                size: a.saturating_pow(exp as u32),
                cap: self.cap,
            })?;
        }
        Ok(size)
    }

    /// Atom indices of each unit in state `index`.
    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let a = self.atoms.len();
        let mut digits = vec![0; self.n];
        for d in digits.iter_mut().rev() {
            *d = index % a;
            index /= a;
        }
        digits
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        let a = self.atoms.len();
        digits.iter().fold(0, |acc, &d| acc * a + d)
    }

    /// Atom index of a label, if it is one of the atoms.
    pub fn atom_of(&self, label: FirmLabel) -> Option<usize> {
        self.atoms.iter().position(|&x| x == label)
    }
}

/// Sequential Pólya-urn probability of `digits` under the measure
/// `mass[a]` (total `total`): first draw `mass/total`, each later draw
/// `(mass + earlier copies) / (total + earlier draws)`. With `total = 0`
/// the first draw follows `fallback`.
fn urn_probability(digits: &[usize], mass: &[f64], total: f64, fallback: &[f64]) -> f64 {
    let mut seen = vec![0usize; mass.len()];
    let mut p = 1.0;
    for (i, &d) in digits.iter().enumerate() {
        let factor = if i == 0 && total == 0.0 {
            fallback[d]
        } else {
            (mass[d] + seen[d] as f64) / (total + i as f64)
        };
        p *= factor;
        seen[d] += 1;
    }
    p
}

fn unweighted_joint(inst: &FiniteInstance) -> Result<Vec<f64>> {
    let size = inst.state_count()?;
    let mass: Vec<f64> = inst.weights.iter().map(|w| inst.theta * w).collect();
    Ok((0..size)
        .map(|s| urn_probability(&inst.decode(s), &mass, inst.theta, &inst.weights))
        .collect())
}

/// Exact joint law over all `atoms^n` configurations: the Pólya-urn product
/// law, tilted by `prod_k beta(x_k)` and renormalized when `beta` is not
/// identically one.
pub fn exact_joint(inst: &FiniteInstance) -> Result<Vec<f64>> {
    inst.validate()?;
    let mut p = unweighted_joint(inst)?;
    if !inst.is_unweighted() {
        for (s, ps) in p.iter_mut().enumerate() {
            *ps *= inst.decode(s).iter().map(|&d| inst.beta[d]).product::<f64>();
        }
        let total: f64 = p.iter().sum();
        for ps in &mut p {
            *ps /= total;
        }
    }
    Ok(p)
}

/// Largest violation over `y` of
/// `sum_x M^{alpha_x}(y) M^alpha(x) = M^alpha(y)`, where `alpha_x` adds a
/// unit point mass at every coordinate of `x` to `alpha = theta * nu0`.
pub fn check_lemma1(inst: &FiniteInstance) -> Result<f64> {
    inst.validate()?;
    inst.checked_power(2 * inst.n)?;
    let size = inst.state_count()?;
    let prior = unweighted_joint(inst)?;
    let a = inst.atom_count();
    let mut mixed = vec![0.0; size];
    for (x, &px) in prior.iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        let mut mass: Vec<f64> = inst.weights.iter().map(|w| inst.theta * w).collect();
        for d in inst.decode(x) {
            mass[d] += 1.0;
        }
        let total = inst.theta + inst.n as f64;
        debug_assert_eq!(mass.len(), a);
        for (y, slot) in mixed.iter_mut().enumerate() {
            *slot += px * urn_probability(&inst.decode(y), &mass, total, &inst.weights);
        }
    }
    Ok(mixed
        .iter()
        .zip(&prior)
        .map(|(m, p)| (m - p).abs())
        .fold(0.0, f64::max))
}

/// Sparse row-stochastic matrix; row `x` lists `(y, T(x, y))` with distinct `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.rows[x].iter().find(|&&(s, _)| s == y).map_or(0.0, |&(_, p)| p)
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    /// Largest `|sum_y T(x, y) - 1|`.
    pub fn row_sum_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.iter().map(|&(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `||pi T - pi||_inf`.
    pub fn stationarity_error(&self, pi: &[f64]) -> f64 {
        let mut next = vec![0.0; pi.len()];
        for (x, row) in self.rows.iter().enumerate() {
            for &(y, p) in row {
                next[y] += pi[x] * p;
            }
        }
        next.iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Largest `|pi(x) T(x, y) - pi(y) T(y, x)|`.
    pub fn detailed_balance_error(&self, pi: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (x, row) in self.rows.iter().enumerate() {
            for &(y, p) in row {
                worst = worst.max((pi[x] * p - pi[y] * self.get(y, x)).abs());
            }
        }
        worst
    }
}

/// Probability of updating each unit of the configuration `digits`.
fn unit_probabilities(digits: &[usize], atoms: usize, choice: UnitChoice) -> Vec<f64> {
    let n = digits.len();
    let mut counts = vec![0usize; atoms];
    for &d in digits {
        counts[d] += 1;
    }
    let firms = counts.iter().filter(|&&c| c > 0).count();
    digits
        .iter()
        .map(|&d| match choice {
            UnitChoice::Uniform => 1.0 / n as f64,
            UnitChoice::PerFirm => 1.0 / (firms * counts[d]) as f64,
            UnitChoice::Inverse if firms > 1 => {
                (n - counts[d]) as f64 / (n * (firms - 1)) as f64 / counts[d] as f64
            }
            // A monopoly has no inverse-share removal; keep the unit uniform.
            UnitChoice::Inverse => 1.0 / n as f64,
        })
        .collect()
}

/// Full conditional of unit `i`: `P(x_i = a | rest) ∝ beta(a) (theta nu0(a) + #{k != i : x_k = a})`.
pub fn full_conditional(inst: &FiniteInstance, digits: &[usize], i: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..inst.atom_count())
        .map(|a| inst.theta * inst.weights[a])
        .collect();
    for (k, &d) in digits.iter().enumerate() {
        if k != i {
            w[d] += 1.0;
        }
    }
    for (wa, b) in w.iter_mut().zip(&inst.beta) {
        *wa *= b;
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// One-step kernel of the random-scan Gibbs sampler:
/// `T(x, y) = sum_i gamma_i(x) q_i(y_i | x_{-i}) 1{y_{-i} = x_{-i}}`.
pub fn transition_matrix(inst: &FiniteInstance, choice: UnitChoice) -> Result<TransitionMatrix> {
    inst.validate()?;
    let size = inst.state_count()?;
    let a = inst.atom_count();
    let rows = (0..size)
        .map(|x| {
            let digits = inst.decode(x);
            let gamma = unit_probabilities(&digits, a, choice);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(inst.n * a);
            let mut y_digits = digits.clone();
            for i in 0..inst.n {
                let q = full_conditional(inst, &digits, i);
                for (atom, &qa) in q.iter().enumerate() {
                    if qa == 0.0 {
                        continue;
                    }
                    y_digits[i] = atom;
                    let y = inst.encode(&y_digits);
                    match row.iter_mut().find(|(s, _)| *s == y) {
                        Some(entry) => entry.1 += gamma[i] * qa,
                        None => row.push((y, gamma[i] * qa)),
                    }
                }
                y_digits[i] = digits[i];
            }
            row.sort_by_key(|&(y, _)| y);
            row
        })
        .collect();
    Ok(TransitionMatrix { rows })
}

/// Compares, over every configuration, the expected one-step change of the
/// number of units in the test set computed (a) from the transition matrix
/// and (b) from the closed form
/// `(1/n) sum_i [ (theta p + n_B - 1{x_i in B}) / (theta + n - 1) - 1{x_i in B} ]`.
/// Returns the largest discrepancy.
pub fn one_step_drift_check(inst: &FiniteInstance) -> Result<f64> {
    let report = drift_table(inst)?;
    Ok(report
        .iter()
        .map(|d| (d.from_matrix - d.closed_form).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEntry {
    pub state: usize,
    pub count_in_set: usize,
    pub from_matrix: f64,
    pub closed_form: f64,
}

/// Per-configuration drift of the count in the test set, both ways.
pub fn drift_table(inst: &FiniteInstance) -> Result<Vec<DriftEntry>> {
    if !inst.is_unweighted() {
        return Err(validation("the drift closed form assumes beta = 1"));
    }
    let t = transition_matrix(inst, UnitChoice::Uniform)?;
    let count = |s: usize| inst.decode(s).iter().filter(|&&d| inst.in_set[d]).count();
    let p: f64 = inst
        .weights
        .iter()
        .zip(&inst.in_set)
        .filter(|(_, &b)| b)
        .map(|(w, _)| w)
        .sum();
    let n = inst.n as f64;
    Ok((0..t.size())
        .map(|x| {
            let nb = count(x);
            let from_matrix = t.rows[x]
                .iter()
                .map(|&(y, q)| q * (count(y) as f64 - nb as f64))
                .sum();
            let closed_form = inst
                .decode(x)
                .iter()
                .map(|&d| {
                    let removed = if inst.in_set[d] { 1.0 } else { 0.0 };
                    (inst.theta * p + nb as f64 - removed) / (inst.theta + n - 1.0) - removed
                })
                .sum::<f64>()
                / n;
            DriftEntry {
                state: x,
                count_in_set: nb,
                from_matrix,
                closed_form,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_unit_joint_is_base() {
        let inst = FiniteInstance::new(&[0.2, 0.5, 0.3], 1.5, 1).unwrap();
        for (p, w) in exact_joint(&inst).unwrap().iter().zip([0.2, 0.5, 0.3]) {
            assert!((p - w).abs() < 1e-15);
        }
    }

    #[test]
    fn two_unit_hand_values() {
        let inst = FiniteInstance::uniform(2, 1.0, 2).unwrap();
        let p = exact_joint(&inst).unwrap();
        let expected = [0.375, 0.125, 0.125, 0.375];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn joint_sums_to_one_and_is_exchangeable() {
        let inst = FiniteInstance::new(&[0.1, 0.6, 0.3], 0.7, 4)
            .unwrap()
            .with_beta(&[2.0, 1.0, 0.5])
            .unwrap();
        let p = exact_joint(&inst).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for s in 0..p.len() {
            let mut d = inst.decode(s);
            d.reverse();
            assert!((p[s] - p[inst.encode(&d)]).abs() < 1e-15);
            d.rotate_left(1);
            assert!((p[s] - p[inst.encode(&d)]).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_theta_joint_is_monopoly_mixture() {
        let inst = FiniteInstance::new(&[0.25, 0.75], 0.0, 3).unwrap();
        let p = exact_joint(&inst).unwrap();
        assert_eq!(p[0], 0.25);
        assert_eq!(p[7], 0.75);
        assert_eq!(p.iter().filter(|&&x| x > 0.0).count(), 2);
    }

    #[test]
    fn lemma1_small_cases() {
        assert!(check_lemma1(&FiniteInstance::uniform(2, 1.0, 2).unwrap()).unwrap() <= 1e-12);
        assert!(check_lemma1(&FiniteInstance::uniform(3, 0.5, 3).unwrap()).unwrap() <= 1e-12);
        assert!(check_lemma1(&FiniteInstance::uniform(2, 1e6, 3).unwrap()).unwrap() <= 1e-12);
    }

    #[test]
    fn capacity_is_enforced() {
        let inst = FiniteInstance::uniform(3, 1.0, 3).unwrap().with_cap(26);
        assert!(matches!(exact_joint(&inst), Err(Error::Capacity { .. })));
        let inst = FiniteInstance::uniform(3, 1.0, 3).unwrap().with_cap(100);
        assert!(exact_joint(&inst).is_ok());
        assert!(matches!(check_lemma1(&inst), Err(Error::Capacity { .. })));
    }

    #[test]
    fn rows_are_stochastic() {
        for choice in [UnitChoice::Uniform, UnitChoice::PerFirm, UnitChoice::Inverse] {
            let inst = FiniteInstance::new(&[0.2, 0.3, 0.5], 1.3, 3).unwrap();
            assert!(transition_matrix(&inst, choice).unwrap().row_sum_error() < 1e-12);
        }
    }

    #[test]
    fn gibbs_kernel_is_reversible() {
        let inst = FiniteInstance::uniform(3, 1.0, 3).unwrap();
        let pi = exact_joint(&inst).unwrap();
        let t = transition_matrix(&inst, UnitChoice::Uniform).unwrap();
        assert!(t.stationarity_error(&pi) <= 1e-10);
        assert!(t.detailed_balance_error(&pi) <= 1e-10);

        let weighted = inst.with_beta(&[2.0, 1.0, 1.0]).unwrap();
        let pi = exact_joint(&weighted).unwrap();
        let t = transition_matrix(&weighted, UnitChoice::Uniform).unwrap();
        assert!(t.stationarity_error(&pi) <= 1e-10);
        assert!(t.detailed_balance_error(&pi) <= 1e-10);
    }

    #[test]
    fn zero_theta_monopoly_is_absorbing() {
        let inst = FiniteInstance::uniform(3, 0.0, 3).unwrap();
        let t = transition_matrix(&inst, UnitChoice::Uniform).unwrap();
        let mono = inst.encode(&[1, 1, 1]);
        assert_eq!(t.rows[mono], vec![(mono, 1.0)]);
    }

    #[test]
    fn drift_two_ways() {
        for theta in [0.0, 1.0] {
            let inst = FiniteInstance::new(&[0.3, 0.7], theta, 3).unwrap();
            assert!(one_step_drift_check(&inst).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn drift_sign_and_absorption() {
        let inst = FiniteInstance::new(&[0.4, 0.6], 1.0, 3).unwrap();
        for d in drift_table(&inst).unwrap() {
            let share = d.count_in_set as f64 / 3.0;
            if share < 0.4 {
                assert!(d.from_matrix > 0.0);
            } else if share > 0.4 {
                assert!(d.from_matrix < 0.0);
            }
        }
        let frozen = FiniteInstance::new(&[0.4, 0.6], 0.0, 3).unwrap();
        let table = drift_table(&frozen).unwrap();
        assert_eq!(table[frozen.encode(&[0, 0, 0])].from_matrix, 0.0);
    }

    #[test]
    fn drift_requires_unit_beta() {
        let inst = FiniteInstance::uniform(2, 1.0, 2).unwrap().with_beta(&[2.0, 1.0]).unwrap();
        assert!(one_step_drift_check(&inst).is_err());
    }
}
