//! Gauss–Jacobi quadrature for expectations under a Beta law.
//!
//! Nodes and weights come from the Golub–Welsch eigen-decomposition of the
//! Jacobi matrix for the weight `(1 - t)^alpha (1 + t)^beta` on `[-1, 1]`,
//! mapped to `[0, 1]` with `alpha = b - 1`, `beta = a - 1`. The rule with
//! `N` nodes integrates polynomials of degree `2N - 1` exactly.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::{DMatrix, SymmetricEigen};

pub const DEFAULT_NODES: usize = 64;

/// Nodes in `[0, 1]` with weights summing to one.
#[derive(Debug, Clone)]
pub struct BetaRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BetaRule {
    pub fn new(a: f64, b: f64, size: usize) -> BetaRule {
        assert!(a > 0.0 && b > 0.0 && size > 0);
        let alpha = b - 1.0;
        let beta = a - 1.0;
        let ab = alpha + beta;
        let mut jacobi = DMatrix::<f64>::zeros(size, size);
        for k in 0..size {
            let kf = k as f64;
            let diag = if k == 0 {
                (beta - alpha) / (ab + 2.0)
            } else {
                (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
            };
            jacobi[(k, k)] = diag;
            if k + 1 < size {
                let j = kf + 1.0;
                let off = if k == 0 {
                    // (1 + alpha + beta) cancels; it vanishes for a + b = 1
                    4.0 * (1.0 + alpha) * (1.0 + beta)
                        / ((2.0 + ab).powi(2) * (3.0 + ab))
                } else {
                    let s = 2.0 * j + ab;
                    4.0 * j * (j + alpha) * (j + beta) * (j + ab)
                        / (s * s * (s + 1.0) * (s - 1.0))
                };
                let off = off.sqrt();
                jacobi[(k, k + 1)] = off;
                jacobi[(k + 1, k)] = off;
            }
        }
        let eigen = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..size)
            .map(|j| {
                let t = eigen.eigenvalues[j];
                let v0 = eigen.eigenvectors[(0, j)];
                (0.5 * (1.0 + t), v0 * v0)
            })
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        BetaRule {
            nodes: pairs.iter().map(|p| p.0.clamp(0.0, 1.0)).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

thread_local! {
    static RULES: RefCell<HashMap<(u64, u64), Rc<BetaRule>>> = RefCell::new(HashMap::new());
}

/// Per-thread cached rule with [`DEFAULT_NODES`] nodes.
pub fn beta_rule(a: f64, b: f64) -> Rc<BetaRule> {
    RULES.with(|cache| {
        cache
            .borrow_mut()
            .entry((a.to_bits(), b.to_bits()))
            .or_insert_with(|| Rc::new(BetaRule::new(a, b, DEFAULT_NODES)))
            .clone()
    })
}
