use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

const ROW_TOL: f64 = 1e-9;

/// Cross-market weights `m(r, r')`: zero diagonal, rows summing to one.
/// With a single market the kernel is the 1x1 zero matrix and the
/// cross-market branch carries no weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MigrationKernel {
    rows: Vec<Vec<f64>>,
}

impl MigrationKernel {
    /// Unchecked constructor; call [`MigrationKernel::validate`].
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        MigrationKernel { rows }
    }

    /// Equal weight on every other market.
    pub fn uniform(markets: usize) -> Self {
        let off = if markets > 1 {
            1.0 / (markets - 1) as f64
        } else {
            0.0
        };
        let rows = (0..markets)
            .map(|r| (0..markets).map(|s| if r == s { 0.0 } else { off }).collect())
            .collect();
        MigrationKernel { rows }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.rows[from][to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.rows[from]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn validate(&self) -> Result<()> {
        let size = self.rows.len();
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != size {
                return Err(validation(format!("migration row {r} has {} entries, expected {size}", row.len())));
            }
            if row.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(validation(format!("migration row {r} has entries outside [0, 1]")));
            }
            if row[r] != 0.0 {
                return Err(validation(format!("migration diagonal m({r},{r}) = {} must be 0", row[r])));
            }
            if size > 1 {
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > ROW_TOL {
                    return Err(validation(format!("migration row {r} sums to {total}, not 1")));
                }
            }
        }
        Ok(())
    }
}
