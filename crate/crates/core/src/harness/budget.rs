//! Query limits `(t, n1, …, n5)` of a CMIM adversary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Oracle names, indexed by `i − 1` for `O_i'`.
pub const ORACLE_NAMES: [&str; 5] = ["O1", "O2", "O3", "O4", "O5"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryBudget {
    /// Total oracle queries over both stages.
    pub t: u64,
    pub n: [u64; 5],
}

impl AdversaryBudget {
    pub fn new(t: u64, n: [u64; 5]) -> Self {
        Self { t, n }
    }

    /// Same limit for every oracle and `t` their sum.
    pub fn uniform(n: u64) -> Self {
        Self {
            t: 5 * n,
            n: [n; 5],
        }
    }
}

impl Default for AdversaryBudget {
    fn default() -> Self {
        Self::uniform(64)
    }
}

/// Exact per-oracle accounting against an [`AdversaryBudget`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BudgetMeter {
    budget: AdversaryBudget,
    used: [u64; 5],
}

impl BudgetMeter {
    pub fn new(budget: AdversaryBudget) -> Self {
        Self {
            budget,
            used: [0; 5],
        }
    }

    /// Charges one query to `O_oracle'` (1-based). A refused query is not
    /// counted.
    pub fn charge(&mut self, oracle: usize) -> Result<()> {
        let k = oracle - 1;
        if self.used[k] >= self.budget.n[k] {
            return Err(Error::BudgetExceeded(ORACLE_NAMES[k]));
        }
        if self.total() >= self.budget.t {
            return Err(Error::BudgetExceeded("t"));
        }
        self.used[k] += 1;
        Ok(())
    }

    pub fn used(&self) -> [u64; 5] {
        self.used
    }

    pub fn total(&self) -> u64 {
        self.used.iter().sum()
    }

    pub fn budget(&self) -> AdversaryBudget {
        self.budget
    }
}
