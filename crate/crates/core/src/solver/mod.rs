//! Exact optimization kernel: rational simplex over boxed variables,
//! minimum-weight perfect bipartite matching, 0/1 branch-and-bound, and a
//! sampled total-unimodularity probe.
//!
//! Every primal returned satisfies its constraints with exact rational
//! equality; integrality of vertices on totally unimodular systems is a
//! property callers assert, not a rounding policy.

mod ilp;
mod matching;
mod simplex;
mod tu;

pub use ilp::{solve_ilp, IlpModel, IlpOutcome, IlpStatus};
pub use matching::{min_weight_perfect_matching, rat_matching, Matching, Weight};
pub use simplex::solve_lp;
pub use tu::tu_probe;

use crate::error::{Error, Result};
use crate::rational::Rat;
use num::Zero;

/// Row relation of a linear constraint.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// A linear program `min c·x  s.t.  Ax ∼ b,  l ≤ x ≤ u` with sparse rows
/// and exact rational data. Lower bounds must be finite; upper bounds may be
/// absent when the feasible region is otherwise bounded.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    num_vars: usize,
    pub objective: Vec<Rat>,
    pub rows: Vec<Vec<(usize, Rat)>>,
    pub relations: Vec<Relation>,
    pub rhs: Vec<Rat>,
    /// Per-variable (lower, upper); `None` upper means unbounded above.
    pub bounds: Vec<(Rat, Option<Rat>)>,
}

impl LinearProgram {
    /// Fresh program with `num_vars` variables, zero objective, and the
    /// 0/1 box on every variable.
    pub fn binary_box(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            objective: vec![Rat::zero(); num_vars],
            rows: Vec::new(),
            relations: Vec::new(),
            rhs: Vec::new(),
            bounds: vec![(Rat::zero(), Some(Rat::from_integer(1.into()))); num_vars],
        }
    }

    /// Fresh program with the nonnegativity box `x ≥ 0`.
    pub fn nonnegative(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            objective: vec![Rat::zero(); num_vars],
            rows: Vec::new(),
            relations: Vec::new(),
            rhs: Vec::new(),
            bounds: vec![(Rat::zero(), None); num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Appends a constraint row. Terms with duplicate indices are summed.
    pub fn add_row(&mut self, terms: Vec<(usize, Rat)>, relation: Relation, rhs: Rat) {
        let mut map: std::collections::BTreeMap<usize, Rat> = std::collections::BTreeMap::new();
        for (j, c) in terms {
            debug_assert!(j < self.num_vars);
            *map.entry(j).or_insert_with(Rat::zero) += c;
        }
        let row: Vec<(usize, Rat)> = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        self.rows.push(row);
        self.relations.push(relation);
        self.rhs.push(rhs);
    }

    pub fn set_objective(&mut self, c: Vec<Rat>) {
        assert_eq!(c.len(), self.num_vars);
        self.objective = c;
    }

    /// Checks a candidate primal for exact feasibility (used by tests and
    /// by the branch-and-bound incumbent bookkeeping).
    pub fn is_feasible(&self, x: &[Rat]) -> bool {
        if x.len() != self.num_vars {
            return false;
        }
        for (j, (l, u)) in self.bounds.iter().enumerate() {
            if &x[j] < l {
                return false;
            }
            if let Some(u) = u {
                if &x[j] > u {
                    return false;
                }
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            let lhs: Rat = row.iter().map(|(j, c)| c * &x[*j]).sum();
            let ok = match self.relations[i] {
                Relation::Le => lhs <= self.rhs[i],
                Relation::Eq => lhs == self.rhs[i],
                Relation::Ge => lhs >= self.rhs[i],
            };
            if !ok {
                return false;
            }
        }
        true
    }

    /// Exact objective value of a primal.
    pub fn objective_of(&self, x: &[Rat]) -> Rat {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.rows.len() != self.relations.len() || self.rows.len() != self.rhs.len() {
            return Err(Error::Invalid("inconsistent LP row arrays".into()));
        }
        if self.objective.len() != self.num_vars || self.bounds.len() != self.num_vars {
            return Err(Error::Invalid("inconsistent LP column arrays".into()));
        }
        for (l, u) in &self.bounds {
            if let Some(u) = u {
                if l > u {
                    return Err(Error::Invalid("lower bound exceeds upper bound".into()));
                }
            }
        }
        Ok(())
    }
}

/// LP termination status.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of an exact LP solve. `primal` is a basic feasible solution (a
/// vertex) present iff the status is optimal.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub status: LpStatus,
    pub primal: Option<Vec<Rat>>,
    pub objective: Option<Rat>,
    /// Indices of the structural/slack variables in the final basis.
    pub basis: Option<Vec<usize>>,
    /// Simplex pivots performed (both phases); finite by Bland's rule.
    pub pivots: u64,
}

impl SolveOutcome {
    pub fn expect_primal(&self) -> Result<&Vec<Rat>> {
        match self.status {
            LpStatus::Optimal => Ok(self.primal.as_ref().expect("optimal outcome carries primal")),
            LpStatus::Infeasible => Err(Error::infeasible()),
            LpStatus::Unbounded => Err(Error::Invalid("unbounded linear program".into())),
        }
    }
}
