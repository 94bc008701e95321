//! 0/1 branch-and-bound on top of the exact simplex.
//!
//! Depth-first search with LP relaxation bounds and incumbent pruning.
//! Branching picks a most-fractional integral variable (ties by lowest
//! index), or follows an explicit priority order when the model carries one;
//! the 0-branch is explored first. All comparisons are exact, so the first
//! incumbent that matches the best bound is the deterministic optimum.

use num::{One, Signed, Zero};

use super::simplex::solve_lp_with_bounds;
use super::{LinearProgram, LpStatus};
use crate::error::{Error, Result};
use crate::rational::Rat;

/// A 0/1 integer program: a base LP plus the set of variables required
/// binary. Integral variables must have bounds within [0, 1].
#[derive(Clone, Debug)]
pub struct IlpModel {
    pub base: LinearProgram,
    pub integral: Vec<usize>,
    /// When set, branching follows this variable order (first fractional
    /// entry wins) instead of the most-fractional rule.
    pub branch_priority: Option<Vec<usize>>,
}

impl IlpModel {
    pub fn new(base: LinearProgram, integral: Vec<usize>) -> Self {
        IlpModel { base, integral, branch_priority: None }
    }

    /// All variables binary.
    pub fn all_binary(base: LinearProgram) -> Self {
        let n = base.num_vars();
        IlpModel::new(base, (0..n).collect())
    }

    fn validate(&self) -> Result<()> {
        let zero = Rat::zero();
        let one = Rat::one();
        for &j in &self.integral {
            if j >= self.base.num_vars() {
                return Err(Error::Invalid(format!("integral variable {j} out of range")));
            }
            let (l, u) = &self.base.bounds[j];
            if l < &zero || u.as_ref().map_or(true, |u| u > &one) {
                return Err(Error::Invalid(format!(
                    "integral variable {j} must be bounded within [0,1]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum IlpStatus {
    Optimal,
    Infeasible,
    BudgetExhausted,
}

#[derive(Clone, Debug)]
pub struct IlpOutcome {
    pub status: IlpStatus,
    /// Optimal (or best-so-far when the budget ran out) binary assignment.
    pub primal: Option<Vec<Rat>>,
    pub objective: Option<Rat>,
    /// Branch-and-bound nodes expanded.
    pub nodes: u64,
    /// Total simplex pivots across all nodes.
    pub pivots: u64,
}

impl IlpOutcome {
    pub fn expect_primal(&self) -> Result<&Vec<Rat>> {
        match self.status {
            IlpStatus::Optimal => Ok(self.primal.as_ref().expect("optimal carries primal")),
            IlpStatus::Infeasible => Err(Error::infeasible()),
            IlpStatus::BudgetExhausted => Err(Error::BudgetExhausted { nodes: self.nodes }),
        }
    }
}

/// Exact 0/1 optimum by branch-and-bound; `budget` caps the node count.
pub fn solve_ilp(model: &IlpModel, budget: Option<u64>) -> Result<IlpOutcome> {
    model.validate()?;
    let lp = &model.base;

    // DFS stack of (variable, value) fix lists; children pushed 1-then-0 so
    // the 0-branch is explored first.
    let mut stack: Vec<Vec<(usize, bool)>> = vec![Vec::new()];
    let mut incumbent: Option<(Vec<Rat>, Rat)> = None;
    let mut nodes = 0u64;
    let mut pivots = 0u64;

    while let Some(fixes) = stack.pop() {
        if let Some(cap) = budget {
            if nodes >= cap {
                return Ok(IlpOutcome {
                    status: IlpStatus::BudgetExhausted,
                    objective: incumbent.as_ref().map(|(_, v)| v.clone()),
                    primal: incumbent.map(|(x, _)| x),
                    nodes,
                    pivots,
                });
            }
        }
        nodes += 1;

        let mut bounds = lp.bounds.clone();
        for &(j, v) in &fixes {
            let val = if v { Rat::one() } else { Rat::zero() };
            bounds[j] = (val.clone(), Some(val));
        }
        let relax = solve_lp_with_bounds(lp, &bounds)?;
        pivots += relax.pivots;
        match relax.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Err(Error::Invalid("unbounded ILP relaxation".into()));
            }
            LpStatus::Optimal => {}
        }
        let x = relax.primal.expect("optimal relaxation carries primal");
        let bound = relax.objective.expect("optimal relaxation carries objective");
        if let Some((_, best)) = &incumbent {
            if &bound >= best {
                continue;
            }
        }

        let frac = select_branch_var(model, &x);
        match frac {
            None => {
                // Integral: new incumbent (strict improvement only, so the
                // first optimum found in DFS order is kept).
                let improves = incumbent.as_ref().map_or(true, |(_, best)| &bound < best);
                if improves {
                    incumbent = Some((x, bound));
                }
            }
            Some(j) => {
                let mut one_branch = fixes.clone();
                one_branch.push((j, true));
                let mut zero_branch = fixes;
                zero_branch.push((j, false));
                stack.push(one_branch);
                stack.push(zero_branch);
            }
        }
    }

    match incumbent {
        Some((x, v)) => Ok(IlpOutcome {
            status: IlpStatus::Optimal,
            primal: Some(x),
            objective: Some(v),
            nodes,
            pivots,
        }),
        None => Ok(IlpOutcome {
            status: IlpStatus::Infeasible,
            primal: None,
            objective: None,
            nodes,
            pivots,
        }),
    }
}

/// Most-fractional integral variable (maximal min(f, 1−f), ties by lowest
/// index), or the first fractional variable in the model's priority order.
fn select_branch_var(model: &IlpModel, x: &[Rat]) -> Option<usize> {
    let fractional = |j: usize| !x[j].is_zero() && !x[j].is_one();
    if let Some(order) = &model.branch_priority {
        return order.iter().copied().find(|&j| fractional(j));
    }
    let half = Rat::new(1.into(), 2.into());
    let mut best: Option<(Rat, usize)> = None;
    for &j in &model.integral {
        if !fractional(j) {
            continue;
        }
        // Distance from 1/2, smaller is more fractional.
        let d = (&x[j] - &half).abs();
        match &best {
            Some((bd, _)) if bd <= &d => {}
            _ => best = Some((d, j)),
        }
    }
    best.map(|(_, j)| j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::solver::Relation;

    #[test]
    fn integral_relaxation_skips_branching() {
        // Assignment polytope: relaxation vertex already binary.
        let mut lp = LinearProgram::binary_box(4);
        lp.set_objective(vec![rat(0), rat(1), rat(1), rat(0)]);
        for i in 0..2 {
            lp.add_row(vec![(2 * i, rat(1)), (2 * i + 1, rat(1))], Relation::Eq, rat(1));
        }
        for j in 0..2 {
            lp.add_row(vec![(j, rat(1)), (j + 2, rat(1))], Relation::Eq, rat(1));
        }
        let out = solve_ilp(&IlpModel::all_binary(lp), None).unwrap();
        assert_eq!(out.status, IlpStatus::Optimal);
        assert_eq!(out.nodes, 1);
        assert_eq!(out.objective.unwrap(), rat(0));
    }

    #[test]
    fn branches_on_fractional_vertex() {
        // max x+y+z (as min of the negation) over pairwise sums ≤ 1: the LP
        // optimum is the all-1/2 vertex, the ILP optimum picks one variable.
        let mut lp = LinearProgram::binary_box(3);
        lp.set_objective(vec![rat(-1), rat(-1), rat(-1)]);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            lp.add_row(vec![(i, rat(1)), (j, rat(1))], Relation::Le, rat(1));
        }
        let out = solve_ilp(&IlpModel::all_binary(lp), None).unwrap();
        assert_eq!(out.status, IlpStatus::Optimal);
        assert_eq!(out.objective.unwrap(), rat(-1));
        assert!(out.nodes > 1);
        let x = out.primal.unwrap();
        assert!(x.iter().all(|v| v.is_zero() || v.is_one()));
    }

    #[test]
    fn infeasible_system() {
        let mut lp = LinearProgram::binary_box(2);
        lp.add_row(vec![(0, rat(1)), (1, rat(1))], Relation::Eq, rat(3));
        let out = solve_ilp(&IlpModel::all_binary(lp), None).unwrap();
        assert_eq!(out.status, IlpStatus::Infeasible);
    }

    #[test]
    fn budget_exhaustion_is_distinct() {
        let mut lp = LinearProgram::binary_box(3);
        lp.set_objective(vec![rat(-1), rat(-1), rat(-1)]);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            lp.add_row(vec![(i, rat(1)), (j, rat(1))], Relation::Le, rat(1));
        }
        let out = solve_ilp(&IlpModel::all_binary(lp), Some(1)).unwrap();
        assert_eq!(out.status, IlpStatus::BudgetExhausted);
        assert_eq!(out.nodes, 1);
    }
}
