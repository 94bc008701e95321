//! Two-phase dense simplex over exact rationals.
//!
//! Bland's rule in both phases (lowest eligible entering column, leaving row
//! tie-broken by lowest basic variable) gives a deterministic, finite pivot
//! sequence. Variables are shifted to their finite lower bounds; finite upper
//! bounds become explicit rows, so the returned basic feasible solution is a
//! vertex of the boxed polyhedron.

use num::{One, Signed, Zero};

use super::{LinearProgram, LpStatus, Relation, SolveOutcome};
use crate::error::{Error, Result};
use crate::rational::Rat;

pub fn solve_lp(lp: &LinearProgram) -> Result<SolveOutcome> {
    solve_lp_with_bounds(lp, &lp.bounds)
}

/// Solves `lp` with the given bounds overriding `lp.bounds` (used by
/// branch-and-bound to fix variables without rebuilding rows).
pub(crate) fn solve_lp_with_bounds(
    lp: &LinearProgram,
    bounds: &[(Rat, Option<Rat>)],
) -> Result<SolveOutcome> {
    lp.validate()?;
    if bounds.len() != lp.num_vars() {
        return Err(Error::Invalid("bounds length mismatch".into()));
    }
    for (l, u) in bounds {
        if let Some(u) = u {
            if l > u {
                return infeasible_outcome();
            }
        }
    }

    // Variables fixed by their bounds vanish from the tableau.
    let n = lp.num_vars();
    let mut free = Vec::new();
    let mut col_of_var = vec![usize::MAX; n];
    for (j, (l, u)) in bounds.iter().enumerate() {
        if u.as_ref() != Some(l) {
            col_of_var[j] = free.len();
            free.push(j);
        }
    }
    let nf = free.len();

    // Rows over shifted variables y = x − l, rhs ≥ 0 after sign
    // normalization; finite upper bounds append y ≤ u − l rows.
    struct Row {
        terms: Vec<(usize, Rat)>,
        relation: Relation,
        rhs: Rat,
    }
    let mut rows: Vec<Row> = Vec::with_capacity(lp.rows.len());
    for (i, terms) in lp.rows.iter().enumerate() {
        let mut rhs = lp.rhs[i].clone();
        let mut t = Vec::with_capacity(terms.len());
        for (j, c) in terms {
            rhs -= c * &bounds[*j].0;
            if col_of_var[*j] != usize::MAX {
                t.push((col_of_var[*j], c.clone()));
            }
        }
        let mut relation = lp.relations[i];
        if t.is_empty() {
            let ok = match relation {
                Relation::Le => Rat::zero() <= rhs,
                Relation::Eq => rhs.is_zero(),
                Relation::Ge => Rat::zero() >= rhs,
            };
            if ok {
                continue;
            }
            return infeasible_outcome();
        }
        if rhs.is_negative() {
            rhs = -rhs;
            for (_, c) in &mut t {
                *c = -&*c;
            }
            relation = match relation {
                Relation::Le => Relation::Ge,
                Relation::Eq => Relation::Eq,
                Relation::Ge => Relation::Le,
            };
        }
        rows.push(Row { terms: t, relation, rhs });
    }
    for (k, &j) in free.iter().enumerate() {
        if let Some(u) = &bounds[j].1 {
            let range = u - &bounds[j].0;
            rows.push(Row { terms: vec![(k, Rat::one())], relation: Relation::Le, rhs: range });
        }
    }

    let m = rows.len();
    // Column layout: [free structural | slack/surplus | artificial].
    let mut num_slack = 0usize;
    let mut num_art = 0usize;
    for r in &rows {
        match r.relation {
            Relation::Le => num_slack += 1,
            Relation::Eq => num_art += 1,
            Relation::Ge => {
                num_slack += 1;
                num_art += 1;
            }
        }
    }
    let art_start = nf + num_slack;
    let total = art_start + num_art;

    let mut a: Vec<Vec<Rat>> = (0..m).map(|_| vec![Rat::zero(); total]).collect();
    let mut b: Vec<Rat> = Vec::with_capacity(m);
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    let mut next_slack = nf;
    let mut next_art = art_start;
    for (i, r) in rows.iter().enumerate() {
        for (j, c) in &r.terms {
            a[i][*j] = c.clone();
        }
        b.push(r.rhs.clone());
        match r.relation {
            Relation::Le => {
                a[i][next_slack] = Rat::one();
                basis.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                a[i][next_slack] = -Rat::one();
                next_slack += 1;
                a[i][next_art] = Rat::one();
                basis.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                a[i][next_art] = Rat::one();
                basis.push(next_art);
                next_art += 1;
            }
        }
    }

    let mut tab = Tableau { a, b, basis, ncols: total, pivots: 0 };

    // Phase 1: minimize the sum of artificials.
    if num_art > 0 {
        let phase1_cost = |j: usize| {
            if j >= art_start {
                Rat::one()
            } else {
                Rat::zero()
            }
        };
        let (mut z, mut obj) = tab.reduced_costs(&phase1_cost);
        tab.optimize(&mut z, &mut obj, total)?;
        if !obj.is_zero() {
            return Ok(SolveOutcome {
                status: LpStatus::Infeasible,
                primal: None,
                objective: None,
                basis: None,
                pivots: tab.pivots,
            });
        }
        tab.drive_out_artificials(art_start);
    }

    // Phase 2: minimize the true objective over non-artificial columns.
    let cost = |j: usize| {
        if j < nf {
            lp.objective[free[j]].clone()
        } else {
            Rat::zero()
        }
    };
    let (mut z, mut obj) = tab.reduced_costs(&cost);
    match tab.optimize(&mut z, &mut obj, art_start) {
        Ok(()) => {}
        Err(Error::Invalid(msg)) if msg == "unbounded" => {
            return Ok(SolveOutcome {
                status: LpStatus::Unbounded,
                primal: None,
                objective: None,
                basis: None,
                pivots: tab.pivots,
            });
        }
        Err(e) => return Err(e),
    }

    // Extract and unshift the primal.
    let mut x: Vec<Rat> = bounds.iter().map(|(l, _)| l.clone()).collect();
    for (i, &bi) in tab.basis.iter().enumerate() {
        if bi < nf {
            x[free[bi]] += &tab.b[i];
        }
    }
    let objective = lp.objective_of(&x);
    debug_assert!(lp.is_feasible(&x), "simplex primal must be exactly feasible");
    let basis_vars: Vec<usize> = tab
        .basis
        .iter()
        .map(|&bi| if bi < nf { free[bi] } else { n + (bi - nf) })
        .collect();
    Ok(SolveOutcome {
        status: LpStatus::Optimal,
        primal: Some(x),
        objective: Some(objective),
        basis: Some(basis_vars),
        pivots: tab.pivots,
    })
}

fn infeasible_outcome() -> Result<SolveOutcome> {
    Ok(SolveOutcome {
        status: LpStatus::Infeasible,
        primal: None,
        objective: None,
        basis: None,
        pivots: 0,
    })
}

struct Tableau {
    a: Vec<Vec<Rat>>,
    b: Vec<Rat>,
    basis: Vec<usize>,
    ncols: usize,
    pivots: u64,
}

impl Tableau {
    /// Reduced costs z_j = c_j − c_B·B⁻¹A_j for the current basis, plus the
    /// current objective value c_B·b.
    fn reduced_costs(&self, cost: &dyn Fn(usize) -> Rat) -> (Vec<Rat>, Rat) {
        let mut z: Vec<Rat> = (0..self.ncols).map(cost).collect();
        let mut obj = Rat::zero();
        for (i, &bi) in self.basis.iter().enumerate() {
            let cb = cost(bi);
            if cb.is_zero() {
                continue;
            }
            obj += &cb * &self.b[i];
            for (j, zj) in z.iter_mut().enumerate() {
                if !self.a[i][j].is_zero() {
                    *zj -= &cb * &self.a[i][j];
                }
            }
        }
        (z, obj)
    }

    /// Bland-rule simplex loop over the first `eligible` columns.
    /// Returns Err("unbounded") when a column has no positive entry.
    fn optimize(&mut self, z: &mut [Rat], obj: &mut Rat, eligible: usize) -> Result<()> {
        loop {
            // Entering: lowest index with a negative reduced cost.
            let Some(jc) = (0..eligible).find(|&j| z[j].is_negative()) else {
                return Ok(());
            };
            // Leaving: minimum ratio, ties by lowest basic variable index.
            let mut best: Option<(Rat, usize, usize)> = None;
            for i in 0..self.a.len() {
                if self.a[i][jc].is_positive() {
                    let ratio = &self.b[i] / &self.a[i][jc];
                    let key = (ratio, self.basis[i], i);
                    match &best {
                        Some((r, bv, _)) if (&key.0, &key.1) >= (r, bv) => {}
                        _ => best = Some(key),
                    }
                }
            }
            let Some((_, _, r)) = best else {
                return Err(Error::Invalid("unbounded".into()));
            };
            self.pivot(r, jc, z, obj);
        }
    }

    fn pivot(&mut self, r: usize, jc: usize, z: &mut [Rat], obj: &mut Rat) {
        self.pivots += 1;
        let piv = self.a[r][jc].clone();
        if !piv.is_one() {
            let inv = Rat::one() / &piv;
            self.b[r] *= &inv;
            for v in self.a[r].iter_mut() {
                if !v.is_zero() {
                    *v *= &inv;
                }
            }
        }
        let nonzero_cols: Vec<usize> =
            (0..self.a[r].len()).filter(|&j| !self.a[r][j].is_zero()).collect();
        for i in 0..self.a.len() {
            if i == r || self.a[i][jc].is_zero() {
                continue;
            }
            let f = std::mem::replace(&mut self.a[i][jc], Rat::zero());
            let (row_r, row_i) = if i < r {
                let (lo, hi) = self.a.split_at_mut(r);
                (&hi[0], &mut lo[i])
            } else {
                let (lo, hi) = self.a.split_at_mut(i);
                (&lo[r], &mut hi[0])
            };
            for &j in &nonzero_cols {
                if j != jc {
                    row_i[j] -= &f * &row_r[j];
                }
            }
            let delta = &f * &self.b[r];
            self.b[i] -= delta;
        }
        if !z[jc].is_zero() {
            let f = std::mem::replace(&mut z[jc], Rat::zero());
            for &j in &nonzero_cols {
                if j != jc {
                    z[j] -= &f * &self.a[r][j];
                }
            }
            *obj += &f * &self.b[r];
        }
        self.basis[r] = jc;
    }

    /// After a zero-value phase 1, pivots basic artificials out on any
    /// non-artificial column, dropping rows that turn out redundant.
    fn drive_out_artificials(&mut self, art_start: usize) {
        let mut i = 0;
        while i < self.a.len() {
            if self.basis[i] >= art_start {
                if let Some(j) = (0..art_start).find(|&j| !self.a[i][j].is_zero()) {
                    let mut z = vec![Rat::zero(); self.ncols];
                    let mut obj = Rat::zero();
                    self.pivot(i, j, &mut z, &mut obj);
                } else {
                    self.a.remove(i);
                    self.b.remove(i);
                    self.basis.remove(i);
                    continue;
                }
            }
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, ratio};
    use num::Zero;

    fn lp_value(lp: &LinearProgram) -> Rat {
        let out = solve_lp(lp).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        out.objective.unwrap()
    }

    #[test]
    fn fixed_variable() {
        // min x s.t. x = 1, 0 ≤ x ≤ 1.
        let mut lp = LinearProgram::binary_box(1);
        lp.set_objective(vec![rat(1)]);
        lp.add_row(vec![(0, rat(1))], Relation::Eq, rat(1));
        let out = solve_lp(&lp).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert_eq!(out.primal.unwrap(), vec![rat(1)]);
        assert_eq!(out.objective.unwrap(), rat(1));
    }

    #[test]
    fn assignment_relaxation_is_integral() {
        // 2×2 assignment with weights [[0,1],[1,0]]: the Birkhoff vertex
        // η₁₁ = η₂₂ = 1 at value 0.
        let mut lp = LinearProgram::nonnegative(4);
        lp.set_objective(vec![rat(0), rat(1), rat(1), rat(0)]);
        for i in 0..2 {
            lp.add_row(vec![(2 * i, rat(1)), (2 * i + 1, rat(1))], Relation::Eq, rat(1));
        }
        for j in 0..2 {
            lp.add_row(vec![(j, rat(1)), (j + 2, rat(1))], Relation::Eq, rat(1));
        }
        let out = solve_lp(&lp).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        let x = out.primal.unwrap();
        assert_eq!(x, vec![rat(1), rat(0), rat(0), rat(1)]);
        assert!(out.objective.unwrap().is_zero());
    }

    #[test]
    fn transportation_three_by_three() {
        // Weights [[1,2,3],[4,5,6],[7,8,9]]; minimum over the 6 permutations
        // is 15 and the relaxation attains it.
        let mut lp = LinearProgram::nonnegative(9);
        lp.set_objective((1..=9).map(rat).collect());
        for i in 0..3 {
            lp.add_row((0..3).map(|j| (3 * i + j, rat(1))).collect(), Relation::Eq, rat(1));
        }
        for j in 0..3 {
            lp.add_row((0..3).map(|i| (3 * i + j, rat(1))).collect(), Relation::Eq, rat(1));
        }
        assert_eq!(lp_value(&lp), rat(15));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::binary_box(1);
        lp.add_row(vec![(0, rat(1))], Relation::Ge, rat(2));
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::nonnegative(1);
        lp.set_objective(vec![rat(-1)]);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn shifted_lower_bounds() {
        // min x + y s.t. x + y ≥ 7, x ∈ [2, 10], y ∈ [3, ∞).
        let mut lp = LinearProgram {
            num_vars: 2,
            objective: vec![rat(1), rat(1)],
            rows: vec![],
            relations: vec![],
            rhs: vec![],
            bounds: vec![(rat(2), Some(rat(10))), (rat(3), None)],
        };
        lp.add_row(vec![(0, rat(1)), (1, rat(1))], Relation::Ge, rat(7));
        let out = solve_lp(&lp).unwrap();
        assert_eq!(out.objective.unwrap(), rat(7));
        let x = out.primal.unwrap();
        assert_eq!(&x[0] + &x[1], rat(7));
        assert!(x[0] >= rat(2) && x[1] >= rat(3));
    }

    #[test]
    fn fractional_data_stays_exact() {
        // min (1/3)x + (1/7)y s.t. x + 2y = 1, box [0,1]²: optimum at the
        // vertex y = 1/2, value 1/14.
        let mut lp = LinearProgram::binary_box(2);
        lp.set_objective(vec![ratio(1, 3), ratio(1, 7)]);
        lp.add_row(vec![(0, rat(1)), (1, rat(2))], Relation::Eq, rat(1));
        let out = solve_lp(&lp).unwrap();
        assert_eq!(out.objective.unwrap(), ratio(1, 14));
        assert_eq!(out.primal.unwrap(), vec![rat(0), ratio(1, 2)]);
    }

    #[test]
    fn degenerate_cycling_guard() {
        // A classic degenerate instance; Bland's rule must terminate.
        let mut lp = LinearProgram::nonnegative(4);
        lp.set_objective(vec![ratio(-3, 4), rat(150), ratio(-1, 50), rat(6)]);
        lp.add_row(
            vec![(0, ratio(1, 4)), (1, rat(-60)), (2, ratio(-1, 25)), (3, rat(9))],
            Relation::Le,
            rat(0),
        );
        lp.add_row(
            vec![(0, ratio(1, 2)), (1, rat(-90)), (2, ratio(-1, 50)), (3, rat(3))],
            Relation::Le,
            rat(0),
        );
        lp.add_row(vec![(2, rat(1))], Relation::Le, rat(1));
        let out = solve_lp(&lp).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert_eq!(out.objective.unwrap(), ratio(-1, 20));
        assert!(out.pivots < 100);
    }
}
