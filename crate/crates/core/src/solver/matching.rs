//! Minimum-weight perfect bipartite matching over exact rationals.
//!
//! Shortest-augmenting-path Hungarian method with dual potentials, run over
//! composite costs (weight, tie-break key) ordered lexicographically. The
//! tie-break key of edge (i, j) is j·(n+1)^(n−1−i), so among all
//! minimum-weight matchings the lexicographically smallest permutation wins.
//! Forbidden edges carry an infinite cost; if every perfect matching needs
//! one, the instance is reported infeasible.

use num::{BigInt, One, Zero};

use crate::error::{Error, Result};
use crate::rational::Rat;

/// Edge weight: finite rational or a forbidden sentinel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Weight {
    Finite(Rat),
    Forbidden,
}

impl Weight {
    pub fn finite(r: Rat) -> Self {
        Weight::Finite(r)
    }
}

/// A perfect matching: `assignment[i]` is the column matched to row `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    pub assignment: Vec<usize>,
    pub value: Rat,
}

/// Composite cost living in Q², ordered lexicographically. The Hungarian
/// method only needs an ordered additive group, so running it over pairs is
/// sound and bakes the deterministic tie-break into optimality itself.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Cost {
    Fin(Rat, Rat),
    Inf,
}

impl Cost {
    fn zero() -> Self {
        Cost::Fin(Rat::zero(), Rat::zero())
    }

    fn sub(&self, other: &Cost) -> Cost {
        match (self, other) {
            (Cost::Fin(a, b), Cost::Fin(c, d)) => Cost::Fin(a - c, b - d),
            (Cost::Inf, Cost::Fin(..)) => Cost::Inf,
            _ => unreachable!("potentials stay finite"),
        }
    }

    fn add_assign_fin(&mut self, other: &Cost) {
        if let (Cost::Fin(a, b), Cost::Fin(c, d)) = (self, other) {
            *a += c;
            *b += d;
        }
    }

    fn sub_assign_fin(&mut self, other: &Cost) {
        match self {
            Cost::Fin(a, b) => {
                if let Cost::Fin(c, d) = other {
                    *a -= c;
                    *b -= d;
                } else {
                    unreachable!("delta stays finite")
                }
            }
            Cost::Inf => {}
        }
    }
}

/// Minimum-weight perfect matching of a square weight matrix.
///
/// Ties among optimal matchings are broken toward the lexicographically
/// smallest assignment vector. Errors with `Infeasible` when forbidden
/// entries block every perfect matching.
pub fn min_weight_perfect_matching(weights: &[Vec<Weight>]) -> Result<Matching> {
    let n = weights.len();
    if n == 0 {
        return Ok(Matching { assignment: Vec::new(), value: Rat::zero() });
    }
    for row in weights {
        if row.len() != n {
            return Err(Error::Invalid("matching weights must be square".into()));
        }
    }

    // Tie keys: row i ranks its columns with significance (n+1)^(n−1−i).
    let base = BigInt::from(n as u64 + 1);
    let mut sig = vec![BigInt::one(); n];
    for i in (0..n.saturating_sub(1)).rev() {
        sig[i] = &sig[i + 1] * &base;
    }
    let cost = |i: usize, j: usize| -> Cost {
        match &weights[i][j] {
            Weight::Finite(w) => {
                Cost::Fin(w.clone(), Rat::from_integer(&sig[i] * BigInt::from(j as u64)))
            }
            Weight::Forbidden => Cost::Inf,
        }
    };

    // row_of[j] = row currently matched to column j; column n is virtual.
    let mut row_of: Vec<Option<usize>> = vec![None; n + 1];
    let mut pot_row: Vec<Cost> = vec![Cost::zero(); n];
    let mut pot_col: Vec<Cost> = vec![Cost::zero(); n + 1];

    for start_row in 0..n {
        let mut j_cur = n;
        row_of[n] = Some(start_row);
        let mut min_to: Vec<Cost> = vec![Cost::Inf; n + 1];
        let mut prev: Vec<usize> = vec![n; n + 1];
        let mut in_tree = vec![false; n + 1];

        while let Some(i) = row_of[j_cur] {
            in_tree[j_cur] = true;
            let mut delta = Cost::Inf;
            let mut j_next = n;
            for j in 0..n {
                if in_tree[j] {
                    continue;
                }
                let reduced = cost(i, j).sub(&pot_row[i]).sub(&pot_col[j]);
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    prev[j] = j_cur;
                }
                if min_to[j] < delta {
                    delta = min_to[j].clone();
                    j_next = j;
                }
            }
            if delta == Cost::Inf {
                return Err(Error::infeasible());
            }
            for j in 0..=n {
                if in_tree[j] {
                    if let Some(r) = row_of[j] {
                        pot_row[r].add_assign_fin(&delta);
                    }
                    pot_col[j].sub_assign_fin(&delta);
                } else {
                    min_to[j].sub_assign_fin(&delta);
                }
            }
            j_cur = j_next;
        }

        // Augment along the alternating tree.
        while j_cur != n {
            let j = prev[j_cur];
            row_of[j_cur] = row_of[j];
            j_cur = j;
        }
    }

    let mut assignment = vec![usize::MAX; n];
    let mut value = Rat::zero();
    for j in 0..n {
        let i = row_of[j].expect("perfect matching assigns every column");
        assignment[i] = j;
        match &weights[i][j] {
            Weight::Finite(w) => value += w,
            Weight::Forbidden => return Err(Error::infeasible()),
        }
    }
    Ok(Matching { assignment, value })
}

/// Matching over a plain rational matrix (no forbidden edges).
pub fn rat_matching(weights: &[Vec<Rat>]) -> Matching {
    let w: Vec<Vec<Weight>> =
        weights.iter().map(|r| r.iter().map(|v| Weight::Finite(v.clone())).collect()).collect();
    min_weight_perfect_matching(&w).expect("finite matrices always admit a perfect matching")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use itertools::Itertools;

    fn fin(rows: &[&[i64]]) -> Vec<Vec<Weight>> {
        rows.iter()
            .map(|r| r.iter().map(|&v| Weight::Finite(rat(v))).collect())
            .collect()
    }

    /// Exhaustive minimum over all permutations, with the same tie-break.
    fn brute(weights: &[Vec<Weight>]) -> Option<(Vec<usize>, Rat)> {
        let n = weights.len();
        let mut best: Option<(Vec<usize>, Rat)> = None;
        for perm in (0..n).permutations(n) {
            let mut total = Rat::zero();
            let mut ok = true;
            for (i, &j) in perm.iter().enumerate() {
                match &weights[i][j] {
                    Weight::Finite(w) => total += w,
                    Weight::Forbidden => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            match &best {
                Some((bp, bv)) if (bv, bp) <= (&total, &perm) => {}
                _ => best = Some((perm, total)),
            }
        }
        best
    }

    #[test]
    fn spec_examples() {
        let m = min_weight_perfect_matching(&fin(&[&[0, 1], &[1, 0]])).unwrap();
        assert_eq!(m.assignment, vec![0, 1]);
        assert_eq!(m.value, rat(0));

        // Both permutations cost 5; lexicographic tie-break keeps identity.
        let m = min_weight_perfect_matching(&fin(&[&[1, 2], &[3, 4]])).unwrap();
        assert_eq!(m.assignment, vec![0, 1]);
        assert_eq!(m.value, rat(5));

        let m = min_weight_perfect_matching(&fin(&[&[2, 1], &[1, 2]])).unwrap();
        assert_eq!(m.assignment, vec![1, 0]);
        assert_eq!(m.value, rat(2));
    }

    #[test]
    fn forbidden_edges() {
        // Forcing the anti-diagonal.
        let w = vec![
            vec![Weight::Forbidden, Weight::Finite(rat(5))],
            vec![Weight::Finite(rat(7)), Weight::Forbidden],
        ];
        let m = min_weight_perfect_matching(&w).unwrap();
        assert_eq!(m.assignment, vec![1, 0]);
        assert_eq!(m.value, rat(12));

        // A fully blocked row.
        let w = vec![
            vec![Weight::Forbidden, Weight::Forbidden],
            vec![Weight::Finite(rat(1)), Weight::Finite(rat(1))],
        ];
        assert!(matches!(min_weight_perfect_matching(&w), Err(Error::Infeasible { .. })));

        // Blocked only in combination: column 0 reachable from both rows,
        // but row 1 must take column 0, forcing row 0 onto forbidden column 1.
        let w = vec![
            vec![Weight::Finite(rat(3)), Weight::Forbidden],
            vec![Weight::Finite(rat(1)), Weight::Forbidden],
        ];
        assert!(matches!(min_weight_perfect_matching(&w), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn matches_brute_force_with_ties() {
        // Deterministic pseudo-random small matrices, many duplicate entries
        // to exercise the tie-break.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for n in 1..=5 {
            for _ in 0..40 {
                let w: Vec<Vec<Weight>> = (0..n)
                    .map(|_| {
                        (0..n)
                            .map(|_| {
                                let v = next() % 4;
                                if v == 3 {
                                    Weight::Forbidden
                                } else {
                                    Weight::Finite(rat(v as i64))
                                }
                            })
                            .collect()
                    })
                    .collect();
                let got = min_weight_perfect_matching(&w);
                match brute(&w) {
                    None => assert!(got.is_err()),
                    Some((perm, value)) => {
                        let m = got.unwrap();
                        assert_eq!(m.value, value);
                        assert_eq!(m.assignment, perm, "lexicographic tie-break");
                    }
                }
            }
        }
    }
}
