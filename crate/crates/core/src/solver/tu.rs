//! Sampled total-unimodularity probe.
//!
//! Draws random square submatrices up to a given order and checks every
//! determinant lies in {−1, 0, 1}. A testing utility, not a decision
//! procedure: `true` means no violation was found.

use num::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::rational::Rat;

/// Samples `trials` square submatrices of order ≤ `max_order` (plus every
/// single entry) and returns false on the first determinant outside
/// {−1, 0, 1}. Deterministic for a fixed seed.
pub fn tu_probe(matrix: &[Vec<Rat>], trials: u64, max_order: usize, seed: u64) -> bool {
    let m = matrix.len();
    if m == 0 {
        return true;
    }
    let n = matrix[0].len();
    let one = Rat::one();
    for row in matrix {
        for v in row {
            if !v.is_zero() && v.abs() != one {
                return false;
            }
        }
    }
    let max_order = max_order.min(m).min(n);
    if max_order < 2 {
        return true;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<usize> = (0..m).collect();
    let cols: Vec<usize> = (0..n).collect();
    for _ in 0..trials {
        let k = rng.gen_range(2..=max_order);
        let ri: Vec<usize> = rows.choose_multiple(&mut rng, k).copied().collect();
        let ci: Vec<usize> = cols.choose_multiple(&mut rng, k).copied().collect();
        let sub: Vec<Vec<Rat>> =
            ri.iter().map(|&i| ci.iter().map(|&j| matrix[i][j].clone()).collect()).collect();
        let d = determinant(sub);
        if !d.is_zero() && d.abs() != one {
            return false;
        }
    }
    true
}

/// Exact determinant by Gaussian elimination with rational pivots.
fn determinant(mut a: Vec<Vec<Rat>>) -> Rat {
    let n = a.len();
    let mut det = Rat::one();
    for col in 0..n {
        let Some(pr) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return Rat::zero();
        };
        if pr != col {
            a.swap(pr, col);
            det = -det;
        }
        let piv = a[col][col].clone();
        det *= &piv;
        for r in (col + 1)..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] / &piv;
            for c in col..n {
                let delta = &f * &a[col][c];
                a[r][c] -= delta;
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn m(rows: &[&[i64]]) -> Vec<Vec<Rat>> {
        rows.iter().map(|r| r.iter().map(|&v| rat(v)).collect()).collect()
    }

    #[test]
    fn incidence_of_even_cycle_is_tu() {
        // Node-edge incidence matrix of the 4-cycle as a bipartite graph.
        let inc = m(&[
            &[1, 0, 0, 1],
            &[1, 1, 0, 0],
            &[0, 1, 1, 0],
            &[0, 0, 1, 1],
        ]);
        assert!(tu_probe(&inc, 500, 4, 7));
    }

    #[test]
    fn detects_violation() {
        assert!(!tu_probe(&m(&[&[1, 1], &[-1, 1]]), 100, 2, 7));
        // Entry outside {−1,0,1} fails immediately.
        assert!(!tu_probe(&m(&[&[2]]), 10, 3, 7));
    }

    #[test]
    fn determinant_exact() {
        assert_eq!(determinant(m(&[&[1, 2], &[3, 4]])), rat(-2));
        assert_eq!(determinant(m(&[&[1, 1], &[-1, 1]])), rat(2));
        assert_eq!(determinant(m(&[&[0, 0], &[0, 0]])), rat(0));
        assert_eq!(
            determinant(m(&[&[2, 0, 1], &[1, 1, 0], &[0, 3, 1]])),
            rat(5)
        );
    }
}
