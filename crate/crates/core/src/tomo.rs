//! Static two-direction reconstruction, uniqueness, counting, and the
//! brute-force enumeration oracles that anchor the test suite.
//!
//! Reconstruction runs a deterministic Ryser-style greedy fill over the
//! grid, repaired by shortest augmenting paths when the grid is a proper
//! subset of the full line product; the combination is exactly a max-flow
//! feasibility check, so failure certifies infeasibility.

use itertools::Itertools;
use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};
use crate::geometry::{
    grid_from_xrays, xray, Grid, LatticeDirection, PointSet, RationalPoint, XRayData,
};
use crate::rational::Rat;
use crate::solver::Weight;
use crate::tracking::{TomographyInstance, TrackSet, WeightModel};

/// Outcome of a static reconstruction request.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReconStatus {
    FeasibleWithSolution,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    pub status: ReconStatus,
    pub solution: Option<PointSet>,
    pub unique: Option<bool>,
    pub count: Option<u64>,
}

impl ReconstructionResult {
    fn infeasible() -> Self {
        ReconstructionResult {
            status: ReconStatus::Infeasible,
            solution: None,
            unique: None,
            count: None,
        }
    }
}

/// Enumeration ceilings for the exponential oracles.
#[derive(Clone, Copy, Debug)]
pub struct OracleBounds {
    pub max_grid: usize,
    pub max_particles: u64,
    pub max_frames: usize,
}

impl Default for OracleBounds {
    fn default() -> Self {
        OracleBounds { max_grid: 16, max_particles: 6, max_frames: 4 }
    }
}

/// Default grid ceiling for `count_solutions`.
pub const DEFAULT_ENUM_GRID: usize = 24;

/// Per-line bookkeeping shared by reconstruction and enumeration.
struct LineSystem {
    /// (anchor, demand) per f1 support line, grid point indices per line.
    l1: Vec<(RationalPoint, u64, Vec<usize>)>,
    l2: Vec<(RationalPoint, u64, Vec<usize>)>,
    /// Per grid point: (index into l1, index into l2).
    point_lines: Vec<(usize, usize)>,
}

impl LineSystem {
    fn build(f1: &XRayData, f2: &XRayData, grid: &Grid) -> Result<LineSystem> {
        let mk = |f: &XRayData| -> Vec<(RationalPoint, u64, Vec<usize>)> {
            let lines = grid.lines_of(f.direction_index);
            // Support lines in anchor order; lines absent from the grid keep
            // an empty member list (they make the instance infeasible).
            f.lines()
                .map(|(anchor, count)| {
                    let members = lines.get(anchor).cloned().unwrap_or_default();
                    (anchor.clone(), count, members)
                })
                .collect()
        };
        let l1 = mk(f1);
        let l2 = mk(f2);
        let mut point_lines = vec![(usize::MAX, usize::MAX); grid.len()];
        for (i, (_, _, members)) in l1.iter().enumerate() {
            for &p in members {
                point_lines[p].0 = i;
            }
        }
        for (j, (_, _, members)) in l2.iter().enumerate() {
            for &p in members {
                point_lines[p].1 = j;
            }
        }
        Ok(LineSystem { l1, l2, point_lines })
    }

    /// Points that lie on a support line of both directions.
    fn usable(&self, p: usize) -> bool {
        self.point_lines[p].0 != usize::MAX && self.point_lines[p].1 != usize::MAX
    }
}

/// Reconstructs a realization of two X-rays over an explicit candidate
/// grid, or reports infeasibility. Deterministic: greedy fill processing
/// f1 lines by decreasing demand (ties by anchor), assigning within a line
/// to the f2 lines of largest residual demand (ties by anchor), repaired by
/// breadth-first augmenting paths in anchor order.
pub fn reconstruct_on_grid(
    directions: &[LatticeDirection],
    f1: &XRayData,
    f2: &XRayData,
    grid: &Grid,
) -> Result<Option<PointSet>> {
    check_two(directions, f1, f2)?;
    let sys = LineSystem::build(f1, f2, grid)?;
    let mut chosen = vec![false; grid.len()];
    let mut residual1: Vec<u64> = sys.l1.iter().map(|(_, c, _)| *c).collect();
    let mut residual2: Vec<u64> = sys.l2.iter().map(|(_, c, _)| *c).collect();

    // Greedy order: demand descending, anchor ascending.
    let mut order: Vec<usize> = (0..sys.l1.len()).collect();
    order.sort_by(|&a, &b| {
        sys.l1[b].1.cmp(&sys.l1[a].1).then_with(|| sys.l1[a].0.cmp(&sys.l1[b].0))
    });
    for &i in &order {
        // Candidates on this line, by residual f2 demand desc, anchor asc.
        let mut cands: Vec<usize> = sys.l1[i].2.iter().copied().filter(|&p| sys.usable(p)).collect();
        cands.sort_by(|&p, &q| {
            let (jp, jq) = (sys.point_lines[p].1, sys.point_lines[q].1);
            residual2[jq]
                .cmp(&residual2[jp])
                .then_with(|| sys.l2[jp].0.cmp(&sys.l2[jq].0))
        });
        for p in cands {
            if residual1[i] == 0 {
                break;
            }
            let j = sys.point_lines[p].1;
            if residual2[j] > 0 && !chosen[p] {
                chosen[p] = true;
                residual1[i] -= 1;
                residual2[j] -= 1;
            }
        }
    }

    // Augmenting-path repair for any remaining demand (Ford–Fulkerson from
    // the greedy warm start; failure certifies max-flow < n).
    for i in 0..sys.l1.len() {
        while residual1[i] > 0 {
            if !augment(&sys, i, &mut chosen, &mut residual2) {
                return Ok(None);
            }
            residual1[i] -= 1;
        }
    }
    let points: Vec<RationalPoint> = chosen
        .iter()
        .enumerate()
        .filter(|(_, &c)| c)
        .map(|(p, _)| grid.point(p).clone())
        .collect();
    let solution = PointSet::new(points);
    debug_assert_eq!(xray(&solution, f1.direction_index, &directions[f1.direction_index])?, *f1);
    debug_assert_eq!(xray(&solution, f2.direction_index, &directions[f2.direction_index])?, *f2);
    Ok(Some(solution))
}

/// One BFS augmentation from f1 line `start` toward any f2 line with
/// residual demand. Alternates unchosen forward points and chosen backward
/// points; deterministic by scanning members in stored (anchor) order.
fn augment(
    sys: &LineSystem,
    start: usize,
    chosen: &mut [bool],
    residual2: &mut [u64],
) -> bool {
    let n2 = sys.l2.len();
    let n1 = sys.l1.len();
    // parent2[j] = point used to enter f2 line j; parent1[i] = chosen point
    // removed to step back to f1 line i.
    let mut parent2: Vec<Option<usize>> = vec![None; n2];
    let mut parent1: Vec<Option<usize>> = vec![None; n1];
    let mut seen1 = vec![false; n1];
    let mut queue = VecDeque::new();
    seen1[start] = true;
    queue.push_back(start);
    let mut goal: Option<usize> = None;
    'bfs: while let Some(i) = queue.pop_front() {
        for &p in &sys.l1[i].2 {
            if !sys.usable(p) || chosen[p] {
                continue;
            }
            let j = sys.point_lines[p].1;
            if parent2[j].is_some() {
                continue;
            }
            parent2[j] = Some(p);
            if residual2[j] > 0 {
                goal = Some(j);
                break 'bfs;
            }
            // Step back over chosen points of line j.
            for &q in &sys.l2[j].2 {
                if !chosen[q] {
                    continue;
                }
                let i2 = sys.point_lines[q].0;
                if !seen1[i2] {
                    seen1[i2] = true;
                    parent1[i2] = Some(q);
                    queue.push_back(i2);
                }
            }
        }
    }
    let Some(mut j) = goal else {
        return false;
    };
    residual2[j] -= 1;
    loop {
        let p = parent2[j].expect("path reconstruction");
        chosen[p] = true;
        let i = sys.point_lines[p].0;
        match parent1[i] {
            None => break,
            Some(q) => {
                chosen[q] = false;
                j = sys.point_lines[q].1;
            }
        }
    }
    true
}

fn check_two(directions: &[LatticeDirection], f1: &XRayData, f2: &XRayData) -> Result<()> {
    if f1.mass() != f2.mass() {
        return Err(Error::MassMismatch { left: f1.mass(), right: f2.mass() });
    }
    if directions[f1.direction_index] == directions[f2.direction_index] {
        return Err(Error::IdenticalDirections);
    }
    Ok(())
}

/// Two-direction reconstruction over the full candidate grid.
pub fn reconstruct_two(
    directions: &[LatticeDirection],
    f1: &XRayData,
    f2: &XRayData,
) -> Result<ReconstructionResult> {
    check_two(directions, f1, f2)?;
    let grid = grid_from_xrays(f1, f2, directions)?;
    match reconstruct_on_grid(directions, f1, f2, &grid)? {
        None => Ok(ReconstructionResult::infeasible()),
        Some(solution) => Ok(ReconstructionResult {
            status: ReconStatus::FeasibleWithSolution,
            solution: Some(solution),
            unique: None,
            count: None,
        }),
    }
}

/// Uniqueness of a feasible two-direction instance, by reconstructing one
/// solution and searching for a switching configuration (two present
/// points whose cross points are absent). On the full planar grid the
/// absence of a switch characterizes uniqueness.
pub fn check_uniqueness(
    directions: &[LatticeDirection],
    f1: &XRayData,
    f2: &XRayData,
) -> Result<bool> {
    let rec = reconstruct_two(directions, f1, f2)?;
    let Some(solution) = rec.solution else {
        return Err(Error::infeasible());
    };
    let grid = grid_from_xrays(f1, f2, directions)?;
    let d1 = &directions[f1.direction_index];
    let d2 = &directions[f2.direction_index];
    let pts = solution.points();
    for (a, p) in pts.iter().enumerate() {
        for q in &pts[a + 1..] {
            let a1p = crate::geometry::canonical_line(f1.direction_index, d1, p)?;
            let a1q = crate::geometry::canonical_line(f1.direction_index, d1, q)?;
            let a2p = crate::geometry::canonical_line(f2.direction_index, d2, p)?;
            let a2q = crate::geometry::canonical_line(f2.direction_index, d2, q)?;
            if a1p == a1q || a2p == a2q {
                continue;
            }
            let c1 = crate::geometry::line_intersection(&a1p.anchor, d1, &a2q.anchor, d2);
            let c2 = crate::geometry::line_intersection(&a1q.anchor, d1, &a2p.anchor, d2);
            if let (Some(c1), Some(c2)) = (c1, c2) {
                if grid.index_of(&c1).is_some()
                    && grid.index_of(&c2).is_some()
                    && !solution.contains(&c1)
                    && !solution.contains(&c2)
                {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// All realizations of the two X-rays over `grid`, in a deterministic
/// order (f1 lines in anchor order, member combinations lexicographic).
pub fn enumerate_realizations(
    directions: &[LatticeDirection],
    f1: &XRayData,
    f2: &XRayData,
    grid: &Grid,
    max_grid: usize,
    cap: Option<u64>,
) -> Result<Vec<PointSet>> {
    check_two(directions, f1, f2)?;
    if grid.len() > max_grid {
        return Err(Error::BoundsExceeded(format!(
            "grid has {} points, enumeration bound is {max_grid}",
            grid.len()
        )));
    }
    let sys = LineSystem::build(f1, f2, grid)?;
    let mut residual2: Vec<i64> = sys.l2.iter().map(|(_, c, _)| *c as i64).collect();
    let mut chosen: Vec<usize> = Vec::new();
    let mut out: Vec<PointSet> = Vec::new();
    enumerate_rec(&sys, grid, 0, &mut residual2, &mut chosen, &mut out, cap);
    Ok(out)
}

fn enumerate_rec(
    sys: &LineSystem,
    grid: &Grid,
    line: usize,
    residual2: &mut Vec<i64>,
    chosen: &mut Vec<usize>,
    out: &mut Vec<PointSet>,
    cap: Option<u64>,
) {
    if cap.map_or(false, |c| out.len() as u64 >= c) {
        return;
    }
    if line == sys.l1.len() {
        if residual2.iter().all(|&r| r == 0) {
            out.push(PointSet::new(
                chosen.iter().map(|&p| grid.point(p).clone()).collect(),
            ));
        }
        return;
    }
    let demand = sys.l1[line].1 as usize;
    let members: Vec<usize> =
        sys.l1[line].2.iter().copied().filter(|&p| sys.usable(p)).collect();
    if members.len() < demand {
        return;
    }
    for combo in members.iter().combinations(demand) {
        let mut ok = true;
        for &&p in &combo {
            let j = sys.point_lines[p].1;
            residual2[j] -= 1;
            if residual2[j] < 0 {
                ok = false;
            }
        }
        if ok {
            chosen.extend(combo.iter().map(|&&p| p));
            enumerate_rec(sys, grid, line + 1, residual2, chosen, out, cap);
            chosen.truncate(chosen.len() - demand);
        }
        for &&p in &combo {
            residual2[sys.point_lines[p].1] += 1;
        }
        if cap.map_or(false, |c| out.len() as u64 >= c) {
            return;
        }
    }
}

/// Exact number of realizations, truncated at `cap`. An instance whose
/// X-rays admit no realization counts 0.
pub fn count_solutions(
    directions: &[LatticeDirection],
    f1: &XRayData,
    f2: &XRayData,
    cap: u64,
    max_grid: usize,
) -> Result<u64> {
    let grid = grid_from_xrays(f1, f2, directions)?;
    let sols = enumerate_realizations(directions, f1, f2, &grid, max_grid, Some(cap))?;
    Ok(sols.len() as u64)
}

/// Exhaustive minimum-cost tracking oracle: enumerates per-frame
/// realizations and couplings. Markov models decompose per step, so each
/// step's permutations are scanned exhaustively; path-based models scan
/// full coupling tuples. Deterministic tie-break toward the
/// lexicographically smallest canonical track encoding.
pub fn brute_force_tomtrac(
    instance: &TomographyInstance,
    bounds: OracleBounds,
) -> Result<Option<TrackSet>> {
    let t = instance.t();
    let n = instance.n() as usize;
    if t > bounds.max_frames {
        return Err(Error::BoundsExceeded(format!("t = {t} exceeds oracle bound")));
    }
    if instance.n() > bounds.max_particles {
        return Err(Error::BoundsExceeded(format!("n = {n} exceeds oracle bound")));
    }
    let grids = instance.grids()?;
    for g in &grids {
        if g.len() > bounds.max_grid {
            return Err(Error::BoundsExceeded(format!(
                "grid has {} points, oracle bound is {}",
                g.len(),
                bounds.max_grid
            )));
        }
    }
    let mut realizations: Vec<Vec<PointSet>> = Vec::with_capacity(t);
    for tau in 0..t {
        match &instance.known_positions[tau] {
            Some(f) => realizations.push(vec![f.clone()]),
            None => {
                let sols = enumerate_realizations(
                    &instance.directions,
                    &instance.frames[tau][0],
                    &instance.frames[tau][1],
                    &grids[tau],
                    bounds.max_grid,
                    None,
                )?;
                if sols.is_empty() {
                    return Ok(None);
                }
                realizations.push(sols);
            }
        }
    }

    let mut best: Option<(Rat, Vec<Vec<RationalPoint>>, TrackSet)> = None;
    let mut combo = vec![0usize; t];
    'combos: loop {
        let frames: Vec<&PointSet> =
            combo.iter().enumerate().map(|(tau, &c)| &realizations[tau][c]).collect();
        if let Some((cost, tracks)) = optimal_coupling(instance, &grids, &frames)? {
            let frames_owned: Vec<PointSet> = frames.iter().map(|&f| f.clone()).collect();
            let ts = TrackSet::new(frames_owned, tracks, cost.clone())?;
            let encoding: Vec<Vec<RationalPoint>> = (0..n)
                .map(|i| ts.track_points(i).into_iter().cloned().collect())
                .collect();
            match &best {
                Some((bc, benc, _)) if (bc, benc) <= (&cost, &encoding) => {}
                _ => best = Some((cost, encoding, ts)),
            }
        }
        let mut pos = t;
        while pos > 0 {
            pos -= 1;
            combo[pos] += 1;
            if combo[pos] < realizations[pos].len() {
                continue 'combos;
            }
            combo[pos] = 0;
        }
        break;
    }
    Ok(best.map(|(_, _, ts)| ts))
}

/// Optimal coupling of fixed frame realizations by exhaustive permutation
/// scan; `None` when every coupling uses a forbidden edge or path.
fn optimal_coupling(
    instance: &TomographyInstance,
    grids: &[Grid],
    frames: &[&PointSet],
) -> Result<Option<(Rat, Vec<Vec<usize>>)>> {
    let t = frames.len();
    let n = frames[0].len();
    if instance.weights.is_markov() {
        // Per-step exhaustive minimum; lexicographically smallest
        // permutation kept on ties.
        let mut total = Rat::zero();
        let mut steps: Vec<Vec<usize>> = Vec::with_capacity(t.saturating_sub(1));
        for tau in 0..t.saturating_sub(1) {
            let w = crate::tracking::step_weights(
                &instance.weights,
                tau,
                frames[tau],
                frames[tau + 1],
                Some(&grids[tau]),
                Some(&grids[tau + 1]),
            )?;
            let mut best: Option<(Rat, Vec<usize>)> = None;
            for perm in (0..n).permutations(n) {
                let mut cost = Rat::zero();
                let mut ok = true;
                for (i, &j) in perm.iter().enumerate() {
                    match &w[i][j] {
                        Weight::Finite(v) => cost += v,
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
                    Some((bv, _)) if bv <= &cost => {}
                    _ => best = Some((cost, perm)),
                }
            }
            let Some((v, perm)) = best else {
                return Ok(None);
            };
            total += v;
            steps.push(perm);
        }
        let tracks = compose_steps(n, t, &steps);
        Ok(Some((total, tracks)))
    } else {
        // Full coupling enumeration for path-based objectives.
        let mut best: Option<(Rat, Vec<Vec<usize>>)> = None;
        let mut perms: Vec<Vec<usize>> = Vec::new();
        enumerate_couplings(instance, frames, 0, &mut perms, &mut best)?;
        Ok(best)
    }
}

fn compose_steps(n: usize, t: usize, steps: &[Vec<usize>]) -> Vec<Vec<usize>> {
    (0..n)
        .map(|start| {
            let mut tr = Vec::with_capacity(t);
            let mut cur = start;
            tr.push(cur);
            for s in steps {
                cur = s[cur];
                tr.push(cur);
            }
            tr
        })
        .collect()
}

fn enumerate_couplings(
    instance: &TomographyInstance,
    frames: &[&PointSet],
    step: usize,
    perms: &mut Vec<Vec<usize>>,
    best: &mut Option<(Rat, Vec<Vec<usize>>)>,
) -> Result<()> {
    let t = frames.len();
    let n = frames[0].len();
    if step == t - 1 {
        let tracks = compose_steps(n, t, perms);
        let mut total = Rat::zero();
        for tr in &tracks {
            let pts: Vec<&RationalPoint> =
                tr.iter().enumerate().map(|(tau, &i)| &frames[tau].points()[i]).collect();
            match instance.weights.path_cost(&pts)? {
                Weight::Finite(v) => total += v,
                Weight::Forbidden => return Ok(()),
            }
        }
        match best {
            Some((bv, btr)) if (&*bv, &*btr) <= (&total, &tracks) => {}
            _ => *best = Some((total, tracks)),
        }
        return Ok(());
    }
    for perm in (0..n).permutations(n) {
        perms.push(perm);
        enumerate_couplings(instance, frames, step + 1, perms, best)?;
        perms.pop();
    }
    Ok(())
}

/// Brute-force feasibility of the displacement problem: does some frame-1
/// realization push forward through the field onto every later frame's
/// X-rays?
pub fn brute_force_phi_compatible(
    instance: &TomographyInstance,
    bounds: OracleBounds,
) -> Result<bool> {
    let field = instance
        .displacement
        .as_ref()
        .ok_or_else(|| Error::Invalid("instance has no displacement field".into()))?;
    let grids = instance.grids()?;
    let sols = enumerate_realizations(
        &instance.directions,
        &instance.frames[0][0],
        &instance.frames[0][1],
        &grids[0],
        bounds.max_grid,
        None,
    )?;
    'sols: for f in sols {
        let mut current = f;
        for tau in 0..instance.t() - 1 {
            let mut images = Vec::with_capacity(current.len());
            for p in current.iter() {
                match field.apply(tau, p) {
                    Some(q) => images.push(q),
                    None => continue 'sols,
                }
            }
            let next = PointSet::new(images);
            if next.len() != current.len() {
                continue 'sols;
            }
            for (i, d) in instance.directions.iter().enumerate().take(2) {
                if xray(&next, i, d)? != instance.frames[tau + 1][i] {
                    continue 'sols;
                }
            }
            current = next;
        }
        return Ok(true);
    }
    Ok(false)
}

/// Brute-force three-direction consistency: is there a realization of
/// (f1, f2) whose third X-ray equals f3?
pub fn consistency_three_brute(
    directions: &[LatticeDirection],
    f1: &XRayData,
    f2: &XRayData,
    f3: &XRayData,
    max_grid: usize,
) -> Result<bool> {
    let grid = grid_from_xrays(f1, f2, directions)?;
    let sols = enumerate_realizations(directions, f1, f2, &grid, max_grid, None)?;
    for sol in sols {
        if xray(&sol, f3.direction_index, &directions[f3.direction_index])? == *f3 {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Convenience: X-ray data map from integer-keyed rows/cols for tests and
/// fixtures (direction 0 = rows keyed by y, direction 1 = columns keyed
/// by x).
pub fn axis_xrays(rows: &[(i64, u64)], cols: &[(i64, u64)]) -> (XRayData, XRayData) {
    let row_lines: BTreeMap<RationalPoint, u64> = rows
        .iter()
        .filter(|(_, c)| *c > 0)
        .map(|&(y, c)| (crate::geometry::point2(0, y), c))
        .collect();
    let col_lines: BTreeMap<RationalPoint, u64> = cols
        .iter()
        .filter(|(_, c)| *c > 0)
        .map(|&(x, c)| (crate::geometry::point2(x, 0), c))
        .collect();
    (
        XRayData::from_lines(0, row_lines).expect("valid rows"),
        XRayData::from_lines(1, col_lines).expect("valid cols"),
    )
}
