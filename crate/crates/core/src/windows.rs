//! Tomography under window constraints: per-frame cardinality bounds on
//! grid subsets, with automatic routing between an exact LP (for the
//! totally unimodular orthogonal-window class), a block-ordered
//! branch-and-bound (for superresolution 2×2 block instances), and plain
//! branch-and-bound for everything else.

use num::{One, Zero};

use crate::error::{Error, Result};
use crate::geometry::{Grid, PointSet, RationalPoint, XRayData};
use crate::rational::Rat;
use crate::solver::{solve_ilp, solve_lp, IlpModel, IlpStatus, LinearProgram, LpStatus, Relation};

/// A cardinality constraint Σ_{j ∈ W} ξ_j ∼ k on one frame's grid points.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowConstraint {
    pub frame: usize,
    /// Grid point indices of the window (nonempty, deduplicated, sorted).
    pub points: Vec<usize>,
    pub relation: Relation,
    pub bound: u64,
}

impl WindowConstraint {
    pub fn new(frame: usize, mut points: Vec<usize>, relation: Relation, bound: u64) -> Result<Self> {
        points.sort_unstable();
        points.dedup();
        if points.is_empty() {
            return Err(Error::Invalid("window must be nonempty".into()));
        }
        Ok(WindowConstraint { frame, points, relation, bound })
    }

    /// Appends the window row to an LP whose frame block starts at `offset`.
    pub(crate) fn add_row(&self, lp: &mut LinearProgram, offset: usize, grid_len: usize) -> Result<()> {
        if let Some(&bad) = self.points.iter().find(|&&j| j >= grid_len) {
            return Err(Error::field(
                "windows",
                format!("grid index {bad} out of range for frame {}", self.frame),
            ));
        }
        lp.add_row(
            self.points.iter().map(|&j| (offset + j, Rat::one())).collect(),
            self.relation,
            Rat::from_integer(self.bound.into()),
        );
        Ok(())
    }
}

/// Structural class of a windowed frame, detected syntactically.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowClass {
    /// Every window sits inside a single X-ray line and windows are
    /// pairwise disjoint: the stacked system is totally unimodular and the
    /// LP relaxation solves the frame exactly.
    TuOrthogonal,
    /// Grid is [2q]² and the windows are exactly the q² disjoint 2×2
    /// blocks with equality relations (the superresolution class).
    Superres2x2,
    General,
}

/// Classifies one frame's window system. Detection is purely syntactic;
/// hidden structure in general instances is not searched for.
pub fn classify_windows(grid: &Grid, constraints: &[WindowConstraint]) -> WindowClass {
    if is_tu_orthogonal(grid, constraints) {
        return WindowClass::TuOrthogonal;
    }
    if superres_blocks(grid, constraints).is_some() {
        return WindowClass::Superres2x2;
    }
    WindowClass::General
}

fn is_tu_orthogonal(grid: &Grid, constraints: &[WindowConstraint]) -> bool {
    for w in constraints {
        let on_one_line = grid.direction_indices().any(|d| {
            grid.lines_of(d)
                .values()
                .any(|line| w.points.iter().all(|j| line.contains(j)))
        });
        if !on_one_line {
            return false;
        }
    }
    for (a, wa) in constraints.iter().enumerate() {
        for wb in &constraints[a + 1..] {
            if wa.frame == wb.frame && wa.points.iter().any(|j| wb.points.contains(j)) {
                return false;
            }
        }
    }
    true
}

/// Returns the block-major variable order when the frame matches the
/// superresolution pattern: grid [2q]², one equality window per 2×2 block.
fn superres_blocks(grid: &Grid, constraints: &[WindowConstraint]) -> Option<Vec<usize>> {
    let m = grid.len();
    let q2 = m / 4;
    if m == 0 || m % 4 != 0 {
        return None;
    }
    let q = (1..).find(|&q| q * q >= q2).filter(|&q| q * q == q2)?;
    // Grid must be exactly {1..2q}².
    let mut expect = Vec::with_capacity(m);
    for x in 1..=(2 * q as i64) {
        for y in 1..=(2 * q as i64) {
            expect.push(crate::geometry::point2(x, y));
        }
    }
    expect.sort();
    if grid.points() != expect.as_slice() {
        return None;
    }
    if constraints.len() != q2 || constraints.iter().any(|w| w.relation != Relation::Eq) {
        return None;
    }
    let index_of = |x: i64, y: i64| grid.index_of(&crate::geometry::point2(x, y));
    let mut blocks: Vec<Vec<usize>> = Vec::with_capacity(q2);
    for bi in 0..q as i64 {
        for bj in 0..q as i64 {
            let mut block = vec![
                index_of(2 * bi + 1, 2 * bj + 1)?,
                index_of(2 * bi + 1, 2 * bj + 2)?,
                index_of(2 * bi + 2, 2 * bj + 1)?,
                index_of(2 * bi + 2, 2 * bj + 2)?,
            ];
            block.sort_unstable();
            blocks.push(block);
        }
    }
    let mut seen = vec![false; q2];
    for w in constraints {
        let pos = blocks.iter().position(|b| b == &w.points)?;
        if seen[pos] || w.bound > 4 {
            return None;
        }
        seen[pos] = true;
    }
    Some(blocks.into_iter().flatten().collect())
}

/// Builds the frame system: X-ray equality rows plus window rows over the
/// grid's ξ variables.
fn frame_program(
    grid: &Grid,
    frame: &[XRayData],
    constraints: &[WindowConstraint],
    objective: Option<&[Rat]>,
) -> Result<LinearProgram> {
    let mut lp = LinearProgram::binary_box(grid.len());
    if let Some(obj) = objective {
        lp.set_objective(obj.to_vec());
    }
    let mut implied = vec![false; grid.len()];
    crate::tracking::add_xray_rows(&mut lp, grid, frame, 0, &mut implied)?;
    for w in constraints {
        w.add_row(&mut lp, 0, grid.len())?;
    }
    lp.implied_upper = implied;
    Ok(lp)
}

fn decode_support(grid: &Grid, x: &[Rat]) -> PointSet {
    let pts: Vec<RationalPoint> = (0..grid.len())
        .filter(|&i| x[i].is_one())
        .map(|i| grid.point(i).clone())
        .collect();
    PointSet::new(pts)
}

/// Solves one windowed frame exactly: LP for the TU class (vertex asserted
/// integral), block-ordered branch-and-bound for the superresolution class,
/// plain branch-and-bound otherwise. The objective defaults to zero (pure
/// feasibility) but accepts per-point weights.
pub fn solve_windowed_frame(
    grid: &Grid,
    frame: &[XRayData],
    constraints: &[WindowConstraint],
    objective: Option<&[Rat]>,
    budget: Option<u64>,
) -> Result<PointSet> {
    let lp = frame_program(grid, frame, constraints, objective)?;
    match classify_windows(grid, constraints) {
        WindowClass::TuOrthogonal => {
            let out = solve_lp(&lp)?;
            match out.status {
                LpStatus::Infeasible => Err(Error::infeasible()),
                LpStatus::Unbounded => Err(Error::Invalid("frame LP unbounded".into())),
                LpStatus::Optimal => {
                    let x = out.primal.expect("optimal");
                    assert!(
                        x.iter().all(|v| v.is_zero() || v.is_one()),
                        "TU frame system returned a fractional vertex"
                    );
                    Ok(decode_support(grid, &x))
                }
            }
        }
        class => {
            let mut model = IlpModel::all_binary(lp);
            if class == WindowClass::Superres2x2 {
                model.branch_priority = superres_blocks(grid, constraints);
            }
            let out = solve_ilp(&model, budget)?;
            match out.status {
                IlpStatus::Infeasible => Err(Error::infeasible()),
                IlpStatus::BudgetExhausted => Err(Error::BudgetExhausted { nodes: out.nodes }),
                IlpStatus::Optimal => Ok(decode_support(grid, &out.primal.expect("optimal"))),
            }
        }
    }
}

/// Frame solver used by the tracking pipelines: the plain TU X-ray LP when
/// no windows apply, otherwise the windowed route.
pub(crate) fn solve_frame_lp(
    grid: &Grid,
    frame: &[XRayData],
    constraints: &[WindowConstraint],
    objective: Option<&[Rat]>,
) -> Result<PointSet> {
    if constraints.is_empty() {
        let lp = frame_program(grid, frame, &[], objective)?;
        let out = solve_lp(&lp)?;
        return match out.status {
            LpStatus::Infeasible => Err(Error::infeasible()),
            LpStatus::Unbounded => Err(Error::Invalid("frame LP unbounded".into())),
            LpStatus::Optimal => {
                let x = out.primal.expect("optimal");
                assert!(
                    x.iter().all(|v| v.is_zero() || v.is_one()),
                    "X-ray system returned a fractional vertex"
                );
                Ok(decode_support(grid, &x))
            }
        };
    }
    solve_windowed_frame(grid, frame, constraints, objective, None)
}

/// The stacked constraint matrix (X-ray rows over window rows) of one
/// frame, for unimodularity probing.
pub fn stacked_matrix(
    grid: &Grid,
    frame: &[XRayData],
    constraints: &[WindowConstraint],
) -> Result<Vec<Vec<Rat>>> {
    let lp = frame_program(grid, frame, constraints, None)?;
    let mut rows = Vec::with_capacity(lp.num_rows());
    for row in &lp.rows {
        let mut dense = vec![Rat::zero(); grid.len()];
        for (j, c) in row {
            dense[*j] = c.clone();
        }
        rows.push(dense);
    }
    Ok(rows)
}

/// Which tracking pipeline a windowed instance should run.
#[derive(Clone, Debug)]
pub enum WindowedAlgo {
    Ilp { budget: Option<u64> },
    Rolling,
    TomographicFitting {
        family: crate::fitting::SampleFitFamily,
        norm: crate::fitting::NormSpec,
        variant: crate::fitting::WeightVariant,
    },
}

/// Runs a tracking algorithm with the instance's window constraints
/// injected into every frame system. Frames are checked individually
/// first, so an infeasible window reports the offending frame.
pub fn windowed_tracking(
    instance: &crate::tracking::TomographyInstance,
    algo: WindowedAlgo,
) -> Result<crate::tracking::TrackSet> {
    for tau in 0..instance.t() {
        let constraints = instance.windows_for(tau);
        if constraints.is_empty() {
            continue;
        }
        let grid = instance.grid(tau)?;
        solve_windowed_frame(&grid, &instance.frames[tau], &constraints, None, None)
            .map_err(|e| match e {
                Error::Infeasible { .. } => Error::infeasible_at(tau),
                other => other,
            })?;
    }
    match algo {
        WindowedAlgo::Ilp { budget } => crate::tracking::tomtrac_ilp(instance, budget),
        WindowedAlgo::Rolling => crate::tracking::rolling_horizon(instance),
        WindowedAlgo::TomographicFitting { family, norm, variant } => {
            crate::fitting::tomographic_fitting(instance, &family, &norm, variant)
                .map(|f| f.tracks)
        }
    }
}
