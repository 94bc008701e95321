//! Particle-history algorithms: sample-fit curve families, path fitting,
//! tomographic fitting, tomographic path fitting, and two-way fitting.
//!
//! Frames are indexed 0-based throughout; curves are parametrized by the
//! frame index as a rational time. Each candidate sample evaluation bumps
//! an instrumented counter, which the test suite holds against the
//! polynomial envelope of the path-fitting runtime bound.

use num::{One, Signed, Zero};
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geometry::{Grid, LatticeDirection, PointSet, RationalPoint};
use crate::rational::{rat, Rat};
use crate::solver::rat_matching;
use crate::tomo::reconstruct_on_grid;
use crate::tracking::{triangle_area, TomographyInstance, TrackSet};
use crate::windows::solve_frame_lp;

/// Norm / transform pairing with h(‖x‖) exactly rational for rational x.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NormKind {
    Euclidean,
    Max,
    P(u32),
}

/// Strictly increasing transform applied to the norm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HKind {
    Id,
    Power(u32),
}

/// A rational-exact (norm, h) pairing: h ∘ ‖·‖ maps rational vectors to
/// rationals and preserves the order of distances.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormSpec {
    norm: NormKind,
    h: HKind,
}

impl NormSpec {
    pub fn new(norm: NormKind, h: HKind) -> Result<Self> {
        let ok = match (&norm, &h) {
            (NormKind::Max, _) => true,
            (NormKind::Euclidean, HKind::Power(p)) => p % 2 == 0 && *p > 0,
            (NormKind::P(p), HKind::Power(q)) => *p > 0 && q % p == 0 && *q > 0,
            _ => false,
        };
        if !ok {
            return Err(Error::Invalid(
                "norm/h pairing does not keep h(‖x‖) rational".into(),
            ));
        }
        if let HKind::Power(0) = h {
            return Err(Error::Invalid("h must be strictly increasing".into()));
        }
        Ok(NormSpec { norm, h })
    }

    /// Squared Euclidean distance: (‖·‖₂, (·)²).
    pub fn euclid2() -> Self {
        NormSpec { norm: NormKind::Euclidean, h: HKind::Power(2) }
    }

    /// Maximum norm with the identity transform.
    pub fn max() -> Self {
        NormSpec { norm: NormKind::Max, h: HKind::Id }
    }

    /// Maximum norm with an explicit power (used by monotonicity tests).
    pub fn max_pow(p: u32) -> Result<Self> {
        NormSpec::new(NormKind::Max, HKind::Power(p))
    }

    /// p-norm with the matching power transform: (‖·‖_p, (·)^p).
    pub fn p_norm(p: u32) -> Result<Self> {
        NormSpec::new(NormKind::P(p), HKind::Power(p))
    }

    /// h(‖a − b‖), exactly rational.
    pub fn h_dist(&self, a: &RationalPoint, b: &RationalPoint) -> Rat {
        self.h_of_diff(&a.sub(b))
    }

    pub fn h_of_diff(&self, diff: &[Rat]) -> Rat {
        match (&self.norm, &self.h) {
            (NormKind::Euclidean, HKind::Power(p)) => {
                let sq: Rat = diff.iter().map(|d| d * d).sum();
                pow_rat(&sq, p / 2)
            }
            (NormKind::Max, h) => {
                let m = diff.iter().map(Signed::abs).max().unwrap_or_else(Rat::zero);
                match h {
                    HKind::Id => m,
                    HKind::Power(p) => pow_rat(&m, *p),
                }
            }
            (NormKind::P(p), HKind::Power(q)) => {
                let s: Rat = diff.iter().map(|d| pow_rat(&d.abs(), *p)).sum();
                pow_rat(&s, q / p)
            }
            _ => unreachable!("validated pairings only"),
        }
    }

    /// Combines per-axis minimal absolute offsets on a product grid.
    fn h_from_axis_mins(&self, ax: &Rat, ay: &Rat) -> Rat {
        self.h_of_diff(&[ax.clone(), ay.clone()])
    }
}

fn pow_rat(r: &Rat, p: u32) -> Rat {
    let mut out = Rat::one();
    for _ in 0..p {
        out *= r;
    }
    out
}

/// Family of sample-fit curves: polynomials of degree ≤ k−1 through any
/// k-sample (affine lines are the k = 2 case).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CurveKind {
    Polynomial,
    AffineLine,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleFitFamily {
    pub k: usize,
    pub kind: CurveKind,
}

impl SampleFitFamily {
    pub fn polynomial(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Invalid("sample size k must be at least 2".into()));
        }
        Ok(SampleFitFamily { k, kind: CurveKind::Polynomial })
    }

    /// Straight lines through two grid points at two different times.
    pub fn lines() -> Self {
        SampleFitFamily { k: 2, kind: CurveKind::AffineLine }
    }

    /// The unique family curve through a k-sample (distinct times).
    pub fn fit(&self, samples: &[(Rat, RationalPoint)]) -> Result<PolyCurve> {
        if samples.len() != self.k {
            return Err(Error::Invalid("sample size must equal k".into()));
        }
        PolyCurve::interpolate(samples)
    }
}

/// A polynomial curve τ ↦ Σ aᵢ τ^i per coordinate, with exact rational
/// coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyCurve {
    /// coeffs[c][i] is the τ^i coefficient of coordinate c.
    coeffs: Vec<Vec<Rat>>,
}

impl PolyCurve {
    /// Lagrange interpolation through (time, point) samples with pairwise
    /// distinct times.
    pub fn interpolate(samples: &[(Rat, RationalPoint)]) -> Result<PolyCurve> {
        let k = samples.len();
        if k == 0 {
            return Err(Error::Invalid("cannot interpolate an empty sample".into()));
        }
        let dim = samples[0].1.dim();
        for w in samples.windows(2) {
            if w[0].1.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: w[1].1.dim() });
            }
        }
        let times: Vec<&Rat> = samples.iter().map(|(t, _)| t).collect();
        for i in 0..k {
            for j in (i + 1)..k {
                if times[i] == times[j] {
                    return Err(Error::Invalid("sample times must be distinct".into()));
                }
            }
        }
        let mut coeffs = vec![vec![Rat::zero(); k]; dim];
        for i in 0..k {
            // Basis polynomial Π_{j≠i} (τ − τ_j)/(τ_i − τ_j).
            let mut poly = vec![Rat::one()];
            let mut denom = Rat::one();
            for j in 0..k {
                if j == i {
                    continue;
                }
                let mut next = vec![Rat::zero(); poly.len() + 1];
                for (d, c) in poly.iter().enumerate() {
                    next[d + 1] += c;
                    next[d] -= times[j] * c;
                }
                poly = next;
                denom *= times[i] - times[j];
            }
            for (d, c) in poly.iter().enumerate() {
                let term = c / &denom;
                for (coord, coef) in coeffs.iter_mut().enumerate() {
                    coef[d] += &term * samples[i].1.coord(coord);
                }
            }
        }
        Ok(PolyCurve { coeffs })
    }

    pub fn eval(&self, tau: &Rat) -> RationalPoint {
        let coords = self
            .coeffs
            .iter()
            .map(|poly| {
                let mut acc = Rat::zero();
                for c in poly.iter().rev() {
                    acc = acc * tau + c;
                }
                acc
            })
            .collect();
        RationalPoint::new(coords)
    }
}

/// Instrumented counters for the fitting algorithms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FitStats {
    /// Inner objective evaluations: one per (candidate sample, frame) pair.
    pub weight_evals: u64,
}

/// Weight aggregation variant: the displayed max–min form or the
/// sum-of-squares alternative over non-sample frames.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightVariant {
    MaxMin,
    SumSq,
}

/// Nearest-grid-point h-distances, with a separable fast path on
/// axis-aligned product grids.
pub(crate) struct GridScan<'a> {
    grid: &'a Grid,
    axes: Option<(Vec<Rat>, Vec<Rat>)>,
}

impl<'a> GridScan<'a> {
    pub fn new(grid: &'a Grid, directions: &[LatticeDirection]) -> Self {
        let axes = Self::product_axes(grid, directions);
        GridScan { grid, axes }
    }

    fn product_axes(grid: &Grid, directions: &[LatticeDirection]) -> Option<(Vec<Rat>, Vec<Rat>)> {
        if grid.is_empty() || grid.point(0).dim() != 2 {
            return None;
        }
        let ex = LatticeDirection::from_ints(&[1, 0]);
        let ey = LatticeDirection::from_ints(&[0, 1]);
        let axis_aligned = directions.len() >= 2
            && ((directions[0] == ex && directions[1] == ey)
                || (directions[0] == ey && directions[1] == ex));
        if !axis_aligned {
            return None;
        }
        let mut xs: Vec<Rat> = grid.points().iter().map(|p| p.coord(0).clone()).collect();
        let mut ys: Vec<Rat> = grid.points().iter().map(|p| p.coord(1).clone()).collect();
        xs.sort();
        xs.dedup();
        ys.sort();
        ys.dedup();
        if xs.len() * ys.len() == grid.len() {
            Some((xs, ys))
        } else {
            None
        }
    }

    /// min over grid points g of h(‖p − g‖).
    pub fn min_h(&self, p: &RationalPoint, norm: &NormSpec) -> Rat {
        if let Some((xs, ys)) = &self.axes {
            let ax = nearest_abs(xs, p.coord(0));
            let ay = nearest_abs(ys, p.coord(1));
            return norm.h_from_axis_mins(&ax, &ay);
        }
        self.grid
            .points()
            .iter()
            .map(|g| norm.h_dist(p, g))
            .min()
            .expect("grid is nonempty")
    }
}

/// Minimal |v − x| over a sorted list.
fn nearest_abs(sorted: &[Rat], v: &Rat) -> Rat {
    match sorted.binary_search(v) {
        Ok(_) => Rat::zero(),
        Err(pos) => {
            let mut best: Option<Rat> = None;
            if pos < sorted.len() {
                best = Some(&sorted[pos] - v);
            }
            if pos > 0 {
                let d = v - &sorted[pos - 1];
                best = Some(match best {
                    Some(b) if b <= d => b,
                    _ => d,
                });
            }
            best.expect("nonempty axis")
        }
    }
}

/// One evaluated candidate sample: its aggregated value under the variant.
fn sample_value(
    curve: &PolyCurve,
    scans: &[GridScan<'_>],
    sample_times: &BTreeSet<usize>,
    norm: &NormSpec,
    variant: WeightVariant,
    stats: &mut FitStats,
) -> Rat {
    match variant {
        WeightVariant::MaxMin => {
            let mut worst = Rat::zero();
            for (tau, scan) in scans.iter().enumerate() {
                stats.weight_evals += 1;
                let v = scan.min_h(&curve.eval(&rat(tau as i64)), norm);
                if v > worst {
                    worst = v;
                }
            }
            worst
        }
        WeightVariant::SumSq => {
            let mut total = Rat::zero();
            for (tau, scan) in scans.iter().enumerate() {
                if sample_times.contains(&tau) {
                    continue;
                }
                stats.weight_evals += 1;
                let v = scan.min_h(&curve.eval(&rat(tau as i64)), norm);
                total += &v * &v;
            }
            total
        }
    }
}

/// Enumerates k-samples through the given anchors: interior times are all
/// strictly increasing tuples between the anchor times, interior points
/// range over their frame grids, in lexicographic order. Calls `visit`
/// with (sample, value); the caller keeps the first minimum, which is the
/// lexicographically smallest optimal sample.
#[allow(clippy::too_many_arguments)]
fn minimize_over_samples(
    grids: &[Grid],
    scans: &[GridScan<'_>],
    anchors: &[(usize, RationalPoint)],
    interior_time_range: (usize, usize),
    k: usize,
    family: &SampleFitFamily,
    norm: &NormSpec,
    variant: WeightVariant,
    stats: &mut FitStats,
) -> Result<Option<(Rat, PolyCurve)>> {
    let interior = k.checked_sub(anchors.len()).ok_or_else(|| {
        Error::Invalid("sample size k smaller than the anchor count".into())
    })?;
    let (lo, hi) = interior_time_range;
    let free_times: Vec<usize> =
        (lo..hi).filter(|t| anchors.iter().all(|(a, _)| a != t)).collect();

    // Strictly increasing interior time tuples, lexicographic order.
    let mut time_tuples: Vec<Vec<usize>> = Vec::new();
    fn combos(free: &[usize], need: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == need {
            out.push(cur.clone());
            return;
        }
        for i in start..free.len() {
            cur.push(free[i]);
            combos(free, need, i + 1, cur, out);
            cur.pop();
        }
    }
    combos(&free_times, interior, 0, &mut Vec::new(), &mut time_tuples);

    let mut best: Option<(Rat, PolyCurve)> = None;
    for times in time_tuples {
        let sizes: Vec<usize> = times.iter().map(|&t| grids[t].len()).collect();
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::Invalid("empty grid at an interior time".into()));
        }
        let sample_times: BTreeSet<usize> =
            anchors.iter().map(|(t, _)| *t).chain(times.iter().copied()).collect();
        // Cartesian product of grid points at the interior times, in
        // lexicographic index order.
        let mut idx = vec![0usize; times.len()];
        'product: loop {
            let mut sample: Vec<(Rat, RationalPoint)> =
                anchors.iter().map(|(t, p)| (rat(*t as i64), p.clone())).collect();
            for (pos, &t) in times.iter().enumerate() {
                sample.push((rat(t as i64), grids[t].point(idx[pos]).clone()));
            }
            sample.sort_by(|a, b| a.0.cmp(&b.0));
            let curve = family.fit(&sample)?;
            let value = sample_value(&curve, scans, &sample_times, norm, variant, stats);
            match &best {
                Some((bv, _)) if bv <= &value => {}
                _ => best = Some((value, curve)),
            }
            let mut pos = times.len();
            while pos > 0 {
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < sizes[pos] {
                    continue 'product;
                }
                idx[pos] = 0;
            }
            break;
        }
    }
    Ok(best)
}

/// Anchored pair weight γ_{i,j}: the best sample-fit value over all
/// k-samples containing grid point i of frame τ₁ and grid point j of frame
/// τ_k. Returns the value with its witness curve.
#[allow(clippy::too_many_arguments)]
pub fn fit_weight_pair(
    instance: &TomographyInstance,
    tau1: usize,
    tauk: usize,
    i: usize,
    j: usize,
    family: &SampleFitFamily,
    norm: &NormSpec,
    variant: WeightVariant,
) -> Result<(Rat, PolyCurve)> {
    let grids = instance.grids()?;
    let scans: Vec<GridScan<'_>> =
        grids.iter().map(|g| GridScan::new(g, &instance.directions)).collect();
    let mut stats = FitStats::default();
    fit_weight_pair_prepared(
        &grids, &scans, tau1, tauk, i, j, family, norm, variant, &mut stats,
    )
    .map(|o| o.expect("anchored sample set is nonempty"))
}

#[allow(clippy::too_many_arguments)]
fn fit_weight_pair_prepared(
    grids: &[Grid],
    scans: &[GridScan<'_>],
    tau1: usize,
    tauk: usize,
    i: usize,
    j: usize,
    family: &SampleFitFamily,
    norm: &NormSpec,
    variant: WeightVariant,
    stats: &mut FitStats,
) -> Result<Option<(Rat, PolyCurve)>> {
    if tau1 >= tauk || tauk >= grids.len() {
        return Err(Error::Invalid("need 0 ≤ τ₁ < τ_k < t".into()));
    }
    let anchors = vec![
        (tau1, grids[tau1].point(i).clone()),
        (tauk, grids[tauk].point(j).clone()),
    ];
    minimize_over_samples(
        grids,
        scans,
        &anchors,
        (tau1 + 1, tauk),
        family.k,
        family,
        norm,
        variant,
        stats,
    )
}

/// Per-grid-point α weights of the tomographic fitting step, with witness
/// curves: α(g) minimizes over all k-samples through g.
pub struct FitWeights {
    /// alpha[τ][i] = (value, witness) for grid point i of frame τ.
    pub alpha: Vec<Vec<(Rat, PolyCurve)>>,
    pub stats: FitStats,
}

pub fn alpha_weights(
    instance: &TomographyInstance,
    family: &SampleFitFamily,
    norm: &NormSpec,
    variant: WeightVariant,
) -> Result<FitWeights> {
    let grids = instance.grids()?;
    let t = grids.len();
    if t < 2 {
        return Err(Error::Invalid("sample fits need at least two frames (k ≥ 2)".into()));
    }
    let scans: Vec<GridScan<'_>> =
        grids.iter().map(|g| GridScan::new(g, &instance.directions)).collect();
    let mut stats = FitStats::default();
    let mut alpha = Vec::with_capacity(t);
    for tau in 0..t {
        let mut per = Vec::with_capacity(grids[tau].len());
        for gi in 0..grids[tau].len() {
            let anchors = vec![(tau, grids[tau].point(gi).clone())];
            let best = minimize_over_samples(
                &grids,
                &scans,
                &anchors,
                (0, t),
                family.k,
                family,
                norm,
                variant,
                &mut stats,
            )?
            .ok_or_else(|| Error::Invalid("no k-sample exists through this point".into()))?;
            per.push(best);
        }
        alpha.push(per);
    }
    Ok(FitWeights { alpha, stats })
}

/// Result of a fitting pipeline, with the instrumented counters.
pub struct PathFit {
    pub tracks: TrackSet,
    pub stats: FitStats,
    /// Endpoint pair weights γ_{i,j} in frame-grid index order.
    pub gammas: Vec<Vec<Rat>>,
}

/// Path fitting over positionally determined frames: compute all endpoint
/// pair weights γ, match the first anchor frame to the last, then hand the
/// interior frame points to the matched curves by the lexicographical
/// nearest-neighbor rule (bijectively).
pub fn path_fitting(
    instance: &TomographyInstance,
    family: &SampleFitFamily,
    norm: &NormSpec,
    variant: WeightVariant,
    tau1: usize,
    tauk: usize,
) -> Result<PathFit> {
    if !instance.is_positionally_determined() {
        return Err(Error::Invalid("path fitting needs positionally determined frames".into()));
    }
    let frames: Vec<PointSet> =
        instance.known_positions.iter().map(|k| k.clone().expect("checked")).collect();
    path_fitting_on_frames(instance, &frames, family, norm, variant, tau1, tauk)
}

/// The coupling half of path fitting, reusable on reconstructed frames.
fn path_fitting_on_frames(
    instance: &TomographyInstance,
    frames: &[PointSet],
    family: &SampleFitFamily,
    norm: &NormSpec,
    variant: WeightVariant,
    tau1: usize,
    tauk: usize,
) -> Result<PathFit> {
    let t = frames.len();
    let n = frames[0].len();
    if tau1 >= tauk || tauk >= t {
        return Err(Error::Invalid("need 0 ≤ τ₁ < τ_k < t".into()));
    }
    // Grids of the (possibly reconstructed) frames: the point sets
    // themselves.
    let grids: Vec<Grid> = frames
        .iter()
        .map(|f| {
            Grid::from_points(
                f.iter().cloned(),
                &[(0, &instance.directions[0]), (1, &instance.directions[1])],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let scans: Vec<GridScan<'_>> =
        grids.iter().map(|g| GridScan::new(g, &instance.directions)).collect();
    let mut stats = FitStats::default();

    let mut gammas = vec![vec![Rat::zero(); n]; n];
    let mut witnesses: Vec<Vec<PolyCurve>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let (v, w) = fit_weight_pair_prepared(
                &grids, &scans, tau1, tauk, i, j, family, norm, variant, &mut stats,
            )?
            .expect("anchored sample set is nonempty");
            gammas[i][j] = v;
            row.push(w);
        }
        witnesses.push(row);
    }
    let matching = rat_matching(&gammas);

    // Assign interior frames: curves in lexicographic (i, j) order, each
    // picking its nearest unassigned point, distance ties broken toward
    // the lexicographically smallest point.
    let mut tracks: Vec<Vec<usize>> = vec![vec![usize::MAX; t]; n];
    for (i, tr) in tracks.iter_mut().enumerate() {
        tr[tau1] = i;
        tr[tauk] = matching.assignment[i];
    }
    for tau in 0..t {
        if tau == tau1 || tau == tauk {
            continue;
        }
        let mut taken = vec![false; n];
        for (i, tr) in tracks.iter_mut().enumerate() {
            let j = matching.assignment[i];
            let reference = witnesses[i][j].eval(&rat(tau as i64));
            let pick = frames[tau]
                .points()
                .iter()
                .enumerate()
                .filter(|(p, _)| !taken[*p])
                .min_by(|(_, a), (_, b)| {
                    norm.h_dist(&reference, a)
                        .cmp(&norm.h_dist(&reference, b))
                        .then_with(|| a.cmp(b))
                })
                .map(|(p, _)| p)
                .expect("a point remains unassigned");
            taken[pick] = true;
            tr[tau] = pick;
        }
    }
    let tracks = TrackSet::new(frames.to_vec(), tracks, matching.value)?;
    Ok(PathFit { tracks, stats, gammas })
}

pub struct Fitted {
    pub tracks: TrackSet,
    pub stats: FitStats,
}

/// Tomographic fitting: α weights on every grid point, one exact LP per
/// frame (TU, vertex 0/1) to select the frame realizations, then t−1
/// matchings with ω_{ij} = α(gᵢ) + α(gⱼ).
pub fn tomographic_fitting(
    instance: &TomographyInstance,
    family: &SampleFitFamily,
    norm: &NormSpec,
    variant: WeightVariant,
) -> Result<Fitted> {
    let (frames, weights) = tomographic_frames(instance, family, norm, variant)?;
    let grids = instance.grids()?;
    let t = frames.len();
    let n = frames[0].len();

    let alpha_of = |tau: usize, p: &RationalPoint| -> Result<Rat> {
        let gi = grids[tau]
            .index_of(p)
            .ok_or_else(|| Error::Invalid("selected point missing from grid".into()))?;
        Ok(weights.alpha[tau][gi].0.clone())
    };
    let mut objective = Rat::zero();
    let mut assignments = Vec::with_capacity(t - 1);
    for tau in 0..t - 1 {
        let mut w = vec![vec![Rat::zero(); n]; n];
        for (i, p) in frames[tau].iter().enumerate() {
            for (j, q) in frames[tau + 1].iter().enumerate() {
                w[i][j] = alpha_of(tau, p)? + alpha_of(tau + 1, q)?;
            }
        }
        let m = rat_matching(&w);
        objective += &m.value;
        assignments.push(m.assignment);
    }
    let mut tracks = Vec::with_capacity(n);
    for start in 0..n {
        let mut tr = Vec::with_capacity(t);
        let mut cur = start;
        tr.push(cur);
        for a in &assignments {
            cur = a[cur];
            tr.push(cur);
        }
        tracks.push(tr);
    }
    Ok(Fitted {
        tracks: TrackSet::new(frames, tracks, objective)?,
        stats: weights.stats,
    })
}

/// The frame-selection half of tomographic fitting.
fn tomographic_frames(
    instance: &TomographyInstance,
    family: &SampleFitFamily,
    norm: &NormSpec,
    variant: WeightVariant,
) -> Result<(Vec<PointSet>, FitWeights)> {
    let weights = alpha_weights(instance, family, norm, variant)?;
    let grids = instance.grids()?;
    let mut frames = Vec::with_capacity(grids.len());
    for (tau, grid) in grids.iter().enumerate() {
        let obj: Vec<Rat> = weights.alpha[tau].iter().map(|(v, _)| v.clone()).collect();
        let support = solve_frame_lp(
            grid,
            &instance.frames[tau],
            &instance.windows_for(tau),
            Some(&obj),
        )
        .map_err(|e| match e {
            Error::Infeasible { .. } => Error::infeasible_at(tau),
            other => other,
        })?;
        frames.push(support);
    }
    Ok((frames, weights))
}

/// Tomographic path fitting: frames from tomographic fitting, coupling from
/// path fitting.
pub fn tomographic_path_fitting(
    instance: &TomographyInstance,
    family: &SampleFitFamily,
    norm: &NormSpec,
    variant: WeightVariant,
    tau1: usize,
    tauk: usize,
) -> Result<PathFit> {
    let (frames, weights) = tomographic_frames(instance, family, norm, variant)?;
    let mut fit =
        path_fitting_on_frames(instance, &frames, family, norm, variant, tau1, tauk)?;
    fit.stats.weight_evals += weights.stats.weight_evals;
    Ok(fit)
}

/// Options of the two-way fitting loop.
#[derive(Clone, Debug)]
pub struct TwoWayOptions {
    pub iteration_cap: usize,
    /// Optional velocity bound: half-width, in units of the matched step
    /// displacement, of the segment around the extrapolated point.
    pub speed_bound: Option<Rat>,
}

impl Default for TwoWayOptions {
    fn default() -> Self {
        TwoWayOptions { iteration_cap: 100, speed_bound: None }
    }
}

pub struct TwoWay {
    pub tracks: TrackSet,
    pub converged: bool,
    pub rounds: usize,
    /// Straightness objective (total triangle area) of each round's triple.
    pub trace: Vec<Rat>,
}

/// Two-way fitting for t = 3 with line fits: alternate a forward pass
/// (reconstruct F¹, roll to F², weight G³ by squared distance to the
/// extrapolation sets B, roll to F³) with a backward re-fit (α weights on
/// G² from the F¹–F³ lines, then re-derive F¹). Terminates when a triple
/// repeats; returns the best triple by total triangle area.
pub fn two_way_fitting(instance: &TomographyInstance, opts: &TwoWayOptions) -> Result<TwoWay> {
    if instance.t() != 3 {
        return Err(Error::Invalid("two-way fitting is specified for t = 3".into()));
    }
    let grids = instance.grids()?;
    let norm = NormSpec::euclid2();
    let n = instance.n() as usize;

    let frame_lp = |tau: usize, weights: &[Rat]| -> Result<PointSet> {
        solve_frame_lp(
            &grids[tau],
            &instance.frames[tau],
            &instance.windows_for(tau),
            Some(weights),
        )
        .map_err(|e| match e {
            Error::Infeasible { .. } => Error::infeasible_at(tau),
            other => other,
        })
    };
    let nearest_weights = |tau: usize, from: &PointSet| -> Vec<Rat> {
        grids[tau]
            .points()
            .iter()
            .map(|g| from.iter().map(|p| norm.h_dist(g, p)).min().expect("nonempty"))
            .collect()
    };

    // Initial forward construction.
    let mut f1 = reconstruct_on_grid(
        &instance.directions,
        &instance.frames[0][0],
        &instance.frames[0][1],
        &grids[0],
    )?
    .ok_or_else(|| Error::infeasible_at(0))?;
    let mut f2 = frame_lp(1, &nearest_weights(1, &f1))?;

    let mut seen: BTreeSet<Vec<RationalPoint>> = BTreeSet::new();
    let mut best: Option<(Rat, TrackSet)> = None;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut rounds = 0usize;

    while rounds < opts.iteration_cap {
        rounds += 1;
        // Forward: match F¹→F², weight G³ by distance to the B sets, roll.
        let m12 = rat_matching(&pair_dists(&f1, &f2, &norm));
        let w3: Vec<Rat> = grids[2]
            .points()
            .iter()
            .map(|g| {
                (0..n)
                    .map(|i| {
                        let p1 = &f1.points()[i];
                        let p2 = &f2.points()[m12.assignment[i]];
                        dist2_to_extrapolation(g, p1, p2, opts.speed_bound.as_ref())
                    })
                    .min()
                    .expect("n ≥ 1")
            })
            .collect();
        let f3 = frame_lp(2, &w3)?;
        let m23 = rat_matching(&pair_dists(&f2, &f3, &norm));

        // Assemble this round's tracks and straightness objective.
        let mut area = Rat::zero();
        let tracks: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let j = m12.assignment[i];
                let l = m23.assignment[j];
                area += triangle_area(&f1.points()[i], &f2.points()[j], &f3.points()[l]);
                vec![i, j, l]
            })
            .collect();
        let ts =
            TrackSet::new(vec![f1.clone(), f2.clone(), f3.clone()], tracks, area.clone())?;
        trace.push(area.clone());
        match &best {
            Some((bv, _)) if bv <= &area => {}
            _ => best = Some((area, ts)),
        }

        // Termination on a repeated triple (covers longer cycles too).
        let mut key: Vec<RationalPoint> = Vec::new();
        for f in [&f1, &f2, &f3] {
            key.extend(f.iter().cloned());
        }
        if !seen.insert(key) {
            converged = true;
            break;
        }

        // Backward: re-fit F² from the F¹–F³ midlines, then re-derive F¹.
        let alpha2: Vec<Rat> = grids[1]
            .points()
            .iter()
            .map(|g| {
                f1.iter()
                    .flat_map(|p1| {
                        f3.iter().map(move |p3| {
                            let mid = RationalPoint::new(
                                p1.coords()
                                    .iter()
                                    .zip(p3.coords())
                                    .map(|(a, b)| (a + b) / rat(2))
                                    .collect(),
                            );
                            norm.h_dist(&mid, g)
                        })
                    })
                    .min()
                    .expect("n ≥ 1")
            })
            .collect();
        f2 = frame_lp(1, &alpha2)?;
        f1 = frame_lp(0, &nearest_weights(0, &f2))?;
    }

    let (_, tracks) = best.expect("at least one round ran");
    Ok(TwoWay { tracks, converged, rounds, trace })
}

fn pair_dists(a: &PointSet, b: &PointSet, norm: &NormSpec) -> Vec<Vec<Rat>> {
    a.iter().map(|p| b.iter().map(|q| norm.h_dist(p, q)).collect()).collect()
}

/// Squared distance from `g` to the extrapolation set B of a matched pair:
/// the affine hull of {p1, p2} by default (a single point when they
/// coincide), or the segment around the extrapolated point 2p2 − p1 with
/// parameter half-width `bound` in units of the step displacement.
fn dist2_to_extrapolation(
    g: &RationalPoint,
    p1: &RationalPoint,
    p2: &RationalPoint,
    bound: Option<&Rat>,
) -> Rat {
    let d = p2.sub(p1);
    let dd: Rat = d.iter().map(|v| v * v).sum();
    if dd.is_zero() {
        return g.dist2(p2);
    }
    match bound {
        None => {
            // Distance to the full line through p1 with direction d.
            let gp = g.sub(p1);
            let dot: Rat = gp.iter().zip(&d).map(|(a, b)| a * b).sum();
            let gg: Rat = gp.iter().map(|v| v * v).sum();
            gg - &dot * &dot / dd
        }
        Some(rho) => {
            // Segment {e + s·d : |s| ≤ ρ} around the extrapolation e = 2p2 − p1.
            let e = RationalPoint::new(
                p2.coords().iter().zip(p1.coords()).map(|(b, a)| rat(2) * b - a).collect(),
            );
            let ge = g.sub(&e);
            let dot: Rat = ge.iter().zip(&d).map(|(a, b)| a * b).sum();
            let mut s = &dot / &dd;
            if &s > rho {
                s = rho.clone();
            }
            if s < -rho.clone() {
                s = -rho.clone();
            }
            let closest = e.add_scaled(&d, &s);
            g.dist2(&closest)
        }
    }
}
