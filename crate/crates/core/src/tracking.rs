//! Dynamic coupling: instances, weight models, track sets, and the four
//! exact/heuristic tracking algorithms (Markov decomposition, coupled ILP,
//! rolling horizon, displacement-field reconstruction).

use num::{One, Signed, Zero};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fitting::NormSpec;
use crate::geometry::{
    grid_from_xrays, xray, Grid, LatticeDirection, PointSet, RationalPoint, XRayData,
};
use crate::rational::{Rat, SqrtSum};
use crate::solver::{
    min_weight_perfect_matching, solve_ilp, IlpModel, IlpStatus, LinearProgram, Matching,
    Relation, Weight,
};
use crate::windows::{solve_frame_lp, WindowConstraint};

/// Weight model realizing the objective oracle.
///
/// The Markov kinds (everything except `TriangleArea` and `PathTable`)
/// assign a rational cost to every tracking edge between consecutive
/// frames. `Euclidean` orders edges by the squared distance (the strictly
/// monotone transform keeping values rational); true lengths are recovered
/// as radical sums where a caller needs them.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightModel {
    /// Per step τ, a |G^τ| × |G^(τ+1)| table over grid indices.
    Explicit { tables: Vec<Vec<Vec<Weight>>> },
    SquaredEuclidean,
    Euclidean,
    /// Rolling-horizon style: point weights from the distance to the
    /// nearest accepted predecessor, edge weights from the same norm.
    NearestPointAlpha { norm: NormSpec },
    /// Path weight = area of the triangle spanned by a 3-frame track.
    TriangleArea,
    /// Explicit path value oracle: cost per full track (point sequence).
    PathTable { paths: BTreeMap<Vec<RationalPoint>, Rat> },
}

impl WeightModel {
    /// True when track cost decomposes into consecutive-frame edge costs.
    pub fn is_markov(&self) -> bool {
        !matches!(self, WeightModel::TriangleArea | WeightModel::PathTable { .. })
    }

    /// The norm used for distance-based edge weights and rolling-horizon
    /// point weights (squared Euclidean unless the model names another).
    pub fn norm(&self) -> NormSpec {
        match self {
            WeightModel::NearestPointAlpha { norm } => norm.clone(),
            _ => NormSpec::euclid2(),
        }
    }

    /// Edge weight of moving from grid point `pi` of frame τ to grid point
    /// `qi` of frame τ+1.
    pub fn edge_weight(
        &self,
        step: usize,
        p: &RationalPoint,
        q: &RationalPoint,
        pi: usize,
        qi: usize,
    ) -> Result<Weight> {
        match self {
            WeightModel::Explicit { tables } => {
                let t = tables
                    .get(step)
                    .ok_or_else(|| Error::Invalid(format!("no weight table for step {step}")))?;
                let row = t
                    .get(pi)
                    .ok_or_else(|| Error::field(format!("weights[{step}]"), "row out of range"))?;
                row.get(qi)
                    .cloned()
                    .ok_or_else(|| Error::field(format!("weights[{step}]"), "column out of range"))
            }
            WeightModel::SquaredEuclidean | WeightModel::Euclidean => {
                Ok(Weight::Finite(p.dist2(q)))
            }
            WeightModel::NearestPointAlpha { norm } => Ok(Weight::Finite(norm.h_dist(p, q))),
            WeightModel::TriangleArea | WeightModel::PathTable { .. } => Err(Error::Invalid(
                "non-Markov weight model has no edge weights".into(),
            )),
        }
    }

    /// Cost of a complete track under a path-based model.
    pub fn path_cost(&self, points: &[&RationalPoint]) -> Result<Weight> {
        match self {
            WeightModel::TriangleArea => {
                if points.len() != 3 {
                    return Err(Error::Invalid("triangle-area weights need t = 3".into()));
                }
                Ok(Weight::Finite(triangle_area(points[0], points[1], points[2])))
            }
            WeightModel::PathTable { paths } => {
                let key: Vec<RationalPoint> = points.iter().map(|&p| p.clone()).collect();
                Ok(paths.get(&key).cloned().map_or(Weight::Forbidden, Weight::Finite))
            }
            _ => Err(Error::Invalid("Markov model has no path table".into())),
        }
    }
}

/// Area of the triangle spanned by three planar points: ½|det(b−a, c−a)|.
pub fn triangle_area(a: &RationalPoint, b: &RationalPoint, c: &RationalPoint) -> Rat {
    let u = b.sub(a);
    let v = c.sub(a);
    let det = &u[0] * &v[1] - &u[1] * &v[0];
    det.abs() / crate::rational::rat(2)
}

/// A particle displacement field for the step τ → τ+1: either one affine
/// map applied at every step, or a per-step tabulated partial map on grid
/// points (the displacement oracle; unmapped points admit no realization).
#[derive(Clone, Debug, PartialEq)]
pub enum DisplacementField {
    Affine { matrix: Vec<Vec<Rat>>, translation: Vec<Rat> },
    Tabulated { steps: Vec<BTreeMap<RationalPoint, RationalPoint>> },
}

impl DisplacementField {
    pub fn affine2(m: [[i64; 2]; 2], t: [i64; 2]) -> Self {
        DisplacementField::Affine {
            matrix: m
                .iter()
                .map(|row| row.iter().map(|&v| crate::rational::rat(v)).collect())
                .collect(),
            translation: t.iter().map(|&v| crate::rational::rat(v)).collect(),
        }
    }

    /// Image of `p` at step τ (0-based), or `None` where a tabulated field
    /// reports that no successor exists.
    pub fn apply(&self, step: usize, p: &RationalPoint) -> Option<RationalPoint> {
        match self {
            DisplacementField::Affine { matrix, translation } => {
                let coords: Vec<Rat> = matrix
                    .iter()
                    .zip(translation)
                    .map(|(row, t)| {
                        row.iter().zip(p.coords()).map(|(m, c)| m * c).sum::<Rat>() + t
                    })
                    .collect();
                Some(RationalPoint::new(coords))
            }
            DisplacementField::Tabulated { steps } => steps.get(step)?.get(p).cloned(),
        }
    }

    /// Determinant of the affine part (error for tabulated fields).
    fn affine_det(&self) -> Result<Rat> {
        match self {
            DisplacementField::Affine { matrix, .. } => {
                if matrix.len() != 2 || matrix.iter().any(|r| r.len() != 2) {
                    return Err(Error::Invalid("affine displacement must be 2×2 here".into()));
                }
                Ok(&matrix[0][0] * &matrix[1][1] - &matrix[0][1] * &matrix[1][0])
            }
            DisplacementField::Tabulated { .. } => {
                Err(Error::Invalid("tabulated displacement has no matrix".into()))
            }
        }
    }

    /// Properness for the two X-ray directions: the affine map must send
    /// neither direction onto an X-ray direction (φ(Sᵢ) − φ(0) ∉ {S₁, S₂}).
    pub fn is_proper(&self, directions: &[LatticeDirection]) -> Result<bool> {
        let DisplacementField::Affine { matrix, .. } = self else {
            return Err(Error::Invalid("properness is defined for affine fields".into()));
        };
        if self.affine_det()?.is_zero() {
            return Ok(false);
        }
        for s in directions.iter().take(2) {
            let sv = s.as_rationals();
            let image: Vec<Rat> = matrix
                .iter()
                .map(|row| row.iter().zip(&sv).map(|(m, c)| m * c).sum())
                .collect();
            // Scale to an integer vector and canonicalize.
            let denom_lcm = image
                .iter()
                .fold(num::BigInt::one(), |acc, r| num_integer::lcm(acc, r.denom().clone()));
            let ints: Vec<num::BigInt> =
                image.iter().map(|r| r.numer() * (&denom_lcm / r.denom())).collect();
            let dir = LatticeDirection::new(ints)?;
            if directions.iter().take(2).any(|d| *d == dir) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// A full dynamic tomography instance: t frames of two-direction X-ray
/// data, with optional known frames, displacement field, windows, and a
/// weight model.
#[derive(Clone, Debug)]
pub struct TomographyInstance {
    pub dim: usize,
    pub directions: Vec<LatticeDirection>,
    /// frames[τ][i] is the X-ray of frame τ in direction i.
    pub frames: Vec<Vec<XRayData>>,
    /// Per-frame known solution (positionally determined frames).
    pub known_positions: Vec<Option<PointSet>>,
    pub displacement: Option<DisplacementField>,
    pub weights: WeightModel,
    pub windows: Vec<WindowConstraint>,
    n: u64,
}

impl TomographyInstance {
    pub fn new(
        dim: usize,
        directions: Vec<LatticeDirection>,
        frames: Vec<Vec<XRayData>>,
        known_positions: Vec<Option<PointSet>>,
        weights: WeightModel,
    ) -> Result<Self> {
        let mut inst = TomographyInstance {
            dim,
            directions,
            frames,
            known_positions,
            displacement: None,
            weights,
            windows: Vec::new(),
            n: 0,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Positionally determined instance: every frame known, X-rays derived.
    pub fn positionally_determined(
        directions: Vec<LatticeDirection>,
        frames: Vec<PointSet>,
        weights: WeightModel,
    ) -> Result<Self> {
        let dim = directions.first().map_or(2, LatticeDirection::dim);
        let xrays: Vec<Vec<XRayData>> = frames
            .iter()
            .map(|f| {
                directions
                    .iter()
                    .enumerate()
                    .map(|(i, d)| xray(f, i, d))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let known = frames.into_iter().map(Some).collect();
        TomographyInstance::new(dim, directions, xrays, known, weights)
    }

    pub fn with_displacement(mut self, field: DisplacementField) -> Result<Self> {
        self.displacement = Some(field);
        self.validate()?;
        Ok(self)
    }

    pub fn with_windows(mut self, windows: Vec<WindowConstraint>) -> Result<Self> {
        self.windows = windows;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&mut self) -> Result<()> {
        if self.directions.len() < 2 {
            return Err(Error::Invalid("need at least two directions".into()));
        }
        if self.directions[0] == self.directions[1] {
            return Err(Error::IdenticalDirections);
        }
        for d in &self.directions {
            if d.dim() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: d.dim() });
            }
        }
        if self.frames.is_empty() {
            return Err(Error::Invalid("instance needs at least one frame".into()));
        }
        let n = self.frames[0][0].mass();
        for (tau, fs) in self.frames.iter().enumerate() {
            if fs.len() < 2 {
                return Err(Error::field(format!("frames[{tau}]"), "need two directions"));
            }
            for f in fs {
                if f.mass() != n {
                    return Err(Error::MassMismatch { left: n, right: f.mass() });
                }
            }
        }
        if self.known_positions.len() != self.frames.len() {
            return Err(Error::Invalid("known_positions length must equal frame count".into()));
        }
        for (tau, known) in self.known_positions.iter().enumerate() {
            if let Some(f) = known {
                for (i, d) in self.directions.iter().enumerate().take(2) {
                    if xray(f, i, d)? != self.frames[tau][i] {
                        return Err(Error::field(
                            format!("known_positions[{tau}]"),
                            "does not realize the frame X-rays",
                        ));
                    }
                }
            }
        }
        for w in &self.windows {
            if w.frame >= self.frames.len() {
                return Err(Error::field("windows", format!("frame {} out of range", w.frame)));
            }
        }
        self.n = n;
        Ok(())
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn t(&self) -> usize {
        self.frames.len()
    }

    pub fn is_positionally_determined(&self) -> bool {
        self.known_positions.iter().all(Option::is_some)
    }

    /// Candidate grid at frame τ (the known point set when the frame is
    /// positionally determined).
    pub fn grid(&self, tau: usize) -> Result<Grid> {
        if let Some(f) = &self.known_positions[tau] {
            return Grid::from_points(
                f.iter().cloned(),
                &[(0, &self.directions[0]), (1, &self.directions[1])],
            );
        }
        grid_from_xrays(&self.frames[tau][0], &self.frames[tau][1], &self.directions)
    }

    pub fn grids(&self) -> Result<Vec<Grid>> {
        (0..self.t()).map(|tau| self.grid(tau)).collect()
    }

    pub fn windows_for(&self, tau: usize) -> Vec<WindowConstraint> {
        self.windows.iter().filter(|w| w.frame == tau).cloned().collect()
    }
}

/// Tracks over t frames: per-frame reconstructed point sets plus n index
/// paths, each a bijection per frame, with the achieved objective value.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackSet {
    frames: Vec<PointSet>,
    tracks: Vec<Vec<usize>>,
    pub objective: Rat,
}

impl TrackSet {
    /// Validates shape and per-frame bijectivity, then canonicalizes track
    /// order (sorted by point sequence, so by the τ = 1 point first).
    pub fn new(frames: Vec<PointSet>, tracks: Vec<Vec<usize>>, objective: Rat) -> Result<Self> {
        let t = frames.len();
        let n = frames.first().map_or(0, PointSet::len);
        if frames.iter().any(|f| f.len() != n) {
            return Err(Error::Invalid("all frames must have n points".into()));
        }
        if tracks.len() != n || tracks.iter().any(|tr| tr.len() != t) {
            return Err(Error::Invalid("tracks must be n sequences of t indices".into()));
        }
        for tau in 0..t {
            let mut seen = vec![false; n];
            for tr in &tracks {
                let i = tr[tau];
                if i >= n || seen[i] {
                    return Err(Error::Invalid(format!(
                        "track indices at frame {tau} are not a bijection"
                    )));
                }
                seen[i] = true;
            }
        }
        let mut ts = TrackSet { frames, tracks, objective };
        ts.canonicalize();
        Ok(ts)
    }

    fn canonicalize(&mut self) {
        let frames = &self.frames;
        self.tracks.sort_by(|a, b| {
            let pa: Vec<&RationalPoint> =
                a.iter().enumerate().map(|(tau, &i)| &frames[tau].points()[i]).collect();
            let pb: Vec<&RationalPoint> =
                b.iter().enumerate().map(|(tau, &i)| &frames[tau].points()[i]).collect();
            pa.cmp(&pb)
        });
    }

    pub fn n(&self) -> usize {
        self.tracks.len()
    }

    pub fn t(&self) -> usize {
        self.frames.len()
    }

    pub fn frames(&self) -> &[PointSet] {
        &self.frames
    }

    pub fn tracks(&self) -> &[Vec<usize>] {
        &self.tracks
    }

    pub fn track_points(&self, i: usize) -> Vec<&RationalPoint> {
        self.tracks[i]
            .iter()
            .enumerate()
            .map(|(tau, &j)| &self.frames[tau].points()[j])
            .collect()
    }

    /// All consecutive-frame edges (from, to), grouped by track.
    pub fn edges(&self) -> Vec<(&RationalPoint, &RationalPoint)> {
        let mut out = Vec::new();
        for tr in &self.tracks {
            for tau in 0..tr.len().saturating_sub(1) {
                out.push((
                    &self.frames[tau].points()[tr[tau]],
                    &self.frames[tau + 1].points()[tr[tau + 1]],
                ));
            }
        }
        out
    }

    /// Σ over edges of the h-transformed norm distance.
    pub fn total_h_length(&self, norm: &NormSpec) -> Rat {
        self.edges().iter().map(|(p, q)| norm.h_dist(p, q)).sum()
    }

    /// Exact total Euclidean length as a radical sum.
    pub fn total_euclidean_length(&self) -> SqrtSum {
        let mut s = SqrtSum::zero();
        for (p, q) in self.edges() {
            s.add_sqrt(&Rat::one(), &p.dist2(q));
        }
        s
    }

    /// Σ over tracks of the triangle-area path weight (t = 3 only).
    pub fn triangle_area_total(&self) -> Result<Rat> {
        if self.t() != 3 {
            return Err(Error::Invalid("triangle-area objective needs t = 3".into()));
        }
        let mut total = Rat::zero();
        for i in 0..self.n() {
            let p = self.track_points(i);
            total += triangle_area(p[0], p[1], p[2]);
        }
        Ok(total)
    }

    /// Exact check that every frame realizes the instance X-rays.
    pub fn satisfies(&self, instance: &TomographyInstance) -> Result<bool> {
        if self.t() != instance.t() || self.n() as u64 != instance.n() {
            return Ok(false);
        }
        for (tau, f) in self.frames.iter().enumerate() {
            for (i, d) in instance.directions.iter().enumerate().take(2) {
                if xray(f, i, d)? != instance.frames[tau][i] {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Builds the weight matrix between two realized frames under a Markov
/// model, indexing explicit tables through the frames' candidate grids.
pub(crate) fn step_weights(
    model: &WeightModel,
    step: usize,
    from: &PointSet,
    to: &PointSet,
    from_grid: Option<&Grid>,
    to_grid: Option<&Grid>,
) -> Result<Vec<Vec<Weight>>> {
    let idx = |grid: Option<&Grid>, p: &RationalPoint| -> Result<usize> {
        match grid {
            None => Ok(0),
            Some(g) => {
                g.index_of(p).ok_or_else(|| Error::Invalid("point missing from its grid".into()))
            }
        }
    };
    let explicit = matches!(model, WeightModel::Explicit { .. });
    let mut w = Vec::with_capacity(from.len());
    for p in from.iter() {
        let pi = if explicit { idx(from_grid, p)? } else { 0 };
        let mut row = Vec::with_capacity(to.len());
        for q in to.iter() {
            let qi = if explicit { idx(to_grid, q)? } else { 0 };
            row.push(model.edge_weight(step, p, q, pi, qi)?);
        }
        w.push(row);
    }
    Ok(w)
}

/// Markov decomposition for positionally determined instances: t−1
/// independent minimum-weight perfect matchings, globally optimal for
/// Markov objectives.
pub fn trac_markov(instance: &TomographyInstance) -> Result<TrackSet> {
    if !instance.weights.is_markov() {
        return Err(Error::Invalid("trac_markov needs a Markov weight model".into()));
    }
    let frames: Vec<PointSet> = instance
        .known_positions
        .iter()
        .enumerate()
        .map(|(tau, k)| k.clone().ok_or(Error::MissingKnownPositions { frame: tau }))
        .collect::<Result<Vec<_>>>()?;
    let grids = if matches!(instance.weights, WeightModel::Explicit { .. }) {
        Some(instance.grids()?)
    } else {
        None
    };
    let t = frames.len();
    let n = frames[0].len();
    let mut matchings: Vec<Matching> = Vec::with_capacity(t.saturating_sub(1));
    let mut objective = Rat::zero();
    for tau in 0..t.saturating_sub(1) {
        let w = step_weights(
            &instance.weights,
            tau,
            &frames[tau],
            &frames[tau + 1],
            grids.as_ref().map(|g| &g[tau]),
            grids.as_ref().map(|g| &g[tau + 1]),
        )?;
        let m = min_weight_perfect_matching(&w)?;
        objective += &m.value;
        matchings.push(m);
    }
    let mut tracks = Vec::with_capacity(n);
    for start in 0..n {
        let mut tr = Vec::with_capacity(t);
        let mut cur = start;
        tr.push(cur);
        for m in &matchings {
            cur = m.assignment[cur];
            tr.push(cur);
        }
        tracks.push(tr);
    }
    TrackSet::new(frames, tracks, objective)
}

/// The coupled tracking ILP: per-frame tomographic rows, leaving/entering
/// coupling rows, binary point and edge variables, exact branch-and-bound.
/// Window constraints on the instance are included as additional rows.
pub fn tomtrac_ilp(instance: &TomographyInstance, budget: Option<u64>) -> Result<TrackSet> {
    if !instance.weights.is_markov() {
        return Err(Error::Invalid("tomtrac_ilp needs a Markov weight model".into()));
    }
    let grids = instance.grids()?;
    let t = instance.t();
    let n = instance.n() as usize;

    // Variable layout: all ξ blocks, then all η blocks. Forbidden edges get
    // no variable at all.
    let mut xi_off = Vec::with_capacity(t);
    let mut total = 0usize;
    for g in &grids {
        xi_off.push(total);
        total += g.len();
    }
    let mut eta_vars: Vec<BTreeMap<(usize, usize), usize>> = Vec::new();
    let mut eta_weights: Vec<(usize, Rat)> = Vec::new();
    for tau in 0..t.saturating_sub(1) {
        let mut step = BTreeMap::new();
        for i in 0..grids[tau].len() {
            for j in 0..grids[tau + 1].len() {
                let w = instance.weights.edge_weight(
                    tau,
                    grids[tau].point(i),
                    grids[tau + 1].point(j),
                    i,
                    j,
                )?;
                if let Weight::Finite(w) = w {
                    step.insert((i, j), total);
                    eta_weights.push((total, w));
                    total += 1;
                }
            }
        }
        eta_vars.push(step);
    }

    let mut lp = LinearProgram::binary_box(total);
    let mut objective = vec![Rat::zero(); total];
    for (v, w) in eta_weights {
        objective[v] = w;
    }
    lp.set_objective(objective);

    // ξ ≤ 1 rows are implied wherever a unit-count line covers the point;
    // η ≤ 1 always follows from the coupling rows once ξ ≤ 1 holds.
    let mut implied = vec![false; total];
    for tau in 0..t {
        add_xray_rows(&mut lp, &grids[tau], &instance.frames[tau], xi_off[tau], &mut implied)?;
        for w in instance.windows_for(tau) {
            w.add_row(&mut lp, xi_off[tau], grids[tau].len())?;
        }
    }
    for step in eta_vars.iter() {
        for (_, &v) in step.iter() {
            implied[v] = true;
        }
    }
    for tau in 0..t.saturating_sub(1) {
        // Leaving: ξ_i = Σ_j η_{ij}; entering: ξ_j = Σ_i η_{ij}.
        for i in 0..grids[tau].len() {
            let mut terms = vec![(xi_off[tau] + i, Rat::one())];
            for j in 0..grids[tau + 1].len() {
                if let Some(&v) = eta_vars[tau].get(&(i, j)) {
                    terms.push((v, -Rat::one()));
                }
            }
            lp.add_row(terms, Relation::Eq, Rat::zero());
        }
        for j in 0..grids[tau + 1].len() {
            let mut terms = vec![(xi_off[tau + 1] + j, Rat::one())];
            for i in 0..grids[tau].len() {
                if let Some(&v) = eta_vars[tau].get(&(i, j)) {
                    terms.push((v, -Rat::one()));
                }
            }
            lp.add_row(terms, Relation::Eq, Rat::zero());
        }
    }
    lp.implied_upper = implied;

    let model = IlpModel::all_binary(lp);
    let out = solve_ilp(&model, budget)?;
    match out.status {
        IlpStatus::Infeasible => return Err(Error::infeasible()),
        IlpStatus::BudgetExhausted => return Err(Error::BudgetExhausted { nodes: out.nodes }),
        IlpStatus::Optimal => {}
    }
    let x = out.primal.expect("optimal");

    // Decode frames and edges.
    let mut frames = Vec::with_capacity(t);
    for tau in 0..t {
        let pts: Vec<RationalPoint> = (0..grids[tau].len())
            .filter(|&i| x[xi_off[tau] + i].is_one())
            .map(|i| grids[tau].point(i).clone())
            .collect();
        if pts.len() != n {
            return Err(Error::Invalid("decoded frame has wrong cardinality".into()));
        }
        frames.push(PointSet::new(pts));
    }
    let mut tracks = Vec::with_capacity(n);
    for start in (0..grids[0].len()).filter(|&i| x[xi_off[0] + i].is_one()) {
        let mut tr = Vec::with_capacity(t);
        tr.push(
            frames[0].points().binary_search(grids[0].point(start)).expect("decoded point"),
        );
        let mut cur = start;
        for tau in 0..t - 1 {
            let next = eta_vars[tau]
                .iter()
                .find(|(&(i, _), &v)| i == cur && x[v].is_one())
                .map(|(&(_, j), _)| j)
                .ok_or_else(|| Error::Invalid("selected point has no outgoing edge".into()))?;
            cur = next;
            tr.push(
                frames[tau + 1]
                    .points()
                    .binary_search(grids[tau + 1].point(next))
                    .expect("decoded point"),
            );
        }
        tracks.push(tr);
    }
    TrackSet::new(frames, tracks, out.objective.expect("optimal"))
}

/// Adds the X-ray equality rows of one frame over its grid. Marks ξ ≤ 1 as
/// row-implied for points covered by a unit-count line, and pins absent
/// grid lines to zero.
pub(crate) fn add_xray_rows(
    lp: &mut LinearProgram,
    grid: &Grid,
    frame: &[XRayData],
    offset: usize,
    implied: &mut [bool],
) -> Result<()> {
    for f in frame.iter().take(2) {
        let lines = grid.lines_of(f.direction_index);
        for (anchor, count) in f.lines() {
            match lines.get(anchor) {
                Some(pts) => {
                    let terms: Vec<(usize, Rat)> =
                        pts.iter().map(|&i| (offset + i, Rat::one())).collect();
                    if count == 1 {
                        for &i in pts {
                            implied[offset + i] = true;
                        }
                    }
                    lp.add_row(terms, Relation::Eq, Rat::from_integer(count.into()));
                }
                None => {
                    // A demanded line with no candidate points: infeasible.
                    lp.add_row(Vec::new(), Relation::Eq, Rat::from_integer(count.into()));
                }
            }
        }
        for (anchor, pts) in lines {
            if f.count(anchor) == 0 {
                let terms: Vec<(usize, Rat)> =
                    pts.iter().map(|&i| (offset + i, Rat::one())).collect();
                for &i in pts {
                    implied[offset + i] = true;
                }
                lp.add_row(terms, Relation::Eq, Rat::zero());
            }
        }
    }
    Ok(())
}

/// Rolling horizon: starting from the known first frame, solve one exact LP
/// per step (vertex asserted 0/1 by total unimodularity), accept its support
/// as the next frame, and couple by a full minimum-weight matching under the
/// same distance weights.
pub fn rolling_horizon(instance: &TomographyInstance) -> Result<TrackSet> {
    let first = instance.known_positions[0]
        .clone()
        .ok_or(Error::MissingKnownPositions { frame: 0 })?;
    let norm = instance.weights.norm();
    let t = instance.t();
    let n = instance.n() as usize;

    let mut frames: Vec<PointSet> = vec![first];
    let mut matchings: Vec<Matching> = Vec::new();
    let mut objective = Rat::zero();
    for tau in 0..t - 1 {
        let grid = instance.grid(tau + 1)?;
        let alpha: Vec<Rat> = grid
            .points()
            .iter()
            .map(|g| {
                frames[tau]
                    .iter()
                    .map(|p| norm.h_dist(g, p))
                    .min()
                    .expect("frames are nonempty")
            })
            .collect();
        let support = solve_frame_lp(
            &grid,
            &instance.frames[tau + 1],
            &instance.windows_for(tau + 1),
            Some(&alpha),
        )
        .map_err(|e| match e {
            Error::Infeasible { .. } => Error::infeasible_at(tau + 1),
            other => other,
        })?;
        if support.len() != n {
            return Err(Error::infeasible_at(tau + 1));
        }
        let w: Vec<Vec<Rat>> = frames[tau]
            .iter()
            .map(|p| support.iter().map(|q| norm.h_dist(p, q)).collect())
            .collect();
        let m = crate::solver::rat_matching(&w);
        objective += &m.value;
        matchings.push(m);
        frames.push(support);
    }

    let mut tracks = Vec::with_capacity(n);
    for start in 0..n {
        let mut tr = Vec::with_capacity(t);
        let mut cur = start;
        tr.push(cur);
        for m in &matchings {
            cur = m.assignment[cur];
            tr.push(cur);
        }
        tracks.push(tr);
    }
    TrackSet::new(frames, tracks, objective)
}

/// Displacement-field tomography: variables live on the pullback
/// H = {p ∈ G¹ : every forward image lies in its frame grid}; each frame's
/// X-ray rows act on the mapped variable set; feasibility by exact ILP.
/// Tracks follow the field deterministically from the reconstructed F¹.
pub fn tomdisplacetrac(instance: &TomographyInstance, budget: Option<u64>) -> Result<TrackSet> {
    let field = instance
        .displacement
        .as_ref()
        .ok_or_else(|| Error::Invalid("tomdisplacetrac needs a displacement field".into()))?;
    if let DisplacementField::Affine { .. } = field {
        if field.affine_det()?.is_zero() {
            return Err(Error::SingularDisplacement);
        }
    }
    let grids = instance.grids()?;
    let t = instance.t();
    let n = instance.n() as usize;

    // Forward orbits: orbit[τ] is the image of the start point at frame τ.
    let mut orbits: Vec<Vec<RationalPoint>> = Vec::new();
    'points: for p in grids[0].points() {
        let mut orbit = vec![p.clone()];
        for tau in 0..t - 1 {
            match field.apply(tau, orbit.last().unwrap()) {
                Some(q) if grids[tau + 1].index_of(&q).is_some() => orbit.push(q),
                _ => continue 'points,
            }
        }
        orbits.push(orbit);
    }
    if orbits.len() < n {
        return Err(Error::infeasible());
    }

    let mut lp = LinearProgram::binary_box(orbits.len());
    for tau in 0..t {
        for f in instance.frames[tau].iter().take(2) {
            let lines = grids[tau].lines_of(f.direction_index);
            for (anchor, pts) in lines {
                let members: Vec<usize> = orbits
                    .iter()
                    .enumerate()
                    .filter(|(_, orbit)| {
                        grids[tau].index_of(&orbit[tau]).map_or(false, |pi| pts.contains(&pi))
                    })
                    .map(|(k, _)| k)
                    .collect();
                let count = f.count(anchor);
                if members.is_empty() && count == 0 {
                    continue;
                }
                lp.add_row(
                    members.into_iter().map(|k| (k, Rat::one())).collect(),
                    Relation::Eq,
                    Rat::from_integer(count.into()),
                );
            }
        }
    }
    // Tabulated fields need not be injective: forbid two orbits sharing an
    // image point.
    if matches!(field, DisplacementField::Tabulated { .. }) {
        for tau in 1..t {
            let mut by_image: BTreeMap<&RationalPoint, Vec<usize>> = BTreeMap::new();
            for (k, orbit) in orbits.iter().enumerate() {
                by_image.entry(&orbit[tau]).or_default().push(k);
            }
            for (_, ks) in by_image {
                if ks.len() > 1 {
                    lp.add_row(
                        ks.into_iter().map(|k| (k, Rat::one())).collect(),
                        Relation::Le,
                        Rat::one(),
                    );
                }
            }
        }
    }

    let out = solve_ilp(&IlpModel::all_binary(lp), budget)?;
    match out.status {
        IlpStatus::Infeasible => return Err(Error::infeasible()),
        IlpStatus::BudgetExhausted => return Err(Error::BudgetExhausted { nodes: out.nodes }),
        IlpStatus::Optimal => {}
    }
    let x = out.primal.expect("optimal");
    let selected: Vec<&Vec<RationalPoint>> =
        orbits.iter().enumerate().filter(|(k, _)| x[*k].is_one()).map(|(_, o)| o).collect();
    let frames: Vec<PointSet> =
        (0..t).map(|tau| selected.iter().map(|o| o[tau].clone()).collect()).collect();
    let tracks: Vec<Vec<usize>> = selected
        .iter()
        .map(|o| {
            (0..t)
                .map(|tau| frames[tau].points().binary_search(&o[tau]).expect("image present"))
                .collect()
        })
        .collect();
    let ts = TrackSet::new(frames, tracks, Rat::zero())?;
    debug_assert!(ts.satisfies(instance)?);
    Ok(ts)
}
