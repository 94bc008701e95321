//! Exact rational geometry: points, lattice directions, X-rays, line
//! canonicalization, candidate grids, tomographic equivalence.
//!
//! A lattice line through `p` with direction `s` is keyed by its anchor, the
//! orthogonal projection of `p` onto the orthogonal complement of `s`. Two
//! points lie on the same line iff their anchors coincide, which makes the
//! anchor a canonical, hashable line representative.

use num::{BigInt, Signed, Zero};
use num_integer::Integer;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::rational::Rat;

/// A point with exact rational coordinates.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RationalPoint {
    coords: Vec<Rat>,
}

impl RationalPoint {
    pub fn new(coords: Vec<Rat>) -> Self {
        RationalPoint { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Rat] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> &Rat {
        &self.coords[i]
    }

    pub fn sub(&self, other: &RationalPoint) -> Vec<Rat> {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a - b)
            .collect()
    }

    pub fn add_scaled(&self, dir: &[Rat], t: &Rat) -> RationalPoint {
        RationalPoint::new(
            self.coords
                .iter()
                .zip(dir)
                .map(|(a, d)| a + d * t)
                .collect(),
        )
    }

    /// Squared Euclidean distance (exact).
    pub fn dist2(&self, other: &RationalPoint) -> Rat {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| {
                let d = a - b;
                &d * &d
            })
            .sum()
    }
}

impl fmt::Debug for RationalPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Convenience constructor for planar points from integer pairs.
pub fn point2(x: i64, y: i64) -> RationalPoint {
    RationalPoint::new(vec![crate::rational::rat(x), crate::rational::rat(y)])
}

/// Planar point from rationals.
pub fn rpoint2(x: Rat, y: Rat) -> RationalPoint {
    RationalPoint::new(vec![x, y])
}

/// A lattice line direction: a primitive integer vector with canonical sign
/// (first nonzero entry positive). Two parallel directions compare equal.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticeDirection {
    vector: Vec<BigInt>,
}

impl LatticeDirection {
    /// Normalizes to the primitive, sign-canonical representative.
    pub fn new(vector: Vec<BigInt>) -> Result<Self> {
        if vector.iter().all(|v| v.is_zero()) {
            return Err(Error::Invalid("zero direction vector".into()));
        }
        let mut g = BigInt::zero();
        for v in &vector {
            g = g.gcd(v);
        }
        let mut vector: Vec<BigInt> = vector.into_iter().map(|v| v / &g).collect();
        if vector
            .iter()
            .find(|v| !v.is_zero())
            .map(|v| v.is_negative())
            .unwrap_or(false)
        {
            for v in &mut vector {
                *v = -&*v;
            }
        }
        Ok(LatticeDirection { vector })
    }

    pub fn from_ints(v: &[i64]) -> Self {
        LatticeDirection::new(v.iter().map(|&x| BigInt::from(x)).collect())
            .expect("nonzero direction")
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn vector(&self) -> &[BigInt] {
        &self.vector
    }

    pub fn as_rationals(&self) -> Vec<Rat> {
        self.vector.iter().map(|v| Rat::from_integer(v.clone())).collect()
    }
}

impl fmt::Debug for LatticeDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dir{:?}", self.vector)
    }
}

/// Canonical representative of an affine lattice line: the index of its
/// direction plus the orthogonal projection of any of its points onto the
/// direction's orthogonal complement.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct LineAnchor {
    pub direction_index: usize,
    pub anchor: RationalPoint,
}

/// Anchor of the line through `point` parallel to `direction`:
/// `p − ((p·s)/(s·s))·s`. Any point on the same line yields the same anchor.
pub fn canonical_line(
    direction_index: usize,
    direction: &LatticeDirection,
    point: &RationalPoint,
) -> Result<LineAnchor> {
    if direction.dim() != point.dim() {
        return Err(Error::DimensionMismatch { expected: direction.dim(), got: point.dim() });
    }
    let s = direction.as_rationals();
    let ps: Rat = point.coords().iter().zip(&s).map(|(p, si)| p * si).sum();
    let ss: Rat = s.iter().map(|si| si * si).sum();
    let t = -(ps / ss);
    Ok(LineAnchor { direction_index, anchor: point.add_scaled(&s, &t) })
}

/// X-ray of a point set parallel to one direction: a finite map from line
/// anchors to strictly positive counts.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct XRayData {
    pub direction_index: usize,
    lines: BTreeMap<RationalPoint, u64>,
}

impl XRayData {
    pub fn new(direction_index: usize) -> Self {
        XRayData { direction_index, lines: BTreeMap::new() }
    }

    /// Builds from (anchor, count) pairs; rejects duplicates and zero counts.
    pub fn from_lines(
        direction_index: usize,
        lines: impl IntoIterator<Item = (RationalPoint, u64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (anchor, count) in lines {
            if count == 0 {
                return Err(Error::Invalid("zero-count line in X-ray data".into()));
            }
            if map.insert(anchor, count).is_some() {
                return Err(Error::Invalid("duplicate line anchor in X-ray data".into()));
            }
        }
        Ok(XRayData { direction_index, lines: map })
    }

    pub fn lines(&self) -> impl Iterator<Item = (&RationalPoint, u64)> {
        self.lines.iter().map(|(a, &c)| (a, c))
    }

    pub fn anchors(&self) -> impl Iterator<Item = &RationalPoint> {
        self.lines.keys()
    }

    pub fn count(&self, anchor: &RationalPoint) -> u64 {
        self.lines.get(anchor).copied().unwrap_or(0)
    }

    pub fn support_len(&self) -> usize {
        self.lines.len()
    }

    /// Total mass ‖f‖₁.
    pub fn mass(&self) -> u64 {
        self.lines.values().sum()
    }
}

/// A finite set of rational points, kept sorted and duplicate-free.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct PointSet {
    points: Vec<RationalPoint>,
}

impl PointSet {
    pub fn new(mut points: Vec<RationalPoint>) -> Self {
        points.sort();
        points.dedup();
        PointSet { points }
    }

    pub fn empty() -> Self {
        PointSet { points: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[RationalPoint] {
        &self.points
    }

    pub fn contains(&self, p: &RationalPoint) -> bool {
        self.points.binary_search(p).is_ok()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, RationalPoint> {
        self.points.iter()
    }
}

impl FromIterator<RationalPoint> for PointSet {
    fn from_iter<T: IntoIterator<Item = RationalPoint>>(iter: T) -> Self {
        PointSet::new(iter.into_iter().collect())
    }
}

/// Computes the X-ray `X_S F`: for every line parallel to `direction` that
/// meets `F`, the number of points of `F` on it.
pub fn xray(
    set: &PointSet,
    direction_index: usize,
    direction: &LatticeDirection,
) -> Result<XRayData> {
    let mut lines: BTreeMap<RationalPoint, u64> = BTreeMap::new();
    for p in set.iter() {
        let anchor = canonical_line(direction_index, direction, p)?;
        *lines.entry(anchor.anchor).or_insert(0) += 1;
    }
    Ok(XRayData { direction_index, lines })
}

/// True iff the two sets have identical X-rays in every given direction.
pub fn tomographically_equivalent(
    a: &PointSet,
    b: &PointSet,
    directions: &[LatticeDirection],
) -> Result<bool> {
    for (i, d) in directions.iter().enumerate() {
        if xray(a, i, d)? != xray(b, i, d)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Candidate grid: intersection points of the support lines of two X-rays,
/// sorted lexicographically, with per-direction line-to-point index maps.
#[derive(Clone, Debug)]
pub struct Grid {
    points: Vec<RationalPoint>,
    /// Per direction index: anchor → sorted indices of grid points on that line.
    lines: BTreeMap<usize, BTreeMap<RationalPoint, Vec<usize>>>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[RationalPoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &RationalPoint {
        &self.points[i]
    }

    pub fn index_of(&self, p: &RationalPoint) -> Option<usize> {
        self.points.binary_search(p).ok()
    }

    pub fn direction_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.lines.keys().copied()
    }

    /// Lines of one direction with the grid points they carry.
    pub fn lines_of(&self, direction_index: usize) -> &BTreeMap<RationalPoint, Vec<usize>> {
        &self.lines[&direction_index]
    }

    /// Builds a grid from an explicit point list (d = 2 canonical use:
    /// restrictions of a full grid, displacement pullbacks).
    pub fn from_points(
        points: impl IntoIterator<Item = RationalPoint>,
        directions: &[(usize, &LatticeDirection)],
    ) -> Result<Grid> {
        let mut pts: Vec<RationalPoint> = points.into_iter().collect();
        pts.sort();
        pts.dedup();
        let mut lines: BTreeMap<usize, BTreeMap<RationalPoint, Vec<usize>>> = BTreeMap::new();
        for &(di, dir) in directions {
            let mut per: BTreeMap<RationalPoint, Vec<usize>> = BTreeMap::new();
            for (i, p) in pts.iter().enumerate() {
                let anchor = canonical_line(di, dir, p)?;
                per.entry(anchor.anchor).or_default().push(i);
            }
            lines.insert(di, per);
        }
        Ok(Grid { points: pts, lines })
    }

    /// Restricts to a subset of the current points.
    pub fn restrict(&self, keep: &[bool], directions: &[(usize, &LatticeDirection)]) -> Result<Grid> {
        let pts = self
            .points
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(p, _)| p.clone());
        Grid::from_points(pts, directions)
    }
}

/// Intersection of two affine lattice lines given by (anchor, direction).
/// Returns `None` for parallel or skew pairs.
pub fn line_intersection(
    a1: &RationalPoint,
    s1: &LatticeDirection,
    a2: &RationalPoint,
    s2: &LatticeDirection,
) -> Option<RationalPoint> {
    if s1 == s2 {
        return None;
    }
    let d = a1.dim();
    let u = s1.as_rationals();
    let v = s2.as_rationals();
    let rhs = a2.sub(a1);
    // Solve t·u − w·v = a2 − a1 using the first pair of coordinates with a
    // nonzero 2×2 determinant, then verify the remaining coordinates (which
    // rejects skew pairs in dimension > 2).
    let mut pivot = None;
    'outer: for i in 0..d {
        for j in (i + 1)..d {
            let det = &u[i] * &v[j] - &u[j] * &v[i];
            if !det.is_zero() {
                pivot = Some((i, j, det));
                break 'outer;
            }
        }
    }
    let (i, j, det) = pivot?;
    let t = (&rhs[i] * &v[j] - &rhs[j] * &v[i]) / &det;
    let w = (&u[j] * &rhs[i] - &u[i] * &rhs[j]) / &det;
    // Verify consistency on all coordinates.
    for k in 0..d {
        if &u[k] * &t - &v[k] * &w != rhs[k] {
            return None;
        }
    }
    Some(a1.add_scaled(&u, &t))
}

/// Candidate grid of two X-rays: every intersection of a support line of
/// `f1` with a support line of `f2`. In the plane two distinct directions
/// always meet, so the grid has exactly `|T₁|·|T₂|` points; in higher
/// dimension skew pairs are dropped.
pub fn grid_from_xrays(
    f1: &XRayData,
    f2: &XRayData,
    directions: &[LatticeDirection],
) -> Result<Grid> {
    let d1 = &directions[f1.direction_index];
    let d2 = &directions[f2.direction_index];
    if d1 == d2 {
        return Err(Error::IdenticalDirections);
    }
    let mut pts = Vec::with_capacity(f1.support_len() * f2.support_len());
    for a1 in f1.anchors() {
        for a2 in f2.anchors() {
            if let Some(p) = line_intersection(a1, d1, a2, d2) {
                pts.push(p);
            }
        }
    }
    Grid::from_points(
        pts,
        &[(f1.direction_index, d1), (f2.direction_index, d2)],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, ratio};

    fn dirs_xy() -> Vec<LatticeDirection> {
        vec![LatticeDirection::from_ints(&[1, 0]), LatticeDirection::from_ints(&[0, 1])]
    }

    #[test]
    fn canonical_line_examples() {
        let h = LatticeDirection::from_ints(&[1, 0]);
        let v = LatticeDirection::from_ints(&[0, 1]);
        let diag = LatticeDirection::from_ints(&[1, 1]);
        // Horizontal line keyed by its height.
        let a = canonical_line(0, &h, &point2(5, 3)).unwrap();
        assert_eq!(a.anchor, point2(0, 3));
        // Vertical line keyed by its abscissa.
        let b = canonical_line(1, &v, &point2(5, 3)).unwrap();
        assert_eq!(b.anchor, point2(5, 0));
        // Projection of (2,0) onto the complement of (1,1): anchor (1,−1),
        // orthogonal to the direction.
        let c = canonical_line(0, &diag, &point2(2, 0)).unwrap();
        assert_eq!(c.anchor, point2(1, -1));
        let dot: Rat = c.anchor.coords().iter().zip(diag.as_rationals()).map(|(p, s)| p * &s).sum();
        assert!(dot.is_zero());
    }

    #[test]
    fn canonical_line_shift_invariance() {
        let diag = LatticeDirection::from_ints(&[2, -3]);
        let p = rpoint2(ratio(5, 7), ratio(-1, 3));
        let a = canonical_line(0, &diag, &p).unwrap();
        let q = p.add_scaled(&diag.as_rationals(), &ratio(13, 5));
        let b = canonical_line(0, &diag, &q).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn xray_examples() {
        let dirs = dirs_xy();
        let f = PointSet::new(vec![point2(0, 0), point2(1, 0), point2(0, 1)]);
        let x = xray(&f, 0, &dirs[0]).unwrap();
        assert_eq!(x.mass(), 3);
        assert_eq!(x.count(&point2(0, 0)), 2);
        assert_eq!(x.count(&point2(0, 1)), 1);

        let empty = xray(&PointSet::empty(), 0, &dirs[0]).unwrap();
        assert_eq!(empty.support_len(), 0);

        let diag = LatticeDirection::from_ints(&[1, 1]);
        let g = PointSet::new(vec![point2(0, 0), point2(1, 1), point2(2, 2)]);
        let xg = xray(&g, 0, &diag).unwrap();
        assert_eq!(xg.support_len(), 1);
        assert_eq!(xg.mass(), 3);
    }

    #[test]
    fn grid_from_xrays_examples() {
        let dirs = dirs_xy();
        // rows {0,1}, cols {0,1} → the 4 points of {0,1}².
        let f1 = XRayData::from_lines(0, vec![(point2(0, 0), 1), (point2(0, 1), 1)]).unwrap();
        let f2 = XRayData::from_lines(1, vec![(point2(0, 0), 1), (point2(1, 0), 1)]).unwrap();
        let g = grid_from_xrays(&f1, &f2, &dirs).unwrap();
        assert_eq!(g.points(), &[point2(0, 0), point2(0, 1), point2(1, 0), point2(1, 1)]);

        // rows {0}, cols {0,1,2} → 3 points on the x-axis.
        let f1 = XRayData::from_lines(0, vec![(point2(0, 0), 3)]).unwrap();
        let f2 = XRayData::from_lines(
            1,
            vec![(point2(0, 0), 1), (point2(1, 0), 1), (point2(2, 0), 1)],
        )
        .unwrap();
        let g = grid_from_xrays(&f1, &f2, &dirs).unwrap();
        assert_eq!(g.points(), &[point2(0, 0), point2(1, 0), point2(2, 0)]);

        // Directions (1,0) and (1,1): line y=0 meets the diagonal through the
        // origin at the origin.
        let dirs2 =
            vec![LatticeDirection::from_ints(&[1, 0]), LatticeDirection::from_ints(&[1, 1])];
        let f1 = XRayData::from_lines(0, vec![(point2(0, 0), 1)]).unwrap();
        let f2 = XRayData::from_lines(1, vec![(point2(0, 0), 1)]).unwrap();
        let g = grid_from_xrays(&f1, &f2, &dirs2).unwrap();
        assert_eq!(g.points(), &[point2(0, 0)]);
    }

    #[test]
    fn grid_rejects_identical_directions() {
        let dirs = vec![LatticeDirection::from_ints(&[1, 0]), LatticeDirection::from_ints(&[-2, 0])];
        let f1 = XRayData::from_lines(0, vec![(point2(0, 0), 1)]).unwrap();
        let f2 = XRayData::from_lines(1, vec![(point2(0, 1), 1)]).unwrap();
        assert!(matches!(grid_from_xrays(&f1, &f2, &dirs), Err(Error::IdenticalDirections)));
    }

    #[test]
    fn equivalence_examples() {
        let dirs = dirs_xy();
        let f1 = PointSet::new(vec![point2(0, 0), point2(1, 1)]);
        let f2 = PointSet::new(vec![point2(0, 1), point2(1, 0)]);
        assert!(tomographically_equivalent(&f1, &f1, &dirs).unwrap());
        // The classic switching pair.
        assert!(tomographically_equivalent(&f1, &f2, &dirs).unwrap());
        let g1 = PointSet::new(vec![point2(0, 0)]);
        let g2 = PointSet::new(vec![point2(1, 0)]);
        assert!(!tomographically_equivalent(&g1, &g2, &dirs).unwrap());
    }

    #[test]
    fn direction_normalization() {
        let a = LatticeDirection::from_ints(&[2, -4]);
        let b = LatticeDirection::from_ints(&[-1, 2]);
        assert_eq!(a, b);
        assert_eq!(a.vector()[0], BigInt::from(1));
    }

    #[test]
    fn skew_lines_dropped() {
        // In R³ the x-axis and the line {(0,1,z)} are skew.
        let s1 = LatticeDirection::from_ints(&[1, 0, 0]);
        let s2 = LatticeDirection::from_ints(&[0, 0, 1]);
        let a1 = RationalPoint::new(vec![rat(0), rat(0), rat(0)]);
        let a2 = RationalPoint::new(vec![rat(0), rat(1), rat(0)]);
        assert!(line_intersection(&a1, &s1, &a2, &s2).is_none());
        // Same pair shifted to meet: {(x,0,0)} and {(3,0,z)} meet at (3,0,0).
        let a3 = RationalPoint::new(vec![rat(3), rat(0), rat(0)]);
        let p = line_intersection(&a1, &s1, &a3, &s2).unwrap();
        assert_eq!(p, RationalPoint::new(vec![rat(3), rat(0), rat(0)]));
    }
}
