//! Dynamic discrete tomography: reconstruct finite planar point sets from
//! two 1-dimensional X-rays per time frame and couple the frames into
//! particle tracks.
//!
//! Everything feasibility-relevant runs over exact rationals: the candidate
//! grids, the simplex kernel, the branch-and-bound solver, and the matching
//! routines. Brute-force oracles (subset enumeration, permutation
//! enumeration) provide ground truth at desk scale for every solver path.
//!
//! Modules follow the pipeline:
//!
//! - [`geometry`]: points, directions, X-rays, line anchors, candidate grids;
//! - [`tomo`]: static two-direction reconstruction, uniqueness, counting,
//!   and the enumeration oracles;
//! - [`solver`]: exact rational simplex, Hungarian matching, 0/1
//!   branch-and-bound, and a total-unimodularity probe;
//! - [`tracking`]: coupled tracking (Markov decomposition, coupled ILP,
//!   rolling horizon, displacement-field reconstruction);
//! - [`fitting`]: sample-fit families, path fitting, tomographic fitting,
//!   two-way fitting;
//! - [`windows`]: per-frame cardinality window constraints;
//! - [`sim`]: scenario generation and track evaluation;
//! - [`io`]: JSON instance/track/report formats with exact rationals;
//! - [`plot`]: SVG emission.

pub mod error;
pub mod fitting;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod plot;
pub mod rational;
pub mod sim;
pub mod solver;
pub mod tomo;
pub mod tracking;
pub mod windows;

pub use error::{Error, Result};
pub use geometry::{
    canonical_line, grid_from_xrays, tomographically_equivalent, xray, Grid, LatticeDirection,
    LineAnchor, PointSet, RationalPoint, XRayData,
};
pub use rational::{format_rat, parse_rat, rat, ratio, Rat, SqrtSum};




