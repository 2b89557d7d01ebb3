//! Dyadic chaining on `[0,1]^d`: grids `D_m`, neighbour pairs `Δ_m`,
//! per-level increments `K_i(t)`, the pathwise chaining inequality, the
//! chaining bound on the empirical seminorm `[X_t]_{α,φ}`, and Monte Carlo
//! checks of the moment hypothesis.
//!
//! Every supremum here is taken over finitely many grid points and times, so
//! reported seminorms are lower bounds for their continuum counterparts.

mod bound;
mod field;
mod grid;
mod moment;

pub use bound::{
    chain_constant, chaining_bound, chaining_report, compute_level_increments, level_increments,
    pathwise_check, reduction_factor, seminorm, ChainingMode, ChainingOptions, ChainingReport,
    LevelIncrements, PathwiseCheck, PathwiseWitness, ProbePairs, ProbeSet, Seminorm,
    DEFAULT_PAIR_BUDGET,
};
pub use field::{
    generate_field, uniform_time_grid, FieldConfig, FieldGenerator, FieldSample, Norm, Snapshot,
};
pub use grid::{
    build_grid, chain_path, dyadic_approximation, neighbor_pairs, DyadicGrid, DyadicPoint,
    NeighborPairs, Segment, DEFAULT_POINT_BUDGET,
};
pub use moment::{
    holder_exponent_fit, moment_hypothesis_check, HolderFit, MomentOptions, MomentReport,
    ScaleMoment,
};
