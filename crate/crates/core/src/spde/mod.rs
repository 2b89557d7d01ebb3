//! Mild solutions of the fractional heat equation driven by a compensated
//! Poisson random measure,
//! `∂_t u = −(−Δ)^{α/2} u + ∫_E g(t, ·, v) Ñ(dt, dv)`, `u(0) = 0`,
//! computed spectrally on a periodic grid, and Monte Carlo checks of the
//! regularity bounds they satisfy.

mod checks;
mod experiment;
mod forcing;
mod solver;

pub use checks::{
    convolution_modulus_lemma, forcing_linfty_check, holder_conclusion_check,
    modulus_estimate_check, sup_bound_check, HolderCheckOptions, HolderReport, LemmaCase,
    LemmaProbes, LemmaReport, LemmaWitness, LevelSeminorm, ModulusCheckOptions,
    ModulusEstimateReport, SeparationEstimate, MAX_SEMINORM_PAIRS,
};
pub use experiment::{uniform_times, SpdeConfig, DEFAULT_TIME_POINTS};
pub use forcing::{
    Certificate, Forcing, ForcingFn, ForcingSpec, SpaceSpec, WeightFn, WeightedForcing,
};
pub use solver::{
    mild_solution, CompensatorQuad, Ensemble, MildSolutionField, MildSolutionPath, MildSolver,
    SolverOptions,
};
