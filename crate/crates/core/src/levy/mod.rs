//! Finite-intensity Poisson random measures on `(0, T] × E`, `E` a punctured
//! ball, their compensated integrals, and Monte Carlo reports on the
//! Kunita-type moment inequalities.
//!
//! Infinite-activity Lévy measures must be truncated to a finite mass before
//! simulation; [`LevyConfig::truncation`] records how.

mod integral;
mod kunita;
mod measure;

pub use integral::{
    compensated_integral, compensated_integral_with, sup_abs, CompensatedIntegralPath, Compensator,
    Integrand, IntegrandSpec, JumpFn, MarkFactor, TimeFactor,
};
pub(crate) use kunita::assemble;
pub use kunita::{
    default_batches, kunita_check, kunita_check_p_ge2, kunita_check_p_lt2, linfty_moment_check,
    InequalityKind, InequalityReport, SpaceFn, SpaceProfile, DRIFT_TOL, MIN_BATCH,
    MIN_REPLICATIONS,
};
pub use measure::{
    sample_prm, sample_prm_seeded, Atom, LevyConfig, MarkDistribution, MeasureSpec,
    PoissonMeasureSample,
};
