//! Executable companions to a generalized Kolmogorov continuity criterion.
//!
//! The crate is organised around five layers:
//!
//! - [`modulus`]: continuity moduli `φ` and the scalar admissibility
//!   conditions (dyadic sums, ratio bounds, `ϑ` windows).
//! - [`chaining`]: dyadic grids, neighbour pairs, per-level increments
//!   `K_i(t)`, chaining bounds and empirical `[X]_{α,φ}` seminorms of sampled
//!   fields, plus Monte Carlo checks of the moment hypothesis.
//! - [`levy`]: exact simulation of finite-intensity Poisson random measures,
//!   compensated integrals and Kunita-type moment reports.
//! - [`kernel`]: the fractional heat kernel of `∂_t u = -(-Δ)^{α/2} u` on a
//!   periodic grid and the principal-value fractional Laplacian.
//! - [`spde`]: mild solutions of the Lévy-driven nonlocal heat equation and
//!   the Monte Carlo checks built on them.
//!
//! Replication loops go through [`exec`], which uses rayon when the
//! `parallel` feature is on and always reduces in a fixed order, so every
//! reported number is independent of the thread count.

pub mod chaining;
pub mod error;
pub mod exec;
pub mod kernel;
pub mod levy;
pub mod modulus;
pub mod quadrature;
pub mod seed;
pub mod spde;
pub mod stats;

pub use error::{Error, Result};
