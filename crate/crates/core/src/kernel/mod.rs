//! Heat kernels of the fractional equation `∂_t u = −(−Δ)^{α/2} u` on a
//! periodic grid, plus the fractional Laplacian in its singular-integral form.

mod grid;
mod heat;
mod laplacian;

pub use grid::{fft_nd, PeriodicGrid, MAX_GRID_POINTS};
pub use heat::{
    cauchy_kernel, gaussian_kernel, kernel_convolve, kernel_eval, kernel_eval_unchecked,
    spectral_multiplier, KernelCache, KernelEvaluation, KernelMethod, KernelSpec, DEFAULT_MASS_TOL,
};
pub use laplacian::{
    frac_laplacian_apply, frac_laplacian_constant, gaussian_frac_laplacian_at_origin, PvEstimate,
    PvQuad,
};
