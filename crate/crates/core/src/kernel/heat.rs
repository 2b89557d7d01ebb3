use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, RwLock};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::grid::{fft_nd, PeriodicGrid};
use crate::{Error, Result};

pub const DEFAULT_MASS_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethod {
    /// Gaussian at `α = 2`, Cauchy at `α = 1`.
    ClosedForm,
    #[default]
    SpectralInversion,
}

/// Heat kernel of `∂_t u = -(-Δ)^{α/2} u`, i.e. the inverse Fourier
/// transform of `e^{-t|ξ|^α}`, sampled on a periodic grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub alpha: f64,
    pub d: usize,
    #[serde(rename = "L")]
    pub extent: f64,
    pub n: usize,
    #[serde(default)]
    pub method: KernelMethod,
    #[serde(default = "default_mass_tol")]
    pub mass_tol: f64,
}

fn default_mass_tol() -> f64 {
    DEFAULT_MASS_TOL
}

impl KernelSpec {
    pub fn new(alpha: f64, d: usize, extent: f64, n: usize, method: KernelMethod) -> Self {
        Self {
            alpha,
            d,
            extent,
            n,
            method,
            mass_tol: DEFAULT_MASS_TOL,
        }
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.d, self.extent, self.n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, 2], got {}",
                self.alpha
            )));
        }
        if self.method == KernelMethod::ClosedForm && self.alpha != 1.0 && self.alpha != 2.0 {
            return Err(Error::invalid(
                "closed forms exist only for alpha = 1 and alpha = 2",
            ));
        }
        if !(self.mass_tol > 0.0) {
            return Err(Error::invalid("mass_tol must be positive"));
        }
        self.grid().map(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEvaluation {
    pub spec: KernelSpec,
    pub t: f64,
    pub values: Vec<f64>,
    pub mass: f64,
    /// Mass carried by points with some `|x_a| ≥ 3L/8`; a proxy for the
    /// periodisation error.
    pub boundary_mass: f64,
    pub min_value: f64,
    pub error_estimate: f64,
}

impl KernelEvaluation {
    /// CSV with columns `x0, …, value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let grid = self.spec.grid()?;
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..grid.d).map(|a| format!("x{a}")).collect();
        header.push("value".into());
        out.write_record(&header)?;
        for (i, v) in self.values.iter().enumerate() {
            let mut row: Vec<String> = grid.point(i).iter().map(|x| format!("{x:e}")).collect();
            row.push(format!("{v:e}"));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `(4πt)^{-d/2} e^{-|x|²/(4t)}`.
pub fn gaussian_kernel(t: f64, x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (4.0 * std::f64::consts::PI * t).powf(-0.5 * d) * (-r2 / (4.0 * t)).exp()
}

/// `Γ((d+1)/2) π^{-(d+1)/2} t / (t² + |x|²)^{(d+1)/2}`.
pub fn cauchy_kernel(t: f64, x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let c = gamma(0.5 * (d + 1.0)) / std::f64::consts::PI.powf(0.5 * (d + 1.0));
    c * t / (t * t + r2).powf(0.5 * (d + 1.0))
}

/// `e^{-t|ξ|^α}` per FFT bin.
pub fn spectral_multiplier(grid: &PeriodicGrid, alpha: f64, t: f64) -> Vec<f64> {
    grid.frequency_norms()
        .into_iter()
        .map(|k| {
            if k == 0.0 {
                1.0
            } else {
                (-t * k.powf(alpha)).exp()
            }
        })
        .collect()
}

/// Evaluates the kernel without enforcing the mass tolerance.
pub fn kernel_eval_unchecked(spec: &KernelSpec, t: f64) -> Result<KernelEvaluation> {
    spec.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("t must be positive, got {t}")));
    }
    let grid = spec.grid()?;
    let (values, truncation): (Vec<f64>, f64) = match spec.method {
        KernelMethod::ClosedForm => {
            let f = if spec.alpha == 2.0 {
                gaussian_kernel
            } else {
                cauchy_kernel
            };
            ((0..grid.len()).map(|i| f(t, &grid.point(i))).collect(), 0.0)
        }
        KernelMethod::SpectralInversion => {
            let mult = spectral_multiplier(&grid, spec.alpha, t);
            let signs = grid.shift_signs();
            let mut data: Vec<Complex64> = mult
                .iter()
                .zip(&signs)
                .map(|(m, s)| Complex64::new(m * s, 0.0))
                .collect();
            fft_nd(&mut data, grid.n, grid.d, true);
            let scale = spec.extent.powi(-(grid.d as i32));
            let nyquist = std::f64::consts::PI * grid.n as f64 / spec.extent;
            (
                data.into_iter().map(|c| c.re * scale).collect(),
                (-t * nyquist.powf(spec.alpha)).exp(),
            )
        }
    };
    let (mass, boundary_mass) = grid.masses(&values);
    let min_value = values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(KernelEvaluation {
        spec: *spec,
        t,
        values,
        mass,
        boundary_mass,
        min_value,
        error_estimate: boundary_mass + truncation,
    })
}

/// Evaluates the kernel and fails with `MassDeficit` when the grid is too
/// small for it: `|mass − 1|` or the boundary mass above `mass_tol`.
pub fn kernel_eval(spec: &KernelSpec, t: f64) -> Result<KernelEvaluation> {
    let e = kernel_eval_unchecked(spec, t)?;
    if (e.mass - 1.0).abs() > spec.mass_tol || e.boundary_mass > spec.mass_tol {
        return Err(Error::MassDeficit {
            mass: e.mass,
            boundary_mass: e.boundary_mass,
            tolerance: spec.mass_tol,
        });
    }
    Ok(e)
}

/// Circular convolution `(K ∗ g)(x_j) = h^d Σ_i K(x_i) g(x_j − x_i)` via FFT.
pub fn kernel_convolve(eval: &KernelEvaluation, g: &[f64]) -> Result<Vec<f64>> {
    let grid = eval.spec.grid()?;
    if g.len() != grid.len() || eval.values.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "function has {} values, grid has {}",
            g.len(),
            grid.len()
        )));
    }
    let to_complex =
        |v: &[f64]| -> Vec<Complex64> { v.iter().map(|&x| Complex64::new(x, 0.0)).collect() };
    let mut a = to_complex(&eval.values);
    let mut b = to_complex(g);
    fft_nd(&mut a, grid.n, grid.d, false);
    fft_nd(&mut b, grid.n, grid.d, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    fft_nd(&mut a, grid.n, grid.d, true);
    let scale = grid.cell() / grid.len() as f64;
    // Centered grids: x_j − x_i sits at index j − i + n/2.
    let half = grid.n / 2;
    let mut out = vec![0.0; grid.len()];
    for (j, slot) in out.iter_mut().enumerate() {
        let src = grid
            .multi_index(j)
            .into_iter()
            .fold(0usize, |acc, k| acc * grid.n + (k + half) % grid.n);
        *slot = a[src].re * scale;
    }
    Ok(out)
}

/// Read-mostly cache of spectral multipliers `e^{-τ|ξ|^α}` keyed by `τ`.
#[derive(Debug)]
pub struct KernelCache {
    grid: PeriodicGrid,
    alpha: f64,
    norms_alpha: Vec<f64>,
    entries: RwLock<HashMap<u64, Arc<Vec<f64>>>>,
}

impl KernelCache {
    pub fn new(grid: PeriodicGrid, alpha: f64) -> Self {
        let norms_alpha = grid
            .frequency_norms()
            .into_iter()
            .map(|k| k.powf(alpha))
            .collect();
        Self {
            grid,
            alpha,
            norms_alpha,
            entries: RwLock::new(HashMap::new()),
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `|ξ|^α` per bin.
    pub fn symbol(&self) -> &[f64] {
        &self.norms_alpha
    }

    pub fn multiplier(&self, tau: f64) -> Arc<Vec<f64>> {
        let key = tau.to_bits();
        if let Some(m) = self
            .entries
            .read()
            .expect("kernel cache poisoned")
            .get(&key)
        {
            return m.clone();
        }
        let m: Arc<Vec<f64>> =
            Arc::new(self.norms_alpha.iter().map(|s| (-tau * s).exp()).collect());
        self.entries
            .write()
            .expect("kernel cache poisoned")
            .entry(key)
            .or_insert(m)
            .clone()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("kernel cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
