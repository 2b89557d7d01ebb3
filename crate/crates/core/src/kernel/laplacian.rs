use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

/// `c(d, α) = α 2^{α−1} π^{−d/2} Γ((d+α)/2) / Γ((2−α)/2)`.
pub fn frac_laplacian_constant(d: usize, alpha: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("d must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::DomainError(format!(
            "c(d, alpha) needs alpha in (0, 2), got {alpha}"
        )));
    }
    let d = d as f64;
    Ok(alpha
        * 2f64.powf(alpha - 1.0)
        * std::f64::consts::PI.powf(-0.5 * d)
        * gamma(0.5 * (d + alpha))
        / gamma(0.5 * (2.0 - alpha)))
}

/// Principal-value quadrature settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvQuad {
    /// Split radius between the inner (symmetrised) and outer regions.
    pub delta: f64,
    /// Outer cutoff `R`; the spherical average is held constant beyond it.
    pub cutoff: f64,
    /// Number of halvings of `δ` covered by inner panels.
    pub inner_panels: usize,
    /// Gauss–Legendre order per radial panel; `order/2` gives the error estimate.
    pub order: usize,
    /// Gauss–Legendre order per angular coordinate (`d ≥ 2`).
    pub angular_order: usize,
    pub tol: f64,
}

impl Default for PvQuad {
    fn default() -> Self {
        Self {
            delta: 0.1,
            cutoff: 1e3,
            inner_panels: 12,
            order: 32,
            angular_order: 64,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvEstimate {
    pub value: f64,
    pub error_estimate: f64,
}

struct Sphere {
    dirs: Vec<(Vec<f64>, f64)>,
}

impl Sphere {
    /// Half-sphere directions with weights; `A(r)` then sums the symmetric
    /// second difference over them.
    fn new(d: usize, order: usize) -> Result<Self> {
        let gl = GaussLegendre::get(order);
        let dirs = match d {
            1 => vec![(vec![1.0], 1.0)],
            2 => gl
                .mapped(0.0, std::f64::consts::PI)
                .map(|(t, w)| (vec![t.cos(), t.sin()], w))
                .collect(),
            3 => {
                let mut dirs = Vec::with_capacity(order * order);
                for (th, wt) in gl.mapped(0.0, std::f64::consts::FRAC_PI_2) {
                    for (ph, wp) in gl.mapped(0.0, std::f64::consts::TAU) {
                        dirs.push((
                            vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()],
                            wt * wp * th.sin(),
                        ));
                    }
                }
                dirs
            }
            _ => {
                return Err(Error::invalid(format!(
                    "frac_laplacian_apply supports d in 1..=3, got {d}"
                )))
            }
        };
        Ok(Self { dirs })
    }

    /// `∫_{S^{d−1}} (φ(x) − φ(x + rθ)) dθ`, symmetrised.
    fn average(&self, phi: &dyn Fn(&[f64]) -> f64, x: &[f64], r: f64) -> f64 {
        let center = phi(x);
        let mut p = vec![0.0; x.len()];
        let mut m = vec![0.0; x.len()];
        let mut acc = 0.0;
        for (dir, w) in &self.dirs {
            for a in 0..x.len() {
                p[a] = x[a] + r * dir[a];
                m[a] = x[a] - r * dir[a];
            }
            acc += w * (2.0 * center - phi(&p) - phi(&m));
        }
        acc
    }
}

/// `(−Δ)^{α/2} φ(x) = c(d,α) P.V.∫ (φ(x) − φ(x+z)) / |z|^{d+α} dz`; the
/// generator of the heat semigroup is its negative.
///
/// In polar coordinates the integrand is `r^{−1−α} A(r)` with `A` even and
/// `O(r²)`. Inner panels halve down from `δ`; below the last one `A` is
/// extrapolated as `a₂r² + a₄r⁴`. Outer panels double up to `R`; beyond it
/// `A` is frozen at `A(R)`, which is `|S^{d−1}| φ(x)` once `φ` has decayed.
pub fn frac_laplacian_apply(
    phi: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    alpha: f64,
    quad: &PvQuad,
) -> Result<PvEstimate> {
    let d = x.len();
    let c = frac_laplacian_constant(d, alpha)?;
    if !(quad.delta > 0.0
        && quad.cutoff > quad.delta
        && quad.cutoff.is_finite()
        && quad.order >= 4
        && quad.tol > 0.0)
    {
        return Err(Error::invalid(
            "pv quadrature needs 0 < delta < cutoff, order >= 4, tol > 0",
        ));
    }
    let sphere = Sphere::new(d, quad.angular_order)?;
    let fine = GaussLegendre::get(quad.order);
    let coarse = GaussLegendre::get((quad.order / 2).max(2));
    let integrand = |r: f64| sphere.average(phi, x, r) * r.powf(-1.0 - alpha);

    let mut panels = Vec::new();
    let mut hi = quad.delta;
    for _ in 0..quad.inner_panels {
        panels.push((0.5 * hi, hi));
        hi *= 0.5;
    }
    let r_min = hi;
    let mut lo = quad.delta;
    while lo < quad.cutoff {
        let next = (2.0 * lo).min(quad.cutoff);
        panels.push((lo, next));
        lo = next;
    }

    let mut total = 0.0;
    let mut err = 0.0;
    for &(a, b) in &panels {
        let f = fine.integrate(a, b, &integrand);
        let g = coarse.integrate(a, b, &integrand);
        total += f;
        err += (f - g).abs();
    }

    let a1 = sphere.average(phi, x, r_min);
    let a2 = sphere.average(phi, x, 2.0 * r_min);
    let s1 = r_min * r_min;
    // A(r) ≈ c2 r² + c4 r⁴ through the two samples.
    let c4 = (a2 - 4.0 * a1) / (12.0 * s1 * s1);
    let c2 = a1 / s1 - c4 * s1;
    let head =
        c2 * r_min.powf(2.0 - alpha) / (2.0 - alpha) + c4 * r_min.powf(4.0 - alpha) / (4.0 - alpha);
    total += head;
    err += (c4 * r_min.powf(4.0 - alpha) / (4.0 - alpha)).abs();

    let far = sphere.average(phi, x, quad.cutoff);
    total += far * quad.cutoff.powf(-alpha) / alpha;

    let value = c * total;
    let error_estimate = c * err;
    if !value.is_finite() || !error_estimate.is_finite() {
        return Err(Error::NonFiniteResult(
            "fractional Laplacian quadrature".into(),
        ));
    }
    if error_estimate > quad.tol * (1.0 + value.abs()) {
        return Err(Error::QuadratureFailure(format!(
            "pv quadrature error {error_estimate:e} exceeds tolerance {:e}",
            quad.tol
        )));
    }
    Ok(PvEstimate {
        value,
        error_estimate,
    })
}

/// `(−Δ)^{α/2} e^{−|x|²/2}` at the origin: `2^{α/2} Γ((d+α)/2) / Γ(d/2)`.
pub fn gaussian_frac_laplacian_at_origin(d: usize, alpha: f64) -> f64 {
    let d = d as f64;
    2f64.powf(0.5 * alpha) * gamma(0.5 * (d + alpha)) / gamma(0.5 * d)
}
