use serde::{Deserialize, Serialize};

use super::field::FieldSample;
use crate::modulus::ModulusFunction;
use crate::stats::{linear_fit, mean, standard_error, LinearFit};
use crate::{exec, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentOptions {
    /// Approximate number of probe pairs, spread evenly over the levels.
    pub pair_budget: usize,
    pub slope_tol: f64,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self {
            pair_budget: 64,
            slope_tol: 0.1,
        }
    }
}

/// Monte Carlo moment at one separation, averaged over the probe pairs at
/// that separation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleMoment {
    pub separation: f64,
    pub pairs: usize,
    /// `Ê[max_t ‖X_t(x) − X_t(y)‖^γ]`.
    pub estimate: f64,
    pub std_error: f64,
    /// `|x − y|^d φ(|x − y|)`.
    pub reference: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub gamma: f64,
    pub n_rep: usize,
    pub scales: Vec<ScaleMoment>,
    /// Fit of `log Ê` against `log |x − y|`.
    pub fit_distance: Option<LinearFit>,
    /// Fit of `log Ê` against `log(|x − y|^d φ(|x − y|))`.
    pub fit_modulus: Option<LinearFit>,
    /// `exp(intercept)` of the modulus fit.
    pub c_hat: Option<f64>,
    pub worst_ratio: f64,
    pub slope_tol: f64,
    pub all_zero: bool,
    pub consistent: bool,
}

/// Per-scale estimates and the per-replication values behind them.
fn scale_moments(
    field: &FieldSample,
    gamma: f64,
    pair_budget: usize,
) -> Result<Vec<(f64, usize, Vec<f64>)>> {
    if field.n_rep() < 2 {
        return Err(Error::InsufficientReplications {
            required: 2,
            got: field.n_rep(),
        });
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let grid = field.grid();
    let m = field.m_max();
    let top = 1u64 << m;
    let per_level = (pair_budget / (m as usize + 1)).max(1);
    let mut scales: Vec<(f64, Vec<(usize, usize)>)> = Vec::new();
    for level in 0..=m {
        let step = 1u64 << (m - level);
        let room = top - step;
        let count = per_level.min(room as usize + 1);
        let mut pairs = Vec::with_capacity(count);
        for j in 0..count {
            let shift = if count == 1 {
                0
            } else {
                room * j as u64 / (count as u64 - 1)
            };
            let mut base = vec![0u64; field.d()];
            base[0] = shift;
            for (axis, b) in base.iter_mut().enumerate().skip(1) {
                *b = (top * (j as u64 + axis as u64) / (count as u64 + field.d() as u64)).min(top);
            }
            let mut other = base.clone();
            other[0] += step;
            pairs.push((grid.index_of(&base)?, grid.index_of(&other)?));
        }
        scales.push(((-(level as f64)).exp2(), pairs));
    }
    let n_time = field.n_time();
    // [rep][scale] -> mean over the scale's pairs of max_t ‖Δ‖^γ
    let per_rep = exec::map_indexed(field.n_rep(), |rep| {
        scales
            .iter()
            .map(|(_, pairs)| {
                let total: f64 = pairs
                    .iter()
                    .map(|&(a, b)| {
                        (0..n_time)
                            .map(|t| field.snapshot(rep, t).increment(a, b))
                            .fold(0.0, f64::max)
                            .powf(gamma)
                    })
                    .sum();
                total / pairs.len() as f64
            })
            .collect::<Vec<_>>()
    });
    Ok(scales
        .iter()
        .enumerate()
        .map(|(s, (sep, pairs))| (*sep, pairs.len(), per_rep.iter().map(|r| r[s]).collect()))
        .collect())
}

/// Estimates `Ê[sup_t ‖X_t(x) − X_t(y)‖^γ]` over probe pairs at every dyadic
/// separation and regresses it on `|x − y|^d φ(|x − y|)`. Consistent when
/// the fitted slope is at least `1 − slope_tol` and all ratios are finite.
pub fn moment_hypothesis_check(
    field: &FieldSample,
    gamma: f64,
    phi: &ModulusFunction,
    opts: &MomentOptions,
) -> Result<MomentReport> {
    let raw = scale_moments(field, gamma, opts.pair_budget)?;
    let d = field.d() as i32;
    let mut scales = Vec::with_capacity(raw.len());
    for (sep, pairs, values) in &raw {
        let reference = sep.powi(d) * phi.eval(*sep)?;
        let estimate = mean(values);
        scales.push(ScaleMoment {
            separation: *sep,
            pairs: *pairs,
            estimate,
            std_error: standard_error(values),
            reference,
            ratio: if estimate == 0.0 {
                0.0
            } else {
                estimate / reference
            },
        });
    }
    let all_zero = scales.iter().all(|s| s.estimate == 0.0);
    let worst_ratio = scales.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let usable: Vec<&ScaleMoment> = scales
        .iter()
        .filter(|s| s.estimate > 0.0 && s.reference > 0.0)
        .collect();
    let (fit_distance, fit_modulus) = if all_zero || usable.len() < 2 {
        (None, None)
    } else {
        let y: Vec<f64> = usable.iter().map(|s| s.estimate.ln()).collect();
        let xd: Vec<f64> = usable.iter().map(|s| s.separation.ln()).collect();
        let xm: Vec<f64> = usable.iter().map(|s| s.reference.ln()).collect();
        (Some(linear_fit(&xd, &y)?), linear_fit(&xm, &y).ok())
    };
    let consistent = if all_zero {
        true
    } else {
        worst_ratio.is_finite() && fit_modulus.is_some_and(|f| f.slope >= 1.0 - opts.slope_tol)
    };
    Ok(MomentReport {
        gamma,
        n_rep: field.n_rep(),
        c_hat: fit_modulus.map(|f| f.intercept.exp()),
        scales,
        fit_distance,
        fit_modulus,
        worst_ratio,
        slope_tol: opts.slope_tol,
        all_zero,
        consistent,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub epsilon_hat: f64,
    pub c_hat: f64,
    pub fit: LinearFit,
}

/// Fits `log Ê[sup_t ‖ΔX‖^γ] = log C + (d + ε) log |x − y|` over the dyadic
/// separations and returns `ε̂ = slope − d`.
pub fn holder_exponent_fit(
    field: &FieldSample,
    gamma: f64,
    opts: &MomentOptions,
) -> Result<HolderFit> {
    let raw = scale_moments(field, gamma, opts.pair_budget)?;
    let pts: Vec<(f64, f64)> = raw
        .iter()
        .map(|(sep, _, v)| (*sep, mean(v)))
        .filter(|&(_, e)| e > 0.0)
        .collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "need two separations with nonzero moments, got {}",
            pts.len()
        )));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let fit = linear_fit(&x, &y)?;
    Ok(HolderFit {
        epsilon_hat: fit.slope - field.d() as f64,
        c_hat: fit.intercept.exp(),
        fit,
    })
}
