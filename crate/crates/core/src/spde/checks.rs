use serde::{Deserialize, Serialize};

use super::forcing::Forcing;
use super::solver::{Ensemble, MildSolutionPath};
use crate::kernel::{kernel_convolve, kernel_eval, KernelSpec, PeriodicGrid};
use crate::levy::{
    assemble, linfty_moment_check, InequalityKind, InequalityReport, Integrand, SpaceProfile,
    MIN_REPLICATIONS,
};
use crate::modulus::{admissibility, AdmissibilityOptions, ModulusFunction, ModulusSpec, Outcome};
use crate::stats::{linear_fit, mean, standard_error, LinearFit};
use crate::{Error, Result};

/// Largest number of point pairs a seminorm level may hold.
pub const MAX_SEMINORM_PAIRS: usize = 1 << 22;

fn require_replications(ens: &Ensemble) -> Result<()> {
    if ens.n_rep < MIN_REPLICATIONS {
        return Err(Error::InsufficientReplications {
            required: MIN_REPLICATIONS,
            got: ens.n_rep,
        });
    }
    Ok(())
}

/// Flat index of the grid point `center + offset · e_0`.
fn axis_index(grid: &PeriodicGrid, offset: isize) -> usize {
    let half = grid.n / 2;
    let k0 = (half as isize + offset) as usize;
    let rest: usize = (1..grid.d).fold(0, |acc, _| acc * grid.n + half);
    k0 * grid.n.pow(grid.d as u32 - 1) + rest
}

/// Lattice points of stride `stride` (in grid steps) inside `|x| ≤ c1`.
fn ball_lattice(grid: &PeriodicGrid, c1: f64, stride: usize) -> Vec<usize> {
    let h = grid.step();
    let reach = (c1 / h + 1e-9).floor() as isize / stride as isize;
    let half = grid.n as isize / 2;
    let mut out = Vec::new();
    let mut idx = vec![-reach; grid.d];
    loop {
        let r2: f64 = idx
            .iter()
            .map(|&k| (k as f64 * stride as f64 * h).powi(2))
            .sum();
        if r2.sqrt() <= c1 + 1e-12 * c1 {
            let flat = idx.iter().fold(0usize, |acc, &k| {
                acc * grid.n + (half + k * stride as isize) as usize
            });
            out.push(flat);
        }
        let mut a = grid.d;
        loop {
            if a == 0 {
                return out;
            }
            a -= 1;
            if idx[a] < reach {
                idx[a] += 1;
                break;
            }
            idx[a] = -reach;
        }
    }
}

fn distance(grid: &PeriodicGrid, a: usize, b: usize) -> f64 {
    let (pa, pb) = (grid.point(a), grid.point(b));
    pa.iter()
        .zip(&pb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn sup_increment(path: &MildSolutionPath, a: usize, b: usize) -> f64 {
    path.values
        .iter()
        .map(|u| (u[a] - u[b]).abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModulusCheckOptions {
    /// Pairs per separation.
    pub pair_budget: usize,
    pub slope_tol: f64,
    /// Probe ball radius.
    pub c1: f64,
}

impl Default for ModulusCheckOptions {
    fn default() -> Self {
        Self {
            pair_budget: 16,
            slope_tol: 0.15,
            c1: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationEstimate {
    pub separation: f64,
    pub pairs: usize,
    /// `Ê[sup_t |u(t,x) − u(t,y)|^p]`, averaged over the pairs.
    pub estimate: f64,
    pub std_error: f64,
    /// `|x−y|^d φ(|x−y|)`.
    pub reference: f64,
    pub ratio: f64,
    pub worst_pair_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusEstimateReport {
    pub p: f64,
    pub modulus: Option<ModulusSpec>,
    pub scales: Vec<SeparationEstimate>,
    /// `log Ê` against `log |x−y|`.
    pub fit_distance: Option<LinearFit>,
    /// `log Ê` against `log (|x−y|^d φ(|x−y|))`.
    pub fit_reference: Option<LinearFit>,
    pub worst_ratio: f64,
    pub slope_tol: f64,
    pub all_zero: bool,
    pub consistent: bool,
    pub n_rep: usize,
    pub seed: u64,
}

/// Moment bound for spatial increments of the mild solution, probed along
/// `e_0` through the origin at separations `h, 2h, 4h, … ≤ c1`.
pub fn modulus_estimate_check(
    ens: &Ensemble,
    p: f64,
    phi: &ModulusFunction,
    opts: &ModulusCheckOptions,
) -> Result<ModulusEstimateReport> {
    require_replications(ens)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("p must be at least 1, got {p}")));
    }
    let grid = *ens.solver.grid();
    if !(opts.c1 > 0.0 && opts.c1 < 0.5 * grid.extent) || opts.pair_budget == 0 {
        return Err(Error::invalid(
            "probe ball must fit in the torus and pair_budget must be positive",
        ));
    }
    let h = grid.step();
    let reach = (opts.c1 / h + 1e-9).floor() as isize;
    let mut seps: Vec<(f64, Vec<(usize, usize)>)> = Vec::new();
    let mut stride = 1isize;
    while stride <= reach {
        let starts: Vec<isize> = (-reach..=reach - stride).collect();
        let take = opts.pair_budget.min(starts.len());
        let pairs = (0..take)
            .map(|k| {
                let s = starts[k * (starts.len() - 1) / (take - 1).max(1)];
                (axis_index(&grid, s), axis_index(&grid, s + stride))
            })
            .collect();
        seps.push((stride as f64 * h, pairs));
        stride *= 2;
    }
    if seps.is_empty() {
        return Err(Error::invalid("probe ball is smaller than one grid step"));
    }
    let per_rep: Vec<Vec<Vec<f64>>> = ens.map(|path| {
        Ok(seps
            .iter()
            .map(|(_, pairs)| {
                pairs
                    .iter()
                    .map(|&(a, b)| sup_increment(path, a, b).powf(p))
                    .collect()
            })
            .collect())
    })?;
    let d = grid.d as f64;
    let mut scales = Vec::with_capacity(seps.len());
    for (k, (sep, pairs)) in seps.iter().enumerate() {
        let rep_means: Vec<f64> = per_rep.iter().map(|r| mean(&r[k])).collect();
        let estimate = mean(&rep_means);
        let reference = sep.powf(d) * phi.eval(*sep)?;
        let worst_pair = (0..pairs.len())
            .map(|j| mean(&per_rep.iter().map(|r| r[k][j]).collect::<Vec<_>>()))
            .fold(0.0, f64::max);
        scales.push(SeparationEstimate {
            separation: *sep,
            pairs: pairs.len(),
            estimate,
            std_error: standard_error(&rep_means),
            reference,
            ratio: estimate / reference,
            worst_pair_ratio: worst_pair / reference,
        });
    }
    let all_zero = scales.iter().all(|s| s.estimate == 0.0);
    let usable: Vec<&SeparationEstimate> = scales.iter().filter(|s| s.estimate > 0.0).collect();
    let (fit_distance, fit_reference) = if usable.len() >= 2 {
        let y: Vec<f64> = usable.iter().map(|s| s.estimate.ln()).collect();
        let xd: Vec<f64> = usable.iter().map(|s| s.separation.ln()).collect();
        let xr: Vec<f64> = usable.iter().map(|s| s.reference.ln()).collect();
        (linear_fit(&xd, &y).ok(), linear_fit(&xr, &y).ok())
    } else {
        (None, None)
    };
    let worst_ratio = scales
        .iter()
        .map(|s| s.worst_pair_ratio)
        .fold(0.0, f64::max);
    let consistent = all_zero
        || fit_reference
            .as_ref()
            .is_some_and(|f| f.slope >= 1.0 - opts.slope_tol && worst_ratio.is_finite());
    Ok(ModulusEstimateReport {
        p,
        modulus: phi.to_spec(),
        scales,
        fit_distance,
        fit_reference,
        worst_ratio,
        slope_tol: opts.slope_tol,
        all_zero,
        consistent,
        n_rep: ens.n_rep,
        seed: ens.seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HolderCheckOptions {
    /// Dyadic levels; level `m` uses lattice stride `2^{m_max − m}` grid steps.
    pub levels: Vec<u32>,
    pub c1: f64,
    /// Largest tolerated relative increase between consecutive levels.
    pub growth_tol: f64,
}

impl Default for HolderCheckOptions {
    fn default() -> Self {
        Self {
            levels: vec![4, 5, 6],
            c1: 1.0,
            growth_tol: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSeminorm {
    pub level: u32,
    pub spacing: f64,
    pub points: usize,
    pub pairs: usize,
    /// `Ê[sup_t sup_{x≠y} |u(t,x) − u(t,y)|^p / φ^{βp}(|x−y|)]`.
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub p: f64,
    pub theta: f64,
    pub beta: f64,
    pub modulus: Option<ModulusSpec>,
    pub admissibility: Outcome,
    pub levels: Vec<LevelSeminorm>,
    /// Largest `est_{m+1}/est_m − 1`.
    pub max_increase: f64,
    pub growth_tol: f64,
    pub stable: bool,
    pub n_rep: usize,
    pub seed: u64,
}

/// Level, spacing, point count and `(a, b, |a − b|)` pairs.
type Lattice = (u32, f64, usize, Vec<(usize, usize, f64)>);

/// Hölder-type seminorm of the mild solution over nested lattices of the
/// probe ball; finiteness shows up as no growth with the level.
pub fn holder_conclusion_check(
    ens: &Ensemble,
    p: f64,
    phi: &ModulusFunction,
    theta: f64,
    beta: f64,
    opts: &HolderCheckOptions,
) -> Result<HolderReport> {
    require_replications(ens)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("p must be at least 1, got {p}")));
    }
    let adm = admissibility(phi, p, theta, &AdmissibilityOptions::default())?;
    if !(beta > 0.0 && beta <= 1.0 / p - theta + 1e-15) {
        return Err(Error::invalid(format!(
            "beta must lie in (0, 1/p - theta] = (0, {}], got {beta}",
            1.0 / p - theta
        )));
    }
    let grid = *ens.solver.grid();
    if !(opts.c1 > 0.0 && opts.c1 < 0.5 * grid.extent) {
        return Err(Error::invalid("probe ball must fit in the torus"));
    }
    let mut levels = opts.levels.clone();
    levels.sort_unstable();
    levels.dedup();
    let top = *levels
        .last()
        .ok_or_else(|| Error::invalid("no levels given"))?;
    let mut lattices: Vec<Lattice> = Vec::new();
    for &m in &levels {
        let stride = 1usize << (top - m);
        let pts = ball_lattice(&grid, opts.c1, stride);
        let n_pairs = pts.len() * pts.len().saturating_sub(1) / 2;
        if n_pairs > MAX_SEMINORM_PAIRS {
            return Err(Error::BudgetExceeded {
                requested: n_pairs as u128,
                budget: MAX_SEMINORM_PAIRS as u128,
            });
        }
        let mut pairs = Vec::with_capacity(n_pairs);
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let dist = distance(&grid, pts[i], pts[j]);
                pairs.push((pts[i], pts[j], phi.eval(dist)?.powf(-beta * p)));
            }
        }
        lattices.push((m, stride as f64 * grid.step(), pts.len(), pairs));
    }
    let per_rep: Vec<Vec<f64>> = ens.map(|path| {
        Ok(lattices
            .iter()
            .map(|(_, _, _, pairs)| {
                path.values
                    .iter()
                    .map(|u| {
                        pairs
                            .iter()
                            .map(|&(a, b, w)| (u[a] - u[b]).abs().powf(p) * w)
                            .fold(0.0, f64::max)
                    })
                    .fold(0.0, f64::max)
            })
            .collect())
    })?;
    let level_reports: Vec<LevelSeminorm> = lattices
        .iter()
        .enumerate()
        .map(|(k, (m, spacing, points, pairs))| {
            let xs: Vec<f64> = per_rep.iter().map(|r| r[k]).collect();
            LevelSeminorm {
                level: *m,
                spacing: *spacing,
                points: *points,
                pairs: pairs.len(),
                estimate: mean(&xs),
                std_error: standard_error(&xs),
            }
        })
        .collect();
    let max_increase = level_reports
        .windows(2)
        .map(|w| {
            if w[0].estimate == 0.0 {
                if w[1].estimate == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                w[1].estimate / w[0].estimate - 1.0
            }
        })
        .fold(0.0, f64::max);
    Ok(HolderReport {
        p,
        theta,
        beta,
        modulus: phi.to_spec(),
        admissibility: adm.outcome,
        levels: level_reports,
        max_increase,
        growth_tol: opts.growth_tol,
        stable: max_increase < opts.growth_tol,
        n_rep: ens.n_rep,
        seed: ens.seed,
    })
}

/// `Ê[sup_t max_x |u(t,x)|]` against `∫_0^T ∫_E ‖g(r,v,·)‖_∞ ν(dv) dr`, the
/// sup over the whole grid.
pub fn sup_bound_check(ens: &Ensemble) -> Result<InequalityReport> {
    require_replications(ens)?;
    let grid = ens.solver.grid();
    let rhs = ens
        .solver
        .forcing()
        .sup_intensity(ens.solver.levy(), &grid.points())?;
    let samples = ens.map(|path| {
        Ok(path
            .values
            .iter()
            .map(|u| u.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .fold(0.0, f64::max))
    })?;
    Ok(assemble(
        InequalityKind::SupNorm,
        1.0,
        &samples,
        vec![rhs],
        ens.seed,
    ))
}

/// The sup-over-space moment inequality for the compensated integral of a
/// separable forcing, with the sup over the grid.
pub fn forcing_linfty_check(ens: &Ensemble, p: f64) -> Result<InequalityReport> {
    match ens.solver.forcing() {
        Forcing::Separable { time, mark, space } => {
            let psi = Integrand::Separable {
                time: *time,
                mark: *mark,
            };
            linfty_moment_check(
                &psi,
                space,
                &ens.solver.grid().points(),
                ens.solver.levy(),
                p,
                ens.n_rep,
                ens.seed,
            )
        }
        Forcing::Zero => linfty_moment_check(
            &Integrand::constant(0.0),
            &SpaceProfile::Constant(0.0),
            &ens.solver.grid().points(),
            ens.solver.levy(),
            p,
            ens.n_rep,
            ens.seed,
        ),
        _ => Err(Error::invalid(
            "the sup-over-space moment check needs a separable forcing",
        )),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCase {
    pub r: f64,
    pub v: Vec<f64>,
    /// Kernel time `t − r`; zero checks the certificate of `g` itself.
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaProbes {
    pub cases: Vec<LemmaCase>,
    pub c1: f64,
}

impl LemmaProbes {
    /// Every combination of the given `r`, `v` and `τ`.
    pub fn product(rs: &[f64], vs: &[Vec<f64>], taus: &[f64], c1: f64) -> Self {
        let mut cases = Vec::new();
        for &r in rs {
            for v in vs {
                for &tau in taus {
                    cases.push(LemmaCase {
                        r,
                        v: v.clone(),
                        tau,
                    });
                }
            }
        }
        Self { cases, c1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaWitness {
    pub r: f64,
    pub v: Vec<f64>,
    pub tau: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub checked: usize,
    pub violations: usize,
    pub max_ratio: f64,
    /// The worst violation, if any.
    pub witness: Option<LemmaWitness>,
    pub passed: bool,
}

/// Checks that convolving with the kernel keeps the spatial certificate:
/// `|K(τ) ∗ g(r,·,v)(x) − K(τ) ∗ g(r,·,v)(y)| ≤ h(r,v)|x−y|^{d/p}φ^{1/p}(|x−y|)(1 + mass_tol)`
/// on all pairs of the probe ball at separations `h, 2h, 4h, …` along every axis.
pub fn convolution_modulus_lemma(
    forcing: &Forcing,
    kernel: &KernelSpec,
    probes: &LemmaProbes,
) -> Result<LemmaReport> {
    kernel.validate()?;
    let grid = kernel.grid()?;
    let cert = forcing
        .certificate(grid.d)
        .ok_or_else(|| Error::invalid("forcing has no spatial modulus certificate"))?;
    let pts = ball_lattice(&grid, probes.c1, 1);
    let in_ball: std::collections::HashSet<usize> = pts.iter().copied().collect();
    let h = grid.step();
    let mut pairs = Vec::new();
    for &a in &pts {
        for axis in 0..grid.d {
            let stride = grid.n.pow((grid.d - 1 - axis) as u32);
            let mut k = 1usize;
            while (k as f64) * h <= 2.0 * probes.c1 {
                let b = a + k * stride;
                if b < grid.len()
                    && in_ball.contains(&b)
                    && grid.multi_index(b)[axis] > grid.multi_index(a)[axis]
                {
                    pairs.push((a, b, k as f64 * h));
                }
                k *= 2;
            }
        }
    }
    let mut report = LemmaReport {
        checked: 0,
        violations: 0,
        max_ratio: 0.0,
        witness: None,
        passed: true,
    };
    let mut worst_violation = 0.0;
    for case in &probes.cases {
        let g: Vec<f64> = (0..grid.len())
            .map(|i| forcing.eval(case.r, &case.v, &grid.point(i)))
            .collect();
        let w = if case.tau > 0.0 {
            kernel_convolve(&kernel_eval(kernel, case.tau)?, &g)?
        } else {
            g
        };
        let hv = (cert.h)(case.r, &case.v);
        for &(a, b, dist) in &pairs {
            let lhs = (w[a] - w[b]).abs();
            let rhs = hv * cert.spatial_factor(grid.d, dist)? * (1.0 + kernel.mass_tol);
            report.checked += 1;
            let ratio = if rhs > 0.0 {
                lhs / rhs
            } else if lhs > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            report.max_ratio = report.max_ratio.max(ratio);
            if lhs > rhs + 1e-12 * (1.0 + hv) {
                report.violations += 1;
                if ratio > worst_violation || report.witness.is_none() {
                    worst_violation = ratio;
                    report.witness = Some(LemmaWitness {
                        r: case.r,
                        v: case.v.clone(),
                        tau: case.tau,
                        x: grid.point(a),
                        y: grid.point(b),
                        lhs,
                        rhs,
                    });
                }
            }
        }
    }
    report.passed = report.violations == 0;
    Ok(report)
}
