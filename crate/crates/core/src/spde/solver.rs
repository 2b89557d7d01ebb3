use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, RwLock};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::forcing::{Forcing, ForcingFn};
use crate::kernel::{fft_nd, kernel_eval, KernelCache, KernelSpec, PeriodicGrid};
use crate::levy::{sample_prm_seeded, LevyConfig, MarkFactor, PoissonMeasureSample, TimeFactor};
use crate::quadrature::GaussLegendre;
use crate::{exec, Error, Result};

/// Time quadrature for `∫_0^t K(t−r) ∗ E_ν g(r, ·, v) dr`, in the variable
/// `s = √(t−r)` with panels halving towards both ends of `[0, √t]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompensatorQuad {
    pub panels: usize,
    pub order: usize,
    /// Mark nodes for custom forcings.
    pub mark_points: usize,
    pub tol: f64,
}

impl Default for CompensatorQuad {
    fn default() -> Self {
        Self {
            panels: 14,
            order: 16,
            mark_points: 16,
            tol: 1e-7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub quad: CompensatorQuad,
    /// Reject kernels whose torus is too short at the horizon.
    pub check_mass: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            quad: CompensatorQuad::default(),
            check_mass: true,
        }
    }
}

enum Term {
    Separable {
        weight: f64,
        time: TimeFactor,
        mark: MarkFactor,
        s_hat: Vec<Complex64>,
        /// `weight · ν(E) · E[mark]`.
        mean: f64,
    },
    Custom {
        weight: f64,
        g: ForcingFn,
    },
}

fn flatten(
    forcing: &Forcing,
    weight: f64,
    grid: &PeriodicGrid,
    cfg: &LevyConfig,
    out: &mut Vec<Term>,
) -> Result<()> {
    match forcing {
        Forcing::Zero => {}
        Forcing::Separable { time, mark, space } => {
            let mut s_hat: Vec<Complex64> = (0..grid.len())
                .map(|i| Complex64::new(space.eval(&grid.point(i)), 0.0))
                .collect();
            fft_nd(&mut s_hat, grid.n, grid.d, false);
            out.push(Term::Separable {
                weight,
                time: *time,
                mark: *mark,
                s_hat,
                mean: weight * cfg.nu.total_mass * mark.mean(cfg)?,
            });
        }
        Forcing::Combination(terms) => {
            for (w, g) in terms {
                flatten(g, weight * w, grid, cfg, out)?;
            }
        }
        Forcing::Custom { g, .. } => out.push(Term::Custom {
            weight,
            g: g.clone(),
        }),
    }
    Ok(())
}

/// One replication of the mild solution on the full periodic grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MildSolutionPath {
    pub replication: u64,
    pub times: Vec<f64>,
    /// `true` marks the left limit `u(t−, ·)` at an atom time.
    pub left_limit: Vec<bool>,
    pub values: Vec<Vec<f64>>,
    pub jump_part: Vec<Vec<f64>>,
    pub compensator_part: Vec<Vec<f64>>,
    pub quadrature_error: f64,
}

impl MildSolutionPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the value at exactly `t` (right-continuous version).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        (0..self.times.len()).find(|&i| self.times[i] == t && !self.left_limit[i])
    }
}

/// Tabulated compensator values and their quadrature error.
type CompensatorTable = (Vec<f64>, f64);

/// Spectral solver for
/// `u(t) = Σ_{t_j ≤ t} K(t−t_j) ∗ g(t_j, ·, v_j) − ∫_0^t ∫_E K(t−r) ∗ g(r, ·, v) ν(dv) dr`
/// on a periodic grid, with `K(0) ∗ g = g`.
pub struct MildSolver {
    kernel: KernelSpec,
    grid: PeriodicGrid,
    cache: KernelCache,
    levy: LevyConfig,
    forcing: Forcing,
    opts: SolverOptions,
    terms: Vec<Term>,
    compensators: RwLock<HashMap<u64, Arc<CompensatorTable>>>,
}

impl std::fmt::Debug for MildSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MildSolver")
            .field("kernel", &self.kernel)
            .field("levy", &self.levy)
            .field("forcing", &self.forcing)
            .finish()
    }
}

impl MildSolver {
    pub fn new(
        kernel: KernelSpec,
        levy: LevyConfig,
        forcing: Forcing,
        opts: SolverOptions,
    ) -> Result<Self> {
        kernel.validate()?;
        levy.validate()?;
        if opts.check_mass {
            kernel_eval(&kernel, levy.horizon)?;
        }
        let q = opts.quad;
        if q.order < 4 || q.mark_points == 0 || !(q.tol > 0.0) {
            return Err(Error::invalid(
                "compensator quadrature needs order >= 4, mark_points > 0, tol > 0",
            ));
        }
        let grid = kernel.grid()?;
        let mut terms = Vec::new();
        flatten(&forcing, 1.0, &grid, &levy, &mut terms)?;
        if terms.iter().any(|t| matches!(t, Term::Custom { .. }))
            && levy.mark_rule(q.mark_points).is_none()
        {
            return Err(Error::invalid(
                "custom forcing compensators need a one-dimensional mark law",
            ));
        }
        Ok(Self {
            cache: KernelCache::new(grid, kernel.alpha),
            kernel,
            grid,
            levy,
            forcing,
            opts,
            terms,
            compensators: RwLock::new(HashMap::new()),
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn levy(&self) -> &LevyConfig {
        &self.levy
    }

    pub fn forcing(&self) -> &Forcing {
        &self.forcing
    }

    fn to_physical(&self, mut hat: Vec<Complex64>) -> Vec<f64> {
        fft_nd(&mut hat, self.grid.n, self.grid.d, true);
        let scale = 1.0 / self.grid.len() as f64;
        hat.into_iter().map(|c| c.re * scale).collect()
    }

    fn custom_hat(&self, g: &ForcingFn, t: f64, v: &[f64]) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = (0..self.grid.len())
            .map(|i| Complex64::new(g(t, v, &self.grid.point(i)), 0.0))
            .collect();
        fft_nd(&mut out, self.grid.n, self.grid.d, false);
        out
    }

    /// `ĝ(t, ·, v)`.
    fn forcing_hat(&self, t: f64, v: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for term in &self.terms {
            match term {
                Term::Separable {
                    weight,
                    time,
                    mark,
                    s_hat,
                    ..
                } => {
                    let c = weight * time.eval(t) * mark.eval(v);
                    if c != 0.0 {
                        for (o, s) in out.iter_mut().zip(s_hat) {
                            *o += s * c;
                        }
                    }
                }
                Term::Custom { weight, g } => {
                    for (o, s) in out.iter_mut().zip(self.custom_hat(g, t, v)) {
                        *o += s * *weight;
                    }
                }
            }
        }
        out
    }

    /// Runs `f(r, weight, acc)` over the nodes of `∫_0^t · dr` in
    /// `s = √(t−r)`; `f` accumulates its kernel-weighted integrand into `acc`.
    fn time_integral(
        &self,
        t: f64,
        n: usize,
        mut f: impl FnMut(f64, f64, &mut [Complex64]),
    ) -> Vec<Complex64> {
        let lambda = self.cache.symbol();
        let mut acc = vec![Complex64::new(0.0, 0.0); lambda.len()];
        if t == 0.0 {
            return acc;
        }
        let gl = GaussLegendre::get(n);
        let top = t.sqrt();
        let k = self.opts.quad.panels as i32;
        let mut edges = vec![0.0];
        edges.extend((0..=k).rev().map(|j| top * 0.5f64.powi(j + 1)));
        edges.extend((2..=k + 1).map(|j| top * (1.0 - 0.5f64.powi(j))));
        edges.push(top);
        for w in edges.windows(2) {
            for (s, ws) in gl.mapped(w[0], w[1]) {
                let r = t - s * s;
                f(r, 2.0 * s * ws, &mut acc);
            }
        }
        acc
    }

    /// Compensator `Ĉ(t)` at quadrature order `n`.
    fn compensator_hat_order(&self, t: f64, n: usize) -> Vec<Complex64> {
        let lambda = self.cache.symbol();
        let mut total = vec![Complex64::new(0.0, 0.0); lambda.len()];
        for term in &self.terms {
            match term {
                Term::Separable {
                    time, s_hat, mean, ..
                } => {
                    if *mean == 0.0 {
                        continue;
                    }
                    if time.exponent == 0.0 {
                        for ((o, s), l) in total.iter_mut().zip(s_hat).zip(lambda) {
                            let i = if *l == 0.0 { t } else { -(-t * l).exp_m1() / l };
                            *o += s * (mean * time.coef * i);
                        }
                    } else {
                        let part = self.time_integral(t, n, |r, jac, acc| {
                            let c = jac * mean * time.eval(r);
                            let s2 = t - r;
                            for ((a, s), l) in acc.iter_mut().zip(s_hat).zip(lambda) {
                                *a += s * (c * (-s2 * l).exp());
                            }
                        });
                        for (o, p) in total.iter_mut().zip(part) {
                            *o += p;
                        }
                    }
                }
                Term::Custom { weight, g } => {
                    let marks = self
                        .levy
                        .mark_rule(self.opts.quad.mark_points)
                        .expect("checked at construction");
                    let mass = self.levy.nu.total_mass;
                    let part = self.time_integral(t, n, |r, jac, acc| {
                        let s2 = t - r;
                        for (v, wv) in &marks {
                            let hat = self.custom_hat(g, r, v);
                            let c = jac * weight * mass * wv;
                            for ((a, h), l) in acc.iter_mut().zip(&hat).zip(lambda) {
                                *a += h * (c * (-s2 * l).exp());
                            }
                        }
                    });
                    for (o, p) in total.iter_mut().zip(part) {
                        *o += p;
                    }
                }
            }
        }
        total
    }

    fn needs_quadrature(&self) -> bool {
        self.terms.iter().any(|t| match t {
            Term::Separable { time, mean, .. } => time.exponent != 0.0 && *mean != 0.0,
            Term::Custom { .. } => true,
        })
    }

    /// Physical-space compensator at `t` with its error estimate.
    fn compensator(&self, t: f64) -> Result<(Vec<f64>, f64)> {
        let q = self.opts.quad;
        let fine = self.compensator_hat_order(t, q.order);
        let err = if self.needs_quadrature() {
            let coarse = self.compensator_hat_order(t, q.order / 2);
            let n = self.grid.len() as f64;
            fine.iter()
                .zip(&coarse)
                .map(|(a, b)| (a - b).norm())
                .sum::<f64>()
                / n
        } else {
            0.0
        };
        let values = self.to_physical(fine);
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !err.is_finite() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteResult(format!("compensator at t = {t}")));
        }
        if err > q.tol * (1.0 + scale) {
            return Err(Error::QuadratureFailure(format!(
                "compensator at t = {t}: error {err:e} exceeds {:e}",
                q.tol
            )));
        }
        Ok((values, err))
    }

    /// Compensator at a time from the shared evaluation grid, memoised.
    fn compensator_cached(&self, t: f64) -> Result<Arc<CompensatorTable>> {
        let key = t.to_bits();
        if let Some(c) = self
            .compensators
            .read()
            .expect("compensator cache poisoned")
            .get(&key)
        {
            return Ok(c.clone());
        }
        let c = Arc::new(self.compensator(t)?);
        Ok(self
            .compensators
            .write()
            .expect("compensator cache poisoned")
            .entry(key)
            .or_insert(c)
            .clone())
    }

    /// Solves along `times` (sorted, within `[0, T]`). With `jump_limits`,
    /// every atom time is added twice, as a left limit and as a value.
    pub fn solve(
        &self,
        sample: &PoissonMeasureSample,
        times: &[f64],
        jump_limits: bool,
    ) -> Result<MildSolutionPath> {
        let horizon = self.levy.horizon;
        if times.windows(2).any(|w| w[0] > w[1])
            || times.iter().any(|t| !(*t >= 0.0 && *t <= horizon))
        {
            return Err(Error::invalid(
                "evaluation times must be sorted within [0, T]",
            ));
        }
        let mut schedule: Vec<(f64, bool, bool)> =
            times.iter().map(|&t| (t, false, true)).collect();
        if jump_limits {
            for a in &sample.atoms {
                schedule.push((a.t, true, false));
                schedule.push((a.t, false, false));
            }
            schedule.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        }
        let atom_hats: Vec<(f64, Vec<Complex64>)> = sample
            .atoms
            .iter()
            .map(|a| (a.t, self.forcing_hat(a.t, &a.v)))
            .collect();
        let lambda = self.cache.symbol();
        let n = schedule.len();
        let mut path = MildSolutionPath {
            replication: sample.replication,
            times: Vec::with_capacity(n),
            left_limit: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            jump_part: Vec::with_capacity(n),
            compensator_part: Vec::with_capacity(n),
            quadrature_error: 0.0,
        };
        for (t, left, shared) in schedule {
            let mut hat = vec![Complex64::new(0.0, 0.0); self.grid.len()];
            for (tj, gj) in &atom_hats {
                if *tj < t || (*tj == t && !left) {
                    let tau = t - tj;
                    for ((h, g), l) in hat.iter_mut().zip(gj).zip(lambda) {
                        *h += g * (-tau * l).exp();
                    }
                }
            }
            let jump = self.to_physical(hat);
            let comp = if shared {
                self.compensator_cached(t)?
            } else {
                Arc::new(self.compensator(t)?)
            };
            path.quadrature_error = path.quadrature_error.max(comp.1);
            path.values
                .push(jump.iter().zip(&comp.0).map(|(j, c)| j - c).collect());
            path.jump_part.push(jump);
            path.compensator_part.push(comp.0.clone());
            path.times.push(t);
            path.left_limit.push(left);
        }
        Ok(path)
    }
}

/// Solves the mild equation for one atom sample.
pub fn mild_solution(
    sample: &PoissonMeasureSample,
    forcing: Forcing,
    kernel: KernelSpec,
    levy: LevyConfig,
    times: &[f64],
    opts: SolverOptions,
) -> Result<MildSolutionPath> {
    MildSolver::new(kernel, levy, forcing, opts)?.solve(sample, times, false)
}

/// A lazily evaluated ensemble: replication `k` solves on the atoms drawn
/// from stream `k` of `seed`, always including jump left limits.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub solver: Arc<MildSolver>,
    pub times: Vec<f64>,
    pub n_rep: usize,
    pub seed: u64,
}

impl Ensemble {
    pub fn new(solver: MildSolver, times: Vec<f64>, n_rep: usize, seed: u64) -> Self {
        Self {
            solver: Arc::new(solver),
            times,
            n_rep,
            seed,
        }
    }

    pub fn sample(&self, rep: usize) -> Result<PoissonMeasureSample> {
        sample_prm_seeded(self.solver.levy(), self.seed, rep as u64)
    }

    pub fn path(&self, rep: usize) -> Result<MildSolutionPath> {
        self.solver.solve(&self.sample(rep)?, &self.times, true)
    }

    /// Maps `f` over the replications in parallel; results in replication order.
    pub fn map<T: Send>(
        &self,
        f: impl Fn(&MildSolutionPath) -> Result<T> + Sync + Send,
    ) -> Result<Vec<T>> {
        exec::try_map_indexed(self.n_rep, |rep| f(&self.path(rep)?))
    }

    pub fn materialize(&self) -> Result<MildSolutionField> {
        Ok(MildSolutionField {
            kernel: *self.solver.kernel(),
            levy: self.solver.levy().clone(),
            forcing: self.solver.forcing().describe(),
            seed: self.seed,
            paths: self.map(|p| Ok(p.clone()))?,
        })
    }
}

/// A materialised ensemble with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MildSolutionField {
    pub kernel: KernelSpec,
    pub levy: LevyConfig,
    pub forcing: String,
    pub seed: u64,
    pub paths: Vec<MildSolutionPath>,
}

impl MildSolutionField {
    /// CSV with columns `replication, t, left_limit, x0, …, u, jump, compensator`,
    /// restricted to points with `|x| ≤ radius`.
    pub fn write_csv<W: Write>(&self, w: W, radius: f64) -> Result<()> {
        let grid = self.kernel.grid()?;
        let keep: Vec<usize> = (0..grid.len())
            .filter(|&i| grid.point(i).iter().map(|x| x * x).sum::<f64>().sqrt() <= radius)
            .collect();
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["replication".to_string(), "t".into(), "left_limit".into()];
        header.extend((0..grid.d).map(|a| format!("x{a}")));
        header.extend(["u".to_string(), "jump".into(), "compensator".into()]);
        out.write_record(&header)?;
        for p in &self.paths {
            for ti in 0..p.len() {
                for &i in &keep {
                    let mut row = vec![
                        p.replication.to_string(),
                        format!("{:e}", p.times[ti]),
                        p.left_limit[ti].to_string(),
                    ];
                    row.extend(grid.point(i).iter().map(|x| format!("{x:e}")));
                    row.push(format!("{:e}", p.values[ti][i]));
                    row.push(format!("{:e}", p.jump_part[ti][i]));
                    row.push(format!("{:e}", p.compensator_part[ti][i]));
                    out.write_record(&row)?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}
