use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::measure::{norm, Atom, LevyConfig, PoissonMeasureSample};
use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

pub type JumpFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// `coef · t^exponent`, with `exponent > -1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeFactor {
    pub coef: f64,
    #[serde(default)]
    pub exponent: f64,
}

impl TimeFactor {
    pub fn constant(coef: f64) -> Self {
        Self {
            coef,
            exponent: 0.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.exponent == 0.0 {
            self.coef
        } else {
            self.coef * t.powf(self.exponent)
        }
    }

    /// `∫_0^t |coef · r^e|^q dr`.
    pub fn abs_power_integral(&self, t: f64, q: f64) -> f64 {
        let e = q * self.exponent + 1.0;
        self.coef.abs().powf(q) * t.powf(e) / e
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarkFactor {
    One,
    /// `|v|^q`.
    NormPower {
        q: f64,
    },
    /// The signed mark, for one-dimensional jumps.
    Identity,
}

impl MarkFactor {
    pub fn eval(&self, v: &[f64]) -> f64 {
        match *self {
            MarkFactor::One => 1.0,
            MarkFactor::NormPower { q } => norm(v).powf(q),
            MarkFactor::Identity => v[0],
        }
    }

    /// `E[mark(v)]` under the normalised mark law.
    pub fn mean(&self, cfg: &LevyConfig) -> Result<f64> {
        match *self {
            MarkFactor::One => Ok(1.0),
            MarkFactor::NormPower { q } => Ok(cfg.norm_moment(q)),
            MarkFactor::Identity => cfg.mean_mark().ok_or_else(|| {
                Error::invalid("the identity mark factor needs one-dimensional jumps")
            }),
        }
    }

    /// `E|mark(v)|^q`.
    pub fn abs_moment(&self, cfg: &LevyConfig, q: f64) -> Result<f64> {
        match *self {
            MarkFactor::One => Ok(1.0),
            MarkFactor::NormPower { q: q0 } => Ok(cfg.norm_moment(q0 * q)),
            MarkFactor::Identity => {
                if cfg.d_jump != 1 {
                    return Err(Error::invalid(
                        "the identity mark factor needs one-dimensional jumps",
                    ));
                }
                Ok(cfg.norm_moment(q))
            }
        }
    }
}

/// Jump-size integrand `ψ(t, v)`.
#[derive(Clone)]
pub enum Integrand {
    /// `time(t) · mark(v)`, with closed-form compensator and moments.
    Separable {
        time: TimeFactor,
        mark: MarkFactor,
    },
    Custom {
        name: String,
        f: JumpFn,
    },
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Integrand::Separable { time, mark } => {
                write!(f, "Separable {{ time: {time:?}, mark: {mark:?} }}")
            }
            Integrand::Custom { name, .. } => write!(f, "Custom {{ name: {name:?} }}"),
        }
    }
}

/// Serialisable separable integrand.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrandSpec {
    pub time: TimeFactor,
    pub mark: MarkFactor,
}

impl From<IntegrandSpec> for Integrand {
    fn from(s: IntegrandSpec) -> Self {
        Integrand::Separable {
            time: s.time,
            mark: s.mark,
        }
    }
}

impl Integrand {
    pub fn constant(c: f64) -> Self {
        Integrand::Separable {
            time: TimeFactor::constant(c),
            mark: MarkFactor::One,
        }
    }

    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Integrand::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, t: f64, v: &[f64]) -> f64 {
        match self {
            Integrand::Separable { time, mark } => time.eval(t) * mark.eval(v),
            Integrand::Custom { f, .. } => f(t, v),
        }
    }

    fn check(&self, cfg: &LevyConfig) -> Result<()> {
        cfg.validate()?;
        if let Integrand::Separable { time, mark } = self {
            if !(time.exponent > -1.0) || !time.coef.is_finite() {
                return Err(Error::invalid(
                    "time factor must be finite with exponent > -1",
                ));
            }
            mark.mean(cfg)?;
        }
        Ok(())
    }

    /// `∫_0^T ∫_E |ψ(r, v)|^q ν(dv) dr`.
    pub fn intensity_integral(&self, cfg: &LevyConfig, q: f64) -> Result<f64> {
        self.check(cfg)?;
        match self {
            Integrand::Separable { time, mark } => {
                if time.coef == 0.0 {
                    return Ok(0.0);
                }
                Ok(cfg.nu.total_mass
                    * time.abs_power_integral(cfg.horizon, q)
                    * mark.abs_moment(cfg, q)?)
            }
            Integrand::Custom { f, .. } => {
                let g = move |t: f64, v: &[f64]| f(t, v).abs().powf(q);
                let (value, err) = tensor_integral(cfg, 0.0, cfg.horizon, &g)?;
                check_error(value, err)?;
                Ok(value)
            }
        }
    }
}

const TABLE_INTERVALS: usize = 256;
const TIME_NODES: usize = 16;
const MARK_NODES: usize = 64;
const QUAD_TOL: f64 = 1e-7;

fn check_error(value: f64, err: f64) -> Result<()> {
    if err.is_finite() && err <= QUAD_TOL * value.abs().max(1.0) {
        Ok(())
    } else {
        Err(Error::QuadratureFailure(format!(
            "estimate {value:e} with refinement difference {err:e}"
        )))
    }
}

/// `ν(E) ∫_a^b E[g(r, v)] dr` by composite Gauss–Legendre in time and the
/// mark rule, with the difference against half-order rules as error.
fn tensor_integral(
    cfg: &LevyConfig,
    a: f64,
    b: f64,
    g: &dyn Fn(f64, &[f64]) -> f64,
) -> Result<(f64, f64)> {
    let fine = cfg.mark_rule(MARK_NODES).ok_or_else(|| {
        Error::QuadratureFailure(
            "custom integrands need a one-dimensional mark law or a point mass".into(),
        )
    })?;
    let coarse = cfg
        .mark_rule(MARK_NODES / 2)
        .expect("same law as the fine rule");
    let (mut hi, mut lo) = (0.0, 0.0);
    let pieces = 8;
    let h = (b - a) / pieces as f64;
    for k in 0..pieces {
        let (s, e) = (a + k as f64 * h, a + (k + 1) as f64 * h);
        hi += time_mark(s, e, TIME_NODES, &fine, g);
        lo += time_mark(s, e, TIME_NODES / 2, &coarse, g);
    }
    let m = cfg.nu.total_mass;
    Ok((m * hi, m * (hi - lo).abs()))
}

fn time_mark(
    a: f64,
    b: f64,
    n: usize,
    marks: &[(Vec<f64>, f64)],
    g: &dyn Fn(f64, &[f64]) -> f64,
) -> f64 {
    GaussLegendre::get(n).integrate(a, b, |t| marks.iter().map(|(v, w)| w * g(t, v)).sum())
}

/// `A(t) = ∫_0^t ∫_E ψ(r, v) ν(dv) dr`.
#[derive(Clone, Debug)]
pub struct Compensator {
    kind: CompensatorKind,
    /// Absolute quadrature error estimate; zero for closed forms.
    pub error_estimate: f64,
}

#[derive(Clone, Debug)]
enum CompensatorKind {
    /// `scale · t^{e+1} / (e+1)`.
    Closed { scale: f64, exponent: f64 },
    /// Cumulative values on a uniform grid, refined inside a cell on demand.
    Table {
        step: f64,
        cumulative: Vec<f64>,
        marks: Vec<(Vec<f64>, f64)>,
        mass: f64,
        psi: Integrand,
    },
}

impl Compensator {
    pub fn new(psi: &Integrand, cfg: &LevyConfig) -> Result<Self> {
        psi.check(cfg)?;
        match psi {
            Integrand::Separable { time, mark } => Ok(Self {
                kind: CompensatorKind::Closed {
                    scale: cfg.nu.total_mass * time.coef * mark.mean(cfg)?,
                    exponent: time.exponent,
                },
                error_estimate: 0.0,
            }),
            Integrand::Custom { f, .. } => {
                let marks = cfg.mark_rule(MARK_NODES).ok_or_else(|| {
                    Error::QuadratureFailure(
                        "custom integrands need a one-dimensional mark law or a point mass".into(),
                    )
                })?;
                let coarse = cfg.mark_rule(MARK_NODES / 2).expect("same law");
                let step = cfg.horizon / TABLE_INTERVALS as f64;
                let g = |t: f64, v: &[f64]| f(t, v);
                let mut cumulative = Vec::with_capacity(TABLE_INTERVALS + 1);
                cumulative.push(0.0);
                let mut err = 0.0;
                for k in 0..TABLE_INTERVALS {
                    let (a, b) = (k as f64 * step, (k + 1) as f64 * step);
                    let hi = time_mark(a, b, TIME_NODES, &marks, &g);
                    let lo = time_mark(a, b, TIME_NODES / 2, &coarse, &g);
                    err += (hi - lo).abs();
                    let last = *cumulative.last().expect("nonempty");
                    cumulative.push(last + cfg.nu.total_mass * hi);
                }
                let err = err * cfg.nu.total_mass;
                let total = *cumulative.last().expect("nonempty");
                check_error(total, err)?;
                Ok(Self {
                    kind: CompensatorKind::Table {
                        step,
                        cumulative,
                        marks,
                        mass: cfg.nu.total_mass,
                        psi: psi.clone(),
                    },
                    error_estimate: err,
                })
            }
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        match &self.kind {
            CompensatorKind::Closed { scale, exponent } => {
                if *scale == 0.0 || t <= 0.0 {
                    0.0
                } else {
                    scale * t.powf(exponent + 1.0) / (exponent + 1.0)
                }
            }
            CompensatorKind::Table {
                step,
                cumulative,
                marks,
                mass,
                psi,
            } => {
                if t <= 0.0 {
                    return 0.0;
                }
                let k = ((t / step).floor() as usize).min(cumulative.len() - 1);
                let base = k as f64 * step;
                if t == base {
                    return cumulative[k];
                }
                let g = |r: f64, v: &[f64]| psi.eval(r, v);
                cumulative[k] + mass * time_mark(base, t, TIME_NODES, marks, &g)
            }
        }
    }

    /// Whether `A` is monotone, so that `|I|` peaks at jump times or the
    /// horizon.
    pub fn is_monotone(&self) -> bool {
        matches!(self.kind, CompensatorKind::Closed { .. })
    }

    /// Grid times where the tabulated compensator is exact.
    fn table_times(&self) -> Vec<f64> {
        match &self.kind {
            CompensatorKind::Closed { .. } => Vec::new(),
            CompensatorKind::Table {
                step, cumulative, ..
            } => (0..cumulative.len()).map(|k| k as f64 * step).collect(),
        }
    }
}

/// `I_t = Σ_{t_j ≤ t} ψ(t_j, v_j) − A(t)` on a set of times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompensatedIntegralPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub jump_part: Vec<f64>,
    pub compensator_part: Vec<f64>,
    pub quadrature_error: f64,
}

/// Running jump sums `J_k = Σ_{j < k} ψ(t_j, v_j)`, `J_0 = 0`.
fn jump_sums(atoms: &[Atom], psi: &Integrand) -> Vec<f64> {
    let mut out = Vec::with_capacity(atoms.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for a in atoms {
        acc += psi.eval(a.t, &a.v);
        out.push(acc);
    }
    out
}

pub fn compensated_integral(
    sample: &PoissonMeasureSample,
    psi: &Integrand,
    cfg: &LevyConfig,
    times: &[f64],
) -> Result<CompensatedIntegralPath> {
    let comp = Compensator::new(psi, cfg)?;
    compensated_integral_with(sample, psi, &comp, times)
}

pub fn compensated_integral_with(
    sample: &PoissonMeasureSample,
    psi: &Integrand,
    comp: &Compensator,
    times: &[f64],
) -> Result<CompensatedIntegralPath> {
    if times.windows(2).any(|w| w[0] > w[1])
        || times.iter().any(|t| *t < 0.0 || *t > sample.horizon)
    {
        return Err(Error::invalid(
            "evaluation times must be sorted within [0, T]",
        ));
    }
    let sums = jump_sums(&sample.atoms, psi);
    let mut jump_part = Vec::with_capacity(times.len());
    let mut compensator_part = Vec::with_capacity(times.len());
    let mut k = 0;
    for &t in times {
        while k < sample.atoms.len() && sample.atoms[k].t <= t {
            k += 1;
        }
        jump_part.push(sums[k]);
        compensator_part.push(comp.at(t));
    }
    let values = jump_part
        .iter()
        .zip(&compensator_part)
        .map(|(j, a)| j - a)
        .collect();
    Ok(CompensatedIntegralPath {
        times: times.to_vec(),
        values,
        jump_part,
        compensator_part,
        quadrature_error: comp.error_estimate,
    })
}

/// `sup_{s ≤ T} |I_s|`. Exact for monotone compensators (both one-sided
/// limits at each atom and the endpoints); otherwise also scans the
/// compensator table, a lower bound for the true supremum.
pub fn sup_abs(sample: &PoissonMeasureSample, psi: &Integrand, comp: &Compensator) -> f64 {
    let sums = jump_sums(&sample.atoms, psi);
    let mut best: f64 = 0.0;
    for (j, a) in sample.atoms.iter().enumerate() {
        let at = comp.at(a.t);
        best = best.max((sums[j] - at).abs()).max((sums[j + 1] - at).abs());
    }
    let n = sample.atoms.len();
    best = best.max((sums[n] - comp.at(sample.horizon)).abs());
    if !comp.is_monotone() {
        let mut k = 0;
        for t in comp.table_times() {
            while k < n && sample.atoms[k].t <= t {
                k += 1;
            }
            best = best.max((sums[k] - comp.at(t)).abs());
        }
    }
    best
}
