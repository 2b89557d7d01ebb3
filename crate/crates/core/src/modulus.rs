//! Continuity moduli `φ` and the scalar admissibility conditions attached to
//! them: the axioms (nonnegative, nondecreasing, vanishing at `0+`), the
//! dyadic series `Σ φ^θ(2^{-i})`, the neighbour ratio bound
//! `λ^{-1} ≤ φ(2^{-n})/φ(2^{-n-1}) ≤ λ` and the admissible `ϑ` windows of the
//! logarithmic families.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::stats::pairwise_sum;
use crate::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Continuation of a piecewise modulus above its breakpoint.
#[derive(Clone, Default)]
pub enum TailSpec {
    /// Constant equal to the core formula at the breakpoint.
    #[default]
    ConstantContinuation,
    UserFunction(ScalarFn),
}

impl fmt::Debug for TailSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailSpec::ConstantContinuation => f.write_str("ConstantContinuation"),
            TailSpec::UserFunction(_) => f.write_str("UserFunction(..)"),
        }
    }
}

#[derive(Clone)]
pub enum ModulusKind {
    /// `φ(r) = r^ε`.
    Power {
        epsilon: f64,
    },
    /// `φ(r) = (-log r)^{-β}` for `r ≤ 1/2`.
    LogPower {
        beta: f64,
        tail: TailSpec,
    },
    /// `φ(r) = log(-k0 log r) / (-log r)^β` for `r ≤ r0`.
    LogLog {
        beta: f64,
        k0: f64,
        tail: TailSpec,
    },
    Custom {
        name: String,
        eval: ScalarFn,
    },
}

impl fmt::Debug for ModulusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModulusKind::Power { epsilon } => write!(f, "Power {{ epsilon: {epsilon} }}"),
            ModulusKind::LogPower { beta, tail } => {
                write!(f, "LogPower {{ beta: {beta}, tail: {tail:?} }}")
            }
            ModulusKind::LogLog { beta, k0, tail } => {
                write!(f, "LogLog {{ beta: {beta}, k0: {k0}, tail: {tail:?} }}")
            }
            ModulusKind::Custom { name, .. } => write!(f, "Custom {{ name: {name:?} }}"),
        }
    }
}

/// A continuity modulus together with the radius where its core formula
/// hands over to the tail.
#[derive(Clone, Debug)]
pub struct ModulusFunction {
    kind: ModulusKind,
    breakpoint: f64,
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be a positive finite number, got {v}"
        )))
    }
}

impl ModulusFunction {
    pub fn power(epsilon: f64) -> Result<Self> {
        require_positive("epsilon", epsilon)?;
        Ok(Self {
            kind: ModulusKind::Power { epsilon },
            breakpoint: f64::INFINITY,
        })
    }

    pub fn log_power(beta: f64) -> Result<Self> {
        Self::log_power_with_tail(beta, TailSpec::ConstantContinuation)
    }

    pub fn log_power_with_tail(beta: f64, tail: TailSpec) -> Result<Self> {
        require_positive("beta", beta)?;
        Ok(Self {
            kind: ModulusKind::LogPower { beta, tail },
            breakpoint: 0.5,
        })
    }

    pub fn log_log(beta: f64, k0: f64) -> Result<Self> {
        Self::log_log_with_tail(beta, k0, TailSpec::ConstantContinuation)
    }

    pub fn log_log_with_tail(beta: f64, k0: f64, tail: TailSpec) -> Result<Self> {
        let c = loglog_constants(beta, k0)?;
        Ok(Self {
            kind: ModulusKind::LogLog { beta, k0, tail },
            breakpoint: c.r0,
        })
    }

    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind: ModulusKind::Custom {
                name: name.into(),
                eval: Arc::new(eval),
            },
            breakpoint: f64::INFINITY,
        }
    }

    pub fn kind(&self) -> &ModulusKind {
        &self.kind
    }

    pub fn breakpoint(&self) -> f64 {
        self.breakpoint
    }

    /// The `β` of the logarithmic families.
    pub fn beta(&self) -> Option<f64> {
        match self.kind {
            ModulusKind::LogPower { beta, .. } | ModulusKind::LogLog { beta, .. } => Some(beta),
            _ => None,
        }
    }

    /// The core formula, ignoring the tail.
    fn core(&self, r: f64) -> f64 {
        match &self.kind {
            ModulusKind::Power { epsilon } => r.powf(*epsilon),
            ModulusKind::LogPower { beta, .. } => (-r.ln()).powf(-beta),
            ModulusKind::LogLog { beta, k0, .. } => {
                let l = -r.ln();
                (k0 * l).ln() / l.powf(*beta)
            }
            ModulusKind::Custom { eval, .. } => eval(r),
        }
    }

    /// `φ(2^{-level})`, evaluated through `-log r` so that levels far past
    /// the `f64` underflow point stay exact for the built-in kinds.
    pub fn eval_dyadic(&self, level: f64) -> Result<f64> {
        let l = level * std::f64::consts::LN_2;
        let value = match &self.kind {
            ModulusKind::Power { epsilon } => (-epsilon * level).exp2(),
            ModulusKind::LogPower { beta, .. } if (-l).exp() <= self.breakpoint => l.powf(-beta),
            ModulusKind::LogLog { beta, k0, .. } if (-l).exp() <= self.breakpoint => {
                (k0 * l).ln() / l.powf(*beta)
            }
            _ => return self.eval((-level).exp2()),
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFiniteResult(format!(
                "φ(2^-{level}) = {value} for {:?}",
                self.kind
            )))
        }
    }

    /// `φ(r)`: core formula up to and including the breakpoint, tail above.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) || r.is_nan() {
            return Err(Error::invalid(format!(
                "modulus argument must be positive, got {r}"
            )));
        }
        let value = if r <= self.breakpoint {
            self.core(r)
        } else {
            match &self.kind {
                ModulusKind::LogPower { tail, .. } | ModulusKind::LogLog { tail, .. } => match tail
                {
                    TailSpec::ConstantContinuation => self.core(self.breakpoint),
                    TailSpec::UserFunction(f) => f(r),
                },
                _ => self.core(r),
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFiniteResult(format!(
                "φ({r}) = {value} for {:?}",
                self.kind
            )))
        }
    }

    /// The neighbour-ratio constant that holds by construction, when known:
    /// `2^ε` for powers, `2^β` for `LogPower`, and the `LogLog` constant that
    /// also accounts for the slowly varying numerator.
    pub fn theoretical_lambda(&self) -> Option<f64> {
        match &self.kind {
            ModulusKind::Power { epsilon } => Some(2f64.powf(*epsilon)),
            ModulusKind::LogPower { beta, .. } => Some(2f64.powf(*beta)),
            ModulusKind::LogLog { beta, k0, .. } => {
                let c = loglog_constants(*beta, *k0).ok()?;
                let n0 = (1.0 / c.r0).log2();
                let kl = k0 * std::f64::consts::LN_2;
                let second = (kl * (n0 + 1.0)).ln() / (kl * n0).ln();
                Some(2f64.powf(*beta).max(second))
            }
            ModulusKind::Custom { .. } => None,
        }
    }

    /// Checks that a user tail meets the core formula at the breakpoint and
    /// is nondecreasing on `[breakpoint, breakpoint · 64]`.
    pub fn validate_tail(&self, n_probe: usize, tol: f64) -> Result<()> {
        let tail = match &self.kind {
            ModulusKind::LogPower { tail, .. } | ModulusKind::LogLog { tail, .. } => tail,
            _ => return Ok(()),
        };
        let f = match tail {
            TailSpec::ConstantContinuation => return Ok(()),
            TailSpec::UserFunction(f) => f,
        };
        let b = self.breakpoint;
        let at_break = self.core(b);
        if (f(b) - at_break).abs() > tol * at_break.abs().max(1.0) {
            return Err(Error::invalid(format!(
                "tail is discontinuous at the breakpoint: tail({b}) = {}, core = {at_break}",
                f(b)
            )));
        }
        let grid = log_grid(b, b * 64.0, n_probe.max(2));
        for w in grid.windows(2) {
            if f(w[0]) > f(w[1]) + tol {
                return Err(Error::invalid(format!(
                    "tail decreases between {} and {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    /// The serialisable description, for the built-in kinds with a constant
    /// tail.
    pub fn to_spec(&self) -> Option<ModulusSpec> {
        match &self.kind {
            ModulusKind::Power { epsilon } => Some(ModulusSpec::Power { epsilon: *epsilon }),
            ModulusKind::LogPower {
                beta,
                tail: TailSpec::ConstantContinuation,
            } => Some(ModulusSpec::LogPower {
                beta: *beta,
                tail: TailMode::Constant,
            }),
            ModulusKind::LogLog {
                beta,
                k0,
                tail: TailSpec::ConstantContinuation,
            } => Some(ModulusSpec::LogLog {
                beta: *beta,
                k0: *k0,
                tail: TailMode::Constant,
            }),
            _ => None,
        }
    }
}

/// JSON form: `{"kind": "power"|"logpower"|"loglog", "epsilon"/"beta"/"k0": …, "tail": "constant"}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ModulusSpec {
    #[serde(rename = "power")]
    Power { epsilon: f64 },
    #[serde(rename = "logpower")]
    LogPower {
        beta: f64,
        #[serde(default)]
        tail: TailMode,
    },
    #[serde(rename = "loglog")]
    LogLog {
        beta: f64,
        k0: f64,
        #[serde(default)]
        tail: TailMode,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailMode {
    #[default]
    Constant,
}

impl ModulusSpec {
    pub fn build(&self) -> Result<ModulusFunction> {
        match *self {
            ModulusSpec::Power { epsilon } => ModulusFunction::power(epsilon),
            ModulusSpec::LogPower { beta, .. } => ModulusFunction::log_power(beta),
            ModulusSpec::LogLog { beta, k0, .. } => ModulusFunction::log_log(beta, k0),
        }
    }
}

impl TryFrom<ModulusSpec> for ModulusFunction {
    type Error = Error;
    fn try_from(spec: ModulusSpec) -> Result<Self> {
        spec.build()
    }
}

/// `n` log-spaced radii from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| {
            if k + 1 == n {
                hi
            } else {
                (a + (b - a) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Axioms

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    Finite,
    Nonnegative,
    Monotone,
    VanishingLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomViolation {
    pub axiom: Axiom,
    pub radius: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub passed: bool,
    pub nonnegative: bool,
    pub monotone: bool,
    pub vanishing_limit: bool,
    pub value_at_r_min: f64,
    pub first_violation: Option<AxiomViolation>,
    pub n_probe: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct AxiomOptions {
    pub tol_mono: f64,
    pub tol_limit: f64,
}

impl Default for AxiomOptions {
    fn default() -> Self {
        Self {
            tol_mono: 1e-12,
            tol_limit: 1e-3,
        }
    }
}

pub fn check_modulus_axioms(
    phi: &ModulusFunction,
    r_min: f64,
    r_max: f64,
    n_probe: usize,
) -> Result<AxiomReport> {
    check_modulus_axioms_with(phi, r_min, r_max, n_probe, AxiomOptions::default())
}

/// Probes nonnegativity, monotonicity and `φ(r_min) < tol_limit` on a
/// log-spaced grid. Violations are reported, not returned as errors.
pub fn check_modulus_axioms_with(
    phi: &ModulusFunction,
    r_min: f64,
    r_max: f64,
    n_probe: usize,
    opts: AxiomOptions,
) -> Result<AxiomReport> {
    if !(r_min > 0.0 && r_min < r_max) || n_probe < 2 {
        return Err(Error::invalid("need 0 < r_min < r_max and n_probe >= 2"));
    }
    let grid = log_grid(r_min, r_max, n_probe);
    let mut first: Option<AxiomViolation> = None;
    let note = |v: AxiomViolation, first: &mut Option<AxiomViolation>| {
        if first.as_ref().is_none_or(|f| v.radius < f.radius) {
            *first = Some(v);
        }
    };
    let mut values = Vec::with_capacity(grid.len());
    let mut finite = true;
    for &r in &grid {
        match phi.eval(r) {
            Ok(v) => values.push(v),
            Err(_) => {
                finite = false;
                note(
                    AxiomViolation {
                        axiom: Axiom::Finite,
                        radius: r,
                        value: f64::NAN,
                    },
                    &mut first,
                );
                values.push(f64::NAN);
            }
        }
    }
    let mut nonnegative = true;
    for (&r, &v) in grid.iter().zip(&values) {
        if v < 0.0 {
            nonnegative = false;
            note(
                AxiomViolation {
                    axiom: Axiom::Nonnegative,
                    radius: r,
                    value: v,
                },
                &mut first,
            );
            break;
        }
    }
    let mut monotone = true;
    for k in 1..values.len() {
        if values[k - 1] > values[k] + opts.tol_mono {
            monotone = false;
            note(
                AxiomViolation {
                    axiom: Axiom::Monotone,
                    radius: grid[k],
                    value: values[k],
                },
                &mut first,
            );
            break;
        }
    }
    let at_min = values[0];
    let vanishing_limit = at_min.is_finite() && at_min < opts.tol_limit;
    if !vanishing_limit {
        note(
            AxiomViolation {
                axiom: Axiom::VanishingLimit,
                radius: r_min,
                value: at_min,
            },
            &mut first,
        );
    }
    Ok(AxiomReport {
        passed: finite && nonnegative && monotone && vanishing_limit,
        nonnegative,
        monotone,
        vanishing_limit,
        value_at_r_min: at_min,
        first_violation: first,
        n_probe,
    })
}

// ---------------------------------------------------------------------------
// Dyadic series

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    RatioTest,
    #[default]
    IntegralBound,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicSum {
    /// `Σ_{i=0}^{i_max} φ^exponent(2^{-i})`.
    pub partial_sum: f64,
    pub i_max: usize,
    /// Certified upper bound on the omitted tail, when the method produced one.
    pub tail_bound: Option<f64>,
    pub verdict: Verdict,
    pub method: TailMethod,
}

impl DyadicSum {
    /// Partial sum plus the tail bound: an upper estimate of the full series.
    pub fn upper_estimate(&self) -> Option<f64> {
        self.tail_bound.map(|t| self.partial_sum + t)
    }
}

/// Local power exponent at or below which a decaying series is declared
/// divergent by the integral test.
const HARMONIC_MARGIN: f64 = 1e-6;

pub fn dyadic_sum(
    phi: &ModulusFunction,
    exponent: f64,
    i_max: usize,
    method: TailMethod,
) -> Result<DyadicSum> {
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::invalid(format!(
            "exponent must be positive, got {exponent}"
        )));
    }
    if i_max < 1 {
        return Err(Error::invalid("i_max must be at least 1"));
    }
    let mut terms = Vec::with_capacity(i_max + 1);
    for i in 0..=i_max {
        let t = phi.eval_dyadic(i as f64)?.powf(exponent);
        if !t.is_finite() {
            return Err(Error::NonFiniteResult(format!("term {i} = {t}")));
        }
        terms.push(t);
    }
    let partial_sum = pairwise_sum(&terms);
    let (verdict, tail_bound) = match method {
        TailMethod::None => (Verdict::Inconclusive, None),
        TailMethod::RatioTest => ratio_tail(&terms),
        TailMethod::IntegralBound => integral_tail(&terms),
    };
    Ok(DyadicSum {
        partial_sum,
        i_max,
        tail_bound,
        verdict,
        method,
    })
}

fn nonincreasing(ts: &[f64]) -> bool {
    ts.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
}

/// Ratio test over the last tenth of the terms. Certifies only when ratios
/// stay below one and are not creeping towards it.
fn ratio_tail(terms: &[f64]) -> (Verdict, Option<f64>) {
    let last_positive = match terms.iter().rposition(|&t| t > 0.0) {
        Some(k) => k,
        None => return (Verdict::Converges, Some(0.0)),
    };
    let n = terms.len() - 1;
    let span = (n / 10).max(2);
    if last_positive < n {
        let start = n.saturating_sub(span);
        return if nonincreasing(&terms[start..]) {
            (Verdict::Converges, Some(0.0))
        } else {
            (Verdict::Inconclusive, None)
        };
    }
    if n < span {
        return (Verdict::Inconclusive, None);
    }
    let window = &terms[n - span..=n];
    let ratios: Vec<f64> = window.windows(2).map(|w| w[1] / w[0]).collect();
    let q = ratios.iter().cloned().fold(0.0, f64::max);
    let creeping = ratios[ratios.len() - 1] > ratios[0] * (1.0 + 1e-12);
    if q < 1.0 && !creeping {
        (Verdict::Converges, Some(terms[n] * q / (1.0 - q)))
    } else {
        (Verdict::Inconclusive, None)
    }
}

/// Integral comparison with a power envelope fitted on `[N/2, N]`.
///
/// With `s` the secant exponent of the terms between `N/2` and `N`, and the
/// exponent nondecreasing (checked against `[N/4, N/2]`), the tail is at most
/// `a_N · N / (s − 1)` when `s > 1`. A secant exponent at or below one with
/// a nonincreasing exponent means the series dominates a divergent p-series.
fn integral_tail(terms: &[f64]) -> (Verdict, Option<f64>) {
    let n = terms.len() - 1;
    if n < 8 {
        return (Verdict::Inconclusive, None);
    }
    let (n4, n2) = (n / 4, n / 2);
    if !nonincreasing(&terms[n2..]) {
        return (Verdict::Inconclusive, None);
    }
    let (a4, a2, a) = (terms[n4], terms[n2], terms[n]);
    if a == 0.0 {
        return (Verdict::Converges, Some(0.0));
    }
    if a4 == 0.0 || a2 == 0.0 {
        return (Verdict::Inconclusive, None);
    }
    let s_now = (a2 / a).ln() / (n as f64 / n2 as f64).ln();
    let s_prev = (a4 / a2).ln() / (n2 as f64 / n4 as f64).ln();
    if s_now <= 1.0 + HARMONIC_MARGIN && s_now <= s_prev + 1e-9 {
        (Verdict::Diverges, None)
    } else if s_now > 1.0 + HARMONIC_MARGIN && s_now >= s_prev - 1e-9 {
        (Verdict::Converges, Some(a * n as f64 / (s_now - 1.0)))
    } else {
        (Verdict::Inconclusive, None)
    }
}

// ---------------------------------------------------------------------------
// Ratio condition

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioProbe {
    pub n: u32,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub ratios: Vec<RatioProbe>,
    /// `max_n max(ratio_n, 1/ratio_n)`.
    pub lambda_estimate: f64,
    pub bound: Option<f64>,
    pub holds: bool,
}

/// Default probe range: `[1, 64]`, starting at `⌈log₂(1/r0)⌉` for `LogLog`.
pub fn default_ratio_range(phi: &ModulusFunction) -> (u32, u32) {
    match phi.kind() {
        ModulusKind::LogLog { .. } => {
            let start = (1.0 / phi.breakpoint()).log2().ceil().max(1.0) as u32;
            (start, start.max(64))
        }
        _ => (1, 64),
    }
}

/// Computes `φ(2^{-n}) / φ(2^{-n-1})` over `n ∈ [n_min, n_max]` and checks
/// each ratio against `[1/Λ, Λ]`, with `Λ = bound` or the theoretical `λ`.
pub fn ratio_condition(
    phi: &ModulusFunction,
    n_min: u32,
    n_max: u32,
    bound: Option<f64>,
) -> Result<RatioReport> {
    if n_min < 1 || n_max <= n_min {
        return Err(Error::invalid("need 1 <= n_min < n_max"));
    }
    let mut ratios = Vec::with_capacity((n_max - n_min + 1) as usize);
    let mut lambda: f64 = 1.0;
    for n in n_min..=n_max {
        let upper = phi.eval_dyadic(n as f64)?;
        let lower = phi.eval_dyadic(n as f64 + 1.0)?;
        if lower == 0.0 {
            return Err(Error::DivisionByZero(format!("φ(2^-{}) = 0", n + 1)));
        }
        let ratio = upper / lower;
        lambda = lambda.max(ratio).max(1.0 / ratio);
        ratios.push(RatioProbe { n, ratio });
    }
    let bound = bound.or_else(|| phi.theoretical_lambda());
    let holds = match bound {
        Some(b) => ratios
            .iter()
            .all(|p| p.ratio <= b * (1.0 + 1e-12) && p.ratio * b >= 1.0 - 1e-12),
        None => lambda.is_finite(),
    };
    Ok(RatioReport {
        ratios,
        lambda_estimate: lambda,
        bound,
        holds,
    })
}

// ---------------------------------------------------------------------------
// ϑ windows and LogLog constants

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "window", rename_all = "snake_case")]
pub enum ThetaWindow {
    /// The open interval `(lo, hi)`.
    Open {
        lo: f64,
        hi: f64,
    },
    Empty,
}

impl ThetaWindow {
    pub fn contains(&self, theta: f64) -> bool {
        match *self {
            ThetaWindow::Open { lo, hi } => theta > lo && theta < hi,
            ThetaWindow::Empty => false,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, ThetaWindow::Empty)
    }

    pub fn midpoint(&self) -> Option<f64> {
        match *self {
            ThetaWindow::Open { lo, hi } => Some(0.5 * (lo + hi)),
            ThetaWindow::Empty => None,
        }
    }
}

/// Whether `(β, γ)` satisfies the hypothesis of the logarithmic corollaries:
/// `β > 1`, and `β > γ` when `γ ≥ 1`, `β > 1/γ` when `γ < 1`.
pub fn log_hypothesis_holds(beta: f64, gamma: f64) -> bool {
    beta > 1.0
        && if gamma >= 1.0 {
            beta > gamma
        } else {
            beta > 1.0 / gamma
        }
}

/// Admissible `ϑ` range: `(0, 1/γ)` for powers; `(1/β, 1/γ)` when `γ ≥ 1` and
/// `(1/(βγ), 1/γ)` when `γ < 1` for the logarithmic kinds, empty whenever the
/// `(β, γ)` hypothesis fails.
pub fn theta_window(phi: &ModulusFunction, gamma: f64) -> Result<ThetaWindow> {
    require_positive("gamma", gamma)?;
    let hi = 1.0 / gamma;
    match phi.kind() {
        ModulusKind::Power { .. } => Ok(ThetaWindow::Open { lo: 0.0, hi }),
        ModulusKind::LogPower { beta, .. } | ModulusKind::LogLog { beta, .. } => {
            let lo = if gamma >= 1.0 {
                1.0 / beta
            } else {
                1.0 / (beta * gamma)
            };
            if lo >= hi || !log_hypothesis_holds(*beta, gamma) {
                Ok(ThetaWindow::Empty)
            } else {
                Ok(ThetaWindow::Open { lo, hi })
            }
        }
        ModulusKind::Custom { .. } => Err(Error::invalid("no known ϑ window for a custom modulus")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogConstants {
    pub r0: f64,
    /// The integer with `2^{-N0} ≤ r0 < 2^{-N0+1}`.
    pub n0: u32,
}

pub fn loglog_constants(beta: f64, k0: f64) -> Result<LogLogConstants> {
    require_positive("beta", beta)?;
    require_positive("k0", k0)?;
    let r0 = (-(1.0 / beta).exp() / k0).exp();
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(Error::NonFiniteResult(format!(
            "r0 = {r0} for beta={beta}, k0={k0}"
        )));
    }
    let mut n0 = (1.0 / r0).log2().ceil().max(1.0) as i32;
    // Fix up rounding at exact powers of two.
    while (-(n0 as f64)).exp2() > r0 {
        n0 += 1;
    }
    while n0 > 1 && (-(n0 as f64) + 1.0).exp2() <= r0 {
        n0 -= 1;
    }
    Ok(LogLogConstants { r0, n0: n0 as u32 })
}

// ---------------------------------------------------------------------------
// Admissibility report

#[derive(Clone, Copy, Debug)]
pub struct AdmissibilityOptions {
    pub i_max: usize,
    pub tail_method: TailMethod,
    pub ratio_range: Option<(u32, u32)>,
    pub lambda_bound: Option<f64>,
    pub axiom_r_min: f64,
    pub axiom_r_max: f64,
    pub axiom_probes: usize,
}

impl Default for AdmissibilityOptions {
    fn default() -> Self {
        Self {
            i_max: 10_000,
            tail_method: TailMethod::IntegralBound,
            ratio_range: None,
            lambda_bound: None,
            axiom_r_min: 1e-300,
            axiom_r_max: 2.0,
            axiom_probes: 512,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Certified,
    Failed,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub modulus: Option<ModulusSpec>,
    pub gamma: f64,
    pub theta: f64,
    /// `ϑ` when `γ ≥ 1`, `γϑ` otherwise.
    pub series_exponent: f64,
    pub sum_value: f64,
    pub sum_tail_bound: Option<f64>,
    pub sum_converges: Verdict,
    pub sum_method: TailMethod,
    pub lambda_estimate: f64,
    pub lambda_bound: Option<f64>,
    pub ratio_holds: bool,
    pub theta_window: Option<ThetaWindow>,
    pub theta_in_window: Option<bool>,
    pub axioms: AxiomReport,
    pub outcome: Outcome,
}

/// Runs every scalar condition for `(φ, γ, ϑ)`.
pub fn admissibility(
    phi: &ModulusFunction,
    gamma: f64,
    theta: f64,
    opts: &AdmissibilityOptions,
) -> Result<AdmissibilityReport> {
    require_positive("gamma", gamma)?;
    if !(theta > 0.0 && theta < 1.0 / gamma) {
        return Err(Error::invalid(format!(
            "theta must lie in (0, 1/gamma) = (0, {}), got {theta}",
            1.0 / gamma
        )));
    }
    let series_exponent = if gamma >= 1.0 { theta } else { gamma * theta };
    let sum = dyadic_sum(phi, series_exponent, opts.i_max, opts.tail_method)?;
    let (n_min, n_max) = opts.ratio_range.unwrap_or_else(|| default_ratio_range(phi));
    let ratio = ratio_condition(phi, n_min, n_max, opts.lambda_bound)?;
    let window = theta_window(phi, gamma).ok();
    let axioms = check_modulus_axioms(phi, opts.axiom_r_min, opts.axiom_r_max, opts.axiom_probes)?;
    let outcome = if !axioms.passed || !ratio.holds || sum.verdict == Verdict::Diverges {
        Outcome::Failed
    } else if sum.verdict == Verdict::Inconclusive {
        Outcome::Inconclusive
    } else {
        Outcome::Certified
    };
    Ok(AdmissibilityReport {
        modulus: phi.to_spec(),
        gamma,
        theta,
        series_exponent,
        sum_value: sum.partial_sum,
        sum_tail_bound: sum.tail_bound,
        sum_converges: sum.verdict,
        sum_method: sum.method,
        lambda_estimate: ratio.lambda_estimate,
        lambda_bound: ratio.bound,
        ratio_holds: ratio.holds,
        theta_in_window: window.map(|w| w.contains(theta)),
        theta_window: window,
        axioms,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn logpower_at_breakpoint() {
        let phi = ModulusFunction::log_power(2.0).unwrap();
        let v = phi.eval(0.5).unwrap();
        assert!((v - LN2.powi(-2)).abs() < 1e-14);
        assert!((v - 2.0813689810056077).abs() < 1e-7);
        // Constant continuation above.
        assert_eq!(phi.eval(3.0).unwrap(), v);
    }

    #[test]
    fn power_identity() {
        let phi = ModulusFunction::power(1.0).unwrap();
        assert_eq!(phi.eval(0.25).unwrap(), 0.25);
    }

    #[test]
    fn loglog_boundary_value() {
        let phi = ModulusFunction::log_log(2.0, 1.0).unwrap();
        let r0 = phi.breakpoint();
        assert!((r0 - 0.192295).abs() < 1e-6);
        let l = -r0.ln();
        let expected = l.ln() / (l * l);
        assert!((phi.eval(r0).unwrap() - expected).abs() < 1e-15);
        // At r0 the numerator is exactly 1/β and -log r0 = e^{1/β}/k0.
        assert!((expected - 0.5 / std::f64::consts::E).abs() < 1e-14);
    }

    #[test]
    fn custom_nonfinite_is_error() {
        let phi = ModulusFunction::custom("bad", |r: f64| 1.0 / (r - 0.5));
        assert!(matches!(phi.eval(0.5), Err(Error::NonFiniteResult(_))));
        assert!(matches!(phi.eval(-1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn axioms_pass_and_fail() {
        let p = ModulusFunction::power(0.5).unwrap();
        assert!(check_modulus_axioms(&p, 1e-8, 2.0, 512).unwrap().passed);

        let ll = ModulusFunction::log_log(2.0, 1.0).unwrap();
        let r0 = ll.breakpoint();
        assert!(check_modulus_axioms(&ll, 1e-300, r0, 512).unwrap().passed);

        let c = ModulusFunction::custom("one", |_| 1.0);
        let rep = check_modulus_axioms(&c, 1e-8, 2.0, 64).unwrap();
        assert!(!rep.passed);
        assert!(!rep.vanishing_limit);
        assert_eq!(rep.first_violation.unwrap().axiom, Axiom::VanishingLimit);

        let dec = ModulusFunction::custom("dec", |r: f64| r * (2.0 - r).max(0.0));
        let rep = check_modulus_axioms(&dec, 1e-6, 2.0, 64).unwrap();
        assert!(!rep.monotone);
    }

    #[test]
    fn geometric_sum() {
        let p = ModulusFunction::power(0.5).unwrap();
        let s = dyadic_sum(&p, 1.0, 60, TailMethod::RatioTest).unwrap();
        let exact = 2.0 + 2f64.sqrt();
        assert!((s.partial_sum - exact).abs() < 1e-8);
        assert_eq!(s.verdict, Verdict::Converges);
        assert!((s.upper_estimate().unwrap() - exact).abs() < 1e-12);

        let s = dyadic_sum(&p, 1.0, 10_000, TailMethod::IntegralBound).unwrap();
        assert!((s.partial_sum - exact).abs() < 1e-12);
        assert_eq!(s.verdict, Verdict::Converges);
    }

    #[test]
    fn logpower_sum_matches_zeta_bracket() {
        // f^θ(1) + (log 2)^{-βθ} ζ(βθ) with βθ = 1.5.
        const ZETA_1_5: f64 = 2.612_375_348_685_488;
        let phi = ModulusFunction::log_power(2.0).unwrap();
        let s = dyadic_sum(&phi, 0.75, 1_000_000, TailMethod::IntegralBound).unwrap();
        assert_eq!(s.verdict, Verdict::Converges);
        let exact = LN2.powf(-1.5) * (1.0 + ZETA_1_5);
        assert!(s.partial_sum < exact);
        let upper = s.upper_estimate().unwrap();
        assert!(upper >= exact, "{upper} < {exact}");
        assert!(upper - exact < 1e-5);
        // Ratio test cannot certify a p-series.
        let r = dyadic_sum(&phi, 0.75, 10_000, TailMethod::RatioTest).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        let n = dyadic_sum(&phi, 0.75, 100, TailMethod::None).unwrap();
        assert_eq!(n.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn harmonic_diverges() {
        let phi =
            ModulusFunction::custom(
                "harmonic",
                |r: f64| if r <= 0.5 { 1.0 / -r.ln() } else { 1.0 / LN2 },
            );
        let s = dyadic_sum(&phi, 1.0, 1000, TailMethod::IntegralBound).unwrap();
        assert_eq!(s.verdict, Verdict::Diverges);
    }

    #[test]
    fn logpower_ratio_closed_form() {
        let phi = ModulusFunction::log_power(2.0).unwrap();
        let rep = ratio_condition(&phi, 1, 64, None).unwrap();
        assert_eq!(rep.ratios[0].ratio, 4.0);
        for p in &rep.ratios {
            let n = p.n as f64;
            assert!((p.ratio - (1.0 + 1.0 / n).powi(2)).abs() < 1e-12);
        }
        assert!(rep.lambda_estimate <= 4.0);
        assert_eq!(rep.bound, Some(4.0));
        assert!(rep.holds);
    }

    #[test]
    fn power_ratio_is_two() {
        let phi = ModulusFunction::power(1.0).unwrap();
        let rep = ratio_condition(&phi, 1, 64, None).unwrap();
        assert!(rep.ratios.iter().all(|p| p.ratio == 2.0));
    }

    #[test]
    fn ratio_zero_denominator() {
        let phi = ModulusFunction::custom("step", |r: f64| if r < 0.1 { 0.0 } else { r });
        assert!(matches!(
            ratio_condition(&phi, 1, 10, Some(2.0)),
            Err(Error::DivisionByZero(_))
        ));
    }

    #[test]
    fn loglog_ratio_respects_lambda() {
        let phi = ModulusFunction::log_log(2.0, 1.0).unwrap();
        let (lo, hi) = default_ratio_range(&phi);
        assert_eq!(lo, 3);
        let rep = ratio_condition(&phi, lo, hi, None).unwrap();
        assert!(rep.holds, "{rep:?}");
    }

    #[test]
    fn theta_windows() {
        let lp = ModulusFunction::log_power(2.0).unwrap();
        assert_eq!(
            theta_window(&lp, 1.0).unwrap(),
            ThetaWindow::Open { lo: 0.5, hi: 1.0 }
        );
        assert_eq!(theta_window(&lp, 4.0).unwrap(), ThetaWindow::Empty);
        let p = ModulusFunction::power(0.3).unwrap();
        assert_eq!(
            theta_window(&p, 2.0).unwrap(),
            ThetaWindow::Open { lo: 0.0, hi: 0.5 }
        );
    }

    #[test]
    fn loglog_constants_examples() {
        let c = loglog_constants(2.0, 1.0).unwrap();
        assert!((c.r0 - (-(0.5f64).exp()).exp()).abs() < 1e-15);
        assert_eq!(c.n0, 3);
        let c = loglog_constants(1e9, 1.0).unwrap();
        assert!((c.r0 - (-1f64).exp()).abs() < 1e-8);
        assert_eq!(c.n0, 2);
    }

    #[test]
    fn tail_validation() {
        let good = ModulusFunction::log_power_with_tail(
            2.0,
            TailSpec::UserFunction(Arc::new(|r: f64| LN2.powi(-2) + (r - 0.5))),
        )
        .unwrap();
        good.validate_tail(64, 1e-12).unwrap();
        let jump =
            ModulusFunction::log_power_with_tail(2.0, TailSpec::UserFunction(Arc::new(|_| 10.0)))
                .unwrap();
        assert!(jump.validate_tail(64, 1e-12).is_err());
    }

    #[test]
    fn spec_json() {
        let s: ModulusSpec =
            serde_json::from_str(r#"{"kind":"logpower","beta":2,"tail":"constant"}"#).unwrap();
        assert_eq!(
            s,
            ModulusSpec::LogPower {
                beta: 2.0,
                tail: TailMode::Constant
            }
        );
        let s: ModulusSpec = serde_json::from_str(r#"{"kind":"power","epsilon":0.5}"#).unwrap();
        assert_eq!(s.build().unwrap().to_spec(), Some(s));
        assert!(
            serde_json::from_str::<ModulusSpec>(r#"{"kind":"power","epsilon":0.5,"bogus":1}"#)
                .is_err()
        );
    }

    #[test]
    fn admissibility_logpower() {
        let phi = ModulusFunction::log_power(2.0).unwrap();
        let rep = admissibility(&phi, 1.0, 0.75, &AdmissibilityOptions::default()).unwrap();
        assert_eq!(rep.outcome, Outcome::Certified, "{rep:?}");
        assert_eq!(rep.theta_in_window, Some(true));
        assert!(admissibility(&phi, 1.0, 1.5, &AdmissibilityOptions::default()).is_err());
    }

    #[test]
    fn admissibility_divergent_theta() {
        // βϑ = 0.8 < 1: the series diverges.
        let phi = ModulusFunction::log_power(2.0).unwrap();
        let rep = admissibility(&phi, 1.0, 0.4, &AdmissibilityOptions::default()).unwrap();
        assert_eq!(rep.sum_converges, Verdict::Diverges);
        assert_eq!(rep.outcome, Outcome::Failed);
    }

    fn builtin() -> impl Strategy<Value = ModulusFunction> {
        prop_oneof![
            (0.05f64..3.0).prop_map(|e| ModulusFunction::power(e).unwrap()),
            (0.2f64..6.0).prop_map(|b| ModulusFunction::log_power(b).unwrap()),
            ((0.6f64..6.0), (0.2f64..5.0))
                .prop_map(|(b, k)| ModulusFunction::log_log(b, k).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn builtins_are_monotone(phi in builtin(), a in -600f64..1.0, b in -600f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (r1, r2) = (lo.exp(), hi.exp());
            prop_assert!(phi.eval(r1).unwrap() <= phi.eval(r2).unwrap() + 1e-12);
        }

        #[test]
        fn power_series_closed_form(eps in 0.2f64..3.0, theta in 0.2f64..2.0) {
            let phi = ModulusFunction::power(eps).unwrap();
            let s = dyadic_sum(&phi, theta, 4000, TailMethod::RatioTest).unwrap();
            let exact = 1.0 / (1.0 - (-eps * theta).exp2());
            prop_assert!((s.partial_sum - exact).abs() < 1e-9);
        }

        #[test]
        fn logpower_ratios_exact(beta in 0.1f64..8.0) {
            let phi = ModulusFunction::log_power(beta).unwrap();
            let rep = ratio_condition(&phi, 1, 64, None).unwrap();
            for p in &rep.ratios {
                let n = p.n as f64;
                prop_assert!((p.ratio - (1.0 + 1.0 / n).powf(beta)).abs() <= 1e-12 * (1.0 + 1.0 / n).powf(beta));
            }
        }

        #[test]
        fn window_empty_iff_hypothesis_fails(beta in 0.05f64..10.0, gamma in 0.05f64..10.0) {
            let phi = ModulusFunction::log_power(beta).unwrap();
            let w = theta_window(&phi, gamma).unwrap();
            prop_assert_eq!(w.is_empty(), !log_hypothesis_holds(beta, gamma));
        }

        #[test]
        fn loglog_bracket(beta in 0.3f64..50.0, k0 in 0.05f64..50.0) {
            let c = loglog_constants(beta, k0).unwrap();
            let n0 = c.n0 as f64;
            prop_assert!((-n0).exp2() <= c.r0 && c.r0 < (1.0 - n0).exp2());
        }
    }
}
