use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::integral::{sup_abs, Compensator, Integrand};
use super::measure::{sample_prm_seeded, LevyConfig};
use crate::stats::{mean, relative_drift, standard_error};
use crate::{exec, Error, Result};

/// Largest tolerated `max/min − 1` of the batch ratios.
pub const DRIFT_TOL: f64 = 0.25;
/// Fewest replications a moment check accepts.
pub const MIN_REPLICATIONS: usize = 100;

/// Which right-hand side a moment check compares against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityKind {
    /// `p ≥ 2`: `(E∫∫|ψ|²ν dr)^{p/2} + E∫∫|ψ|^p ν dr`.
    KunitaLarge,
    /// `1 ≤ p < 2`: `E∫∫|ψ|^p ν dr`.
    KunitaSmall,
    /// Sup over space: `(E∫∫‖f‖_∞ ν dr)^p + E∫∫‖f‖_∞^p ν dr`.
    LInfinity,
    /// Mild solution sup norm against `∫∫‖g‖_∞ ν dr`.
    SupNorm,
}

/// Moment inequality report. The constants in these inequalities exist but
/// are not explicit, so the verdict is about stability of `lhs / rhs`
/// across nested replication batches, not about a fixed bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub kind: InequalityKind,
    pub p: f64,
    /// `Ê[sup_{s ≤ T} |I_s|^p]`.
    pub lhs_estimate: f64,
    pub lhs_std_error: f64,
    pub rhs_components: Vec<f64>,
    pub rhs_total: f64,
    pub ratio: f64,
    pub batch_sizes: Vec<usize>,
    pub batch_ratios: Vec<f64>,
    /// `max/min − 1` over `batch_ratios`.
    pub drift: f64,
    pub consistent: bool,
    pub n_rep: usize,
    pub seed: u64,
}

/// Smallest replication batch that enters the drift.
pub const MIN_BATCH: usize = 100;

/// Nested prefix sizes `n/100, n/10, n`, keeping those of at least
/// [`MIN_BATCH`] replications.
pub fn default_batches(n_rep: usize) -> Vec<usize> {
    let mut out: Vec<usize> = [n_rep / 100, n_rep / 10, n_rep]
        .into_iter()
        .filter(|&b| b >= MIN_BATCH)
        .collect();
    out.dedup();
    out
}

fn ratio_of(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 && rhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

pub(crate) fn assemble(
    kind: InequalityKind,
    p: f64,
    samples: &[f64],
    rhs_components: Vec<f64>,
    seed: u64,
) -> InequalityReport {
    let rhs_total: f64 = rhs_components.iter().sum();
    let batch_sizes = default_batches(samples.len());
    let batch_ratios: Vec<f64> = batch_sizes
        .iter()
        .map(|&b| ratio_of(mean(&samples[..b]), rhs_total))
        .collect();
    let drift = relative_drift(&batch_ratios);
    let lhs_estimate = mean(samples);
    let ratio = ratio_of(lhs_estimate, rhs_total);
    let consistent =
        ratio.is_finite() && drift < DRIFT_TOL && (batch_ratios.len() >= 2 || ratio == 0.0);
    InequalityReport {
        kind,
        p,
        lhs_estimate,
        lhs_std_error: standard_error(samples),
        rhs_components,
        rhs_total,
        ratio,
        batch_sizes,
        batch_ratios,
        drift,
        consistent,
        n_rep: samples.len(),
        seed,
    }
}

/// Per-replication `(sup_{s ≤ T} |I_s|)^p`.
fn sup_powers(
    psi: &Integrand,
    cfg: &LevyConfig,
    p: f64,
    n_rep: usize,
    seed: u64,
    scale: f64,
) -> Result<Vec<f64>> {
    if n_rep < MIN_REPLICATIONS {
        return Err(Error::InsufficientReplications {
            required: MIN_REPLICATIONS,
            got: n_rep,
        });
    }
    let comp = Compensator::new(psi, cfg)?;
    exec::try_map_indexed(n_rep, |rep| {
        let sample = sample_prm_seeded(cfg, seed, rep as u64)?;
        Ok((scale * sup_abs(&sample, psi, &comp)).powf(p))
    })
}

/// Compares `Ê[sup_{s ≤ T} |I_s|^p]` with the right-hand side matching `p`:
/// two terms for `p ≥ 2`, one for `1 ≤ p < 2`.
pub fn kunita_check(
    psi: &Integrand,
    cfg: &LevyConfig,
    p: f64,
    n_rep: usize,
    seed: u64,
) -> Result<InequalityReport> {
    if p >= 2.0 {
        kunita_check_p_ge2(psi, cfg, p, n_rep, seed)
    } else {
        kunita_check_p_lt2(psi, cfg, p, n_rep, seed)
    }
}

pub fn kunita_check_p_ge2(
    psi: &Integrand,
    cfg: &LevyConfig,
    p: f64,
    n_rep: usize,
    seed: u64,
) -> Result<InequalityReport> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::invalid(format!("p must be at least 2, got {p}")));
    }
    let samples = sup_powers(psi, cfg, p, n_rep, seed, 1.0)?;
    let rhs = vec![
        psi.intensity_integral(cfg, 2.0)?.powf(p / 2.0),
        psi.intensity_integral(cfg, p)?,
    ];
    Ok(assemble(
        InequalityKind::KunitaLarge,
        p,
        &samples,
        rhs,
        seed,
    ))
}

pub fn kunita_check_p_lt2(
    psi: &Integrand,
    cfg: &LevyConfig,
    p: f64,
    n_rep: usize,
    seed: u64,
) -> Result<InequalityReport> {
    if !(1.0..2.0).contains(&p) {
        return Err(Error::invalid(format!("p must lie in [1, 2), got {p}")));
    }
    let samples = sup_powers(psi, cfg, p, n_rep, seed, 1.0)?;
    let rhs = vec![psi.intensity_integral(cfg, p)?];
    Ok(assemble(
        InequalityKind::KunitaSmall,
        p,
        &samples,
        rhs,
        seed,
    ))
}

pub type SpaceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Spatial factor `s(x)` of a separable integrand `ψ(t, v) s(x)`.
#[derive(Clone)]
pub enum SpaceProfile {
    Constant(f64),
    /// `sin(freq · x_0 + phase)`.
    Sine {
        freq: f64,
        phase: f64,
    },
    /// `exp(−|x|² / (2 width²))`.
    Gaussian {
        width: f64,
    },
    Custom {
        name: String,
        f: SpaceFn,
    },
}

impl fmt::Debug for SpaceProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceProfile::Constant(c) => write!(f, "Constant({c})"),
            SpaceProfile::Sine { freq, phase } => {
                write!(f, "Sine {{ freq: {freq}, phase: {phase} }}")
            }
            SpaceProfile::Gaussian { width } => write!(f, "Gaussian {{ width: {width} }}"),
            SpaceProfile::Custom { name, .. } => write!(f, "Custom {{ name: {name:?} }}"),
        }
    }
}

impl SpaceProfile {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SpaceProfile::Constant(c) => *c,
            SpaceProfile::Sine { freq, phase } => (freq * x[0] + phase).sin(),
            SpaceProfile::Gaussian { width } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                (-r2 / (2.0 * width * width)).exp()
            }
            SpaceProfile::Custom { f, .. } => f(x),
        }
    }

    /// `max |s|` over the given points.
    pub fn grid_sup(&self, points: &[Vec<f64>]) -> f64 {
        points
            .iter()
            .map(|x| self.eval(x).abs())
            .fold(0.0, f64::max)
    }
}

/// The sup-over-space moment inequality for `f(t, v, x) = ψ(t, v) s(x)`,
/// with `‖·‖_∞` taken over `x_grid` (so the left side is a grid lower
/// bound).
pub fn linfty_moment_check(
    psi: &Integrand,
    profile: &SpaceProfile,
    x_grid: &[Vec<f64>],
    cfg: &LevyConfig,
    p: f64,
    n_rep: usize,
    seed: u64,
) -> Result<InequalityReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("p must be at least 1, got {p}")));
    }
    if x_grid.is_empty() {
        return Err(Error::invalid("empty x grid"));
    }
    let s = profile.grid_sup(x_grid);
    let samples = sup_powers(psi, cfg, p, n_rep, seed, s)?;
    let rhs = vec![
        (s * psi.intensity_integral(cfg, 1.0)?).powf(p),
        s.powf(p) * psi.intensity_integral(cfg, p)?,
    ];
    Ok(assemble(InequalityKind::LInfinity, p, &samples, rhs, seed))
}
