use std::collections::HashMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::field::FieldSample;
use super::grid::DyadicGrid;
use crate::modulus::ModulusFunction;
use crate::seed::SeedSequence;
use crate::stats::pairwise_sum;
use crate::{exec, Error, Result};

/// Default cap on the number of probe pairs.
pub const DEFAULT_PAIR_BUDGET: usize = 1 << 23;

/// `K_i(t)` for every replication, level `0..=m_max` and time index,
/// stored `[replication][level][time]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelIncrements {
    pub n_rep: usize,
    pub n_levels: usize,
    pub n_time: usize,
    pub values: Vec<f64>,
}

impl LevelIncrements {
    pub fn get(&self, rep: usize, level: usize, time: usize) -> f64 {
        self.values[(rep * self.n_levels + level) * self.n_time + time]
    }

    /// CSV with columns `replication, level, time_index, K_value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["replication", "level", "time_index", "K_value"])?;
        for rep in 0..self.n_rep {
            for level in 0..self.n_levels {
                for time in 0..self.n_time {
                    out.write_record([
                        rep.to_string(),
                        level.to_string(),
                        time.to_string(),
                        format!("{:e}", self.get(rep, level, time)),
                    ])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Fine-grid index pairs `(a, a + step · stride(axis))` realising `Δ_level`.
fn level_pairs(grid: &DyadicGrid, level: u32) -> Vec<(usize, usize)> {
    let m = grid.level();
    let step = 1usize << (m - level);
    let coarse_side = (1usize << level) + 1;
    let mut out = Vec::new();
    for idx in grid.sublattice(level) {
        for axis in 0..grid.d() {
            let stride = grid.stride(axis);
            let coarse = (idx / stride) % grid.side() / step;
            if coarse + 1 < coarse_side {
                out.push((idx, idx + step * stride));
            }
        }
    }
    out
}

/// `K_level(t) = max_{(x,y) ∈ Δ_level} ‖X_t(x) − X_t(y)‖`, per replication
/// and time, stored `[replication][time]`.
pub fn compute_level_increments(field: &FieldSample, level: u32) -> Result<Vec<f64>> {
    if level > field.m_max() {
        return Err(Error::GridMismatch(format!(
            "level {level} is finer than the field resolution {}",
            field.m_max()
        )));
    }
    let pairs = level_pairs(&field.grid(), level);
    let n_time = field.n_time();
    let per_rep = exec::map_indexed(field.n_rep(), |rep| {
        (0..n_time)
            .map(|t| {
                let snap = field.snapshot(rep, t);
                pairs
                    .iter()
                    .map(|&(a, b)| snap.increment(a, b))
                    .fold(0.0, f64::max)
            })
            .collect::<Vec<_>>()
    });
    Ok(per_rep.concat())
}

pub fn level_increments(field: &FieldSample) -> LevelIncrements {
    let grid = field.grid();
    let n_levels = field.m_max() as usize + 1;
    let pairs: Vec<Vec<(usize, usize)>> = (0..n_levels as u32)
        .map(|l| level_pairs(&grid, l))
        .collect();
    let n_time = field.n_time();
    let per_rep = exec::map_indexed(field.n_rep(), |rep| {
        let mut out = Vec::with_capacity(n_levels * n_time);
        for level_pairs in &pairs {
            for t in 0..n_time {
                let snap = field.snapshot(rep, t);
                out.push(
                    level_pairs
                        .iter()
                        .map(|&(a, b)| snap.increment(a, b))
                        .fold(0.0, f64::max),
                );
            }
        }
        out
    });
    LevelIncrements {
        n_rep: field.n_rep(),
        n_levels,
        n_time,
        values: per_rep.concat(),
    }
}

/// Which grid pairs the empirical suprema range over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeSet {
    #[default]
    All,
    Random {
        count: usize,
        seed: u64,
    },
}

/// Materialised probe pairs with exact squared distances.
#[derive(Clone, Debug)]
pub struct ProbePairs {
    pairs: Vec<(usize, usize)>,
    /// `|x − y|² · 4^{m_max}`, an integer.
    sq_numerators: Vec<u64>,
    m_max: u32,
}

impl ProbePairs {
    pub fn build(grid: &DyadicGrid, probes: ProbeSet, budget: usize) -> Result<Self> {
        let n = grid.len();
        let pairs: Vec<(usize, usize)> = match probes {
            ProbeSet::All => {
                let total = n as u128 * (n as u128 - 1) / 2;
                if total > budget as u128 {
                    return Err(Error::BudgetExceeded {
                        requested: total,
                        budget: budget as u128,
                    });
                }
                (0..n)
                    .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
                    .collect()
            }
            ProbeSet::Random { count, seed } => {
                if count > budget {
                    return Err(Error::BudgetExceeded {
                        requested: count as u128,
                        budget: budget as u128,
                    });
                }
                if n < 2 {
                    return Err(Error::invalid("need at least two grid points"));
                }
                let mut rng = SeedSequence::new(seed).rng(0);
                (0..count)
                    .map(|_| {
                        let a = rng.random_range(0..n);
                        let mut b = rng.random_range(0..n - 1);
                        if b >= a {
                            b += 1;
                        }
                        (a.min(b), a.max(b))
                    })
                    .collect()
            }
        };
        let nums: Vec<Vec<u64>> = (0..n).map(|i| grid.numerators(i)).collect();
        let sq_numerators = pairs
            .iter()
            .map(|&(a, b)| {
                nums[a]
                    .iter()
                    .zip(&nums[b])
                    .map(|(&x, &y)| {
                        let d = x.abs_diff(y);
                        d * d
                    })
                    .sum()
            })
            .collect();
        Ok(Self {
            pairs,
            sq_numerators,
            m_max: grid.level(),
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn distance(&self, k: usize) -> f64 {
        (self.sq_numerators[k] as f64).sqrt() * (-(self.m_max as f64)).exp2()
    }

    /// The largest `m ≤ m_max` with `|x − y| ≤ 2^{-m}`, or `None` when the
    /// pair is farther apart than 1.
    pub fn chain_level(&self, k: usize) -> Option<u32> {
        let sq = self.sq_numerators[k] as u128;
        (0..=self.m_max)
            .rev()
            .find(|&m| sq <= 1u128 << (2 * (self.m_max - m)))
    }

    /// `φ^{-power}(|x − y|)` per pair, evaluated once per distinct distance.
    fn inverse_weights(&self, phi: &ModulusFunction, power: f64) -> Result<Vec<f64>> {
        let mut cache: HashMap<u64, f64> = HashMap::new();
        let mut out = Vec::with_capacity(self.len());
        for k in 0..self.len() {
            let key = self.sq_numerators[k];
            let w = match cache.get(&key) {
                Some(&w) => w,
                None => {
                    let r = self.distance(k);
                    let v = phi.eval(r)?;
                    if v == 0.0 {
                        return Err(Error::DivisionByZero(format!("φ({r}) = 0")));
                    }
                    let w = v.powf(-power);
                    cache.insert(key, w);
                    w
                }
            };
            out.push(w);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seminorm {
    /// `max_t max_pairs ‖ΔX‖ / φ^α(|x − y|)` per replication.
    pub per_replication: Vec<f64>,
    /// The same before the max over time, `[replication][time]`.
    pub per_time: Vec<f64>,
    pub n_time: usize,
}

/// Empirical `[X_t]_{α,φ}` over the probe pairs: a lower bound for the
/// supremum over the continuum.
pub fn seminorm(
    field: &FieldSample,
    phi: &ModulusFunction,
    alpha: f64,
    probes: &ProbePairs,
) -> Result<Seminorm> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if probes.m_max != field.m_max() {
        return Err(Error::GridMismatch(
            "probe pairs were built for another grid".into(),
        ));
    }
    let weights = probes.inverse_weights(phi, alpha)?;
    let n_time = field.n_time();
    let per_time = exec::map_indexed(field.n_rep(), |rep| {
        (0..n_time)
            .map(|t| {
                let snap = field.snapshot(rep, t);
                probes
                    .pairs
                    .iter()
                    .zip(&weights)
                    .map(|(&(a, b), w)| snap.increment(a, b) * w)
                    .fold(0.0, f64::max)
            })
            .collect::<Vec<_>>()
    })
    .concat();
    let per_replication = per_time
        .chunks(n_time)
        .map(|c| c.iter().cloned().fold(0.0, f64::max))
        .collect();
    Ok(Seminorm {
        per_replication,
        per_time,
        n_time,
    })
}

/// Plain bounds on `‖ΔX‖`, or the `γ < 1` variant on `‖ΔX‖^γ` built from
/// `K_i^γ` and `φ^{-αγ}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ChainingMode {
    #[default]
    Standard,
    Power {
        gamma: f64,
    },
}

impl ChainingMode {
    fn exponent(self) -> f64 {
        match self {
            ChainingMode::Standard => 1.0,
            ChainingMode::Power { gamma } => gamma,
        }
    }
}

/// `C(d) = 2d(d+1) · max_{m ≤ i_max} [φ(2^{-m}) / φ(2^{-m-1})]^{α'}`, with
/// `α' = α` or `αγ` in power mode; `+∞` if some `φ(2^{-m-1})` vanishes.
pub fn chain_constant(
    phi: &ModulusFunction,
    alpha: f64,
    d: usize,
    i_max: u32,
    mode: ChainingMode,
) -> Result<f64> {
    let power = alpha * mode.exponent();
    let mut sup: f64 = 0.0;
    for m in 0..=i_max {
        let upper = phi.eval_dyadic(m as f64)?;
        let lower = phi.eval_dyadic(m as f64 + 1.0)?;
        if lower == 0.0 {
            return Ok(f64::INFINITY);
        }
        sup = sup.max((upper / lower).powf(power));
    }
    Ok(2.0 * d as f64 * (d as f64 + 1.0) * sup)
}

/// `C(d) · Σ_{i=0}^{i_max} φ^{-α}(2^{-i}) K_i(t)` per `(replication, time)`,
/// or `C(d) · Σ φ^{-αγ}(2^{-i}) K_i^γ(t)` in power mode.
pub fn chaining_bound(
    k: &LevelIncrements,
    phi: &ModulusFunction,
    alpha: f64,
    d: usize,
    i_max: u32,
    mode: ChainingMode,
) -> Result<Vec<f64>> {
    if i_max as usize >= k.n_levels {
        return Err(Error::GridMismatch(format!(
            "i_max {i_max} exceeds the available levels 0..{}",
            k.n_levels
        )));
    }
    let g = mode.exponent();
    let c = chain_constant(phi, alpha, d, i_max, mode)?;
    let mut weights = Vec::with_capacity(i_max as usize + 1);
    for i in 0..=i_max {
        let v = phi.eval_dyadic(i as f64)?;
        weights.push(if v == 0.0 {
            f64::INFINITY
        } else {
            v.powf(-alpha * g)
        });
    }
    let mut out = Vec::with_capacity(k.n_rep * k.n_time);
    let mut terms = vec![0.0; weights.len()];
    for rep in 0..k.n_rep {
        for t in 0..k.n_time {
            for (i, w) in weights.iter().enumerate() {
                let ki = k.get(rep, i, t);
                let ki = if g == 1.0 { ki } else { ki.powf(g) };
                terms[i] = if ki == 0.0 { 0.0 } else { w * ki };
            }
            let s = pairwise_sum(&terms);
            out.push(if s == 0.0 { 0.0 } else { c * s });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathwiseWitness {
    pub replication: usize,
    pub time_index: usize,
    pub a: usize,
    pub b: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathwiseCheck {
    pub mode: ChainingMode,
    pub checked: u64,
    pub violations: u64,
    /// Pairs farther apart than 1, which the finite inequality does not cover.
    pub skipped: u64,
    /// `max lhs / rhs` over checked pairs with `rhs > 0`.
    pub max_ratio: f64,
    pub first_violation: Option<PathwiseWitness>,
}

impl PathwiseCheck {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// For every probe pair with `|x − y| ≤ 2^{-m}`, checks
/// `‖X_t(x) − X_t(y)‖ ≤ 2d Σ_{i=m}^{m_max} K_i(t)` (or its power-`γ` form)
/// with no tolerance.
pub fn pathwise_check(
    field: &FieldSample,
    k: &LevelIncrements,
    probes: &ProbePairs,
    mode: ChainingMode,
) -> Result<PathwiseCheck> {
    if k.n_levels != field.m_max() as usize + 1
        || k.n_rep != field.n_rep()
        || probes.m_max != field.m_max()
    {
        return Err(Error::GridMismatch(
            "increments, probes and field disagree".into(),
        ));
    }
    let g = mode.exponent();
    let factor = 2.0 * field.d() as f64;
    let levels: Vec<Option<u32>> = (0..probes.len()).map(|p| probes.chain_level(p)).collect();
    let n_time = field.n_time();
    let n_levels = k.n_levels;
    let per_rep = exec::map_indexed(field.n_rep(), |rep| {
        let mut check = PathwiseCheck {
            mode,
            checked: 0,
            violations: 0,
            skipped: 0,
            max_ratio: 0.0,
            first_violation: None,
        };
        let mut suffix = vec![0.0; n_levels];
        let mut terms = vec![0.0; n_levels];
        for t in 0..n_time {
            for (i, term) in terms.iter_mut().enumerate() {
                let ki = k.get(rep, i, t);
                *term = if g == 1.0 { ki } else { ki.powf(g) };
            }
            for m in 0..n_levels {
                suffix[m] = factor * pairwise_sum(&terms[m..]);
            }
            let snap = field.snapshot(rep, t);
            for (p, &(a, b)) in probes.pairs.iter().enumerate() {
                let Some(m) = levels[p] else {
                    check.skipped += 1;
                    continue;
                };
                let inc = snap.increment(a, b);
                let lhs = if g == 1.0 { inc } else { inc.powf(g) };
                let rhs = suffix[m as usize];
                check.checked += 1;
                if rhs > 0.0 {
                    check.max_ratio = check.max_ratio.max(lhs / rhs);
                }
                if lhs > rhs {
                    check.violations += 1;
                    if check.first_violation.is_none() {
                        check.first_violation = Some(PathwiseWitness {
                            replication: rep,
                            time_index: t,
                            a,
                            b,
                            lhs,
                            rhs,
                        });
                    }
                }
            }
        }
        check
    });
    let mut total = PathwiseCheck {
        mode,
        checked: 0,
        violations: 0,
        skipped: 0,
        max_ratio: 0.0,
        first_violation: None,
    };
    for c in per_rep {
        total.checked += c.checked;
        total.violations += c.violations;
        total.skipped += c.skipped;
        total.max_ratio = total.max_ratio.max(c.max_ratio);
        if total.first_violation.is_none() {
            total.first_violation = c.first_violation;
        }
    }
    Ok(total)
}

/// Factor relating seminorms at two exponents `α < α0` on `[0,1]^d`:
/// `[X]_{α,φ} ≤ [X]_{α0,φ} · max(1, φ(√d)^{α0 − α})`.
pub fn reduction_factor(phi: &ModulusFunction, d: usize, alpha: f64, alpha0: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= alpha0) {
        return Err(Error::invalid("need 0 < alpha <= alpha0"));
    }
    Ok(phi.eval((d as f64).sqrt())?.powf(alpha0 - alpha).max(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainingOptions {
    pub alpha: f64,
    pub mode: ChainingMode,
    /// Deepest level in the bound; defaults to the field resolution.
    pub i_max: Option<u32>,
    pub probes: ProbeSet,
    pub pair_budget: usize,
    pub pathwise: bool,
}

impl ChainingOptions {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            mode: ChainingMode::Standard,
            i_max: None,
            probes: ProbeSet::All,
            pair_budget: DEFAULT_PAIR_BUDGET,
            pathwise: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainingReport {
    pub d: usize,
    pub m_max: u32,
    pub n_rep: usize,
    pub n_time: usize,
    pub alpha: f64,
    pub mode: ChainingMode,
    pub i_max: u32,
    pub c_d: f64,
    pub probe_pairs: usize,
    pub k: LevelIncrements,
    /// Grid suprema; lower bounds for the continuum seminorm.
    pub seminorm_empirical: Vec<f64>,
    pub seminorm_per_time: Vec<f64>,
    /// `[replication][time]`.
    pub chain_bound: Vec<f64>,
    /// Per `(replication, time)`: seminorm (to the power `γ` in power mode)
    /// is at most the chaining bound.
    pub seminorm_within_bound: Vec<bool>,
    pub pathwise: Option<PathwiseCheck>,
}

impl ChainingReport {
    pub fn all_within_bound(&self) -> bool {
        self.seminorm_within_bound.iter().all(|&b| b)
            && self.pathwise.as_ref().is_none_or(|p| p.holds())
    }

    /// CSV with columns `replication, time_index, seminorm, bound, within`.
    pub fn write_bound_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["replication", "time_index", "seminorm", "bound", "within"])?;
        for rep in 0..self.n_rep {
            for t in 0..self.n_time {
                let k = rep * self.n_time + t;
                out.write_record([
                    rep.to_string(),
                    t.to_string(),
                    format!("{:e}", self.seminorm_per_time[k]),
                    format!("{:e}", self.chain_bound[k]),
                    self.seminorm_within_bound[k].to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub fn chaining_report(
    field: &FieldSample,
    phi: &ModulusFunction,
    opts: &ChainingOptions,
) -> Result<ChainingReport> {
    let i_max = opts.i_max.unwrap_or(field.m_max());
    if i_max > field.m_max() {
        return Err(Error::GridMismatch(format!(
            "i_max {i_max} exceeds m_max {}",
            field.m_max()
        )));
    }
    let grid = field.grid();
    let probes = ProbePairs::build(&grid, opts.probes, opts.pair_budget)?;
    let k = level_increments(field);
    let semi = seminorm(field, phi, opts.alpha, &probes)?;
    let bound = chaining_bound(&k, phi, opts.alpha, field.d(), i_max, opts.mode)?;
    let g = opts.mode.exponent();
    let within = semi
        .per_time
        .iter()
        .zip(&bound)
        .map(|(&s, &b)| if g == 1.0 { s <= b } else { s.powf(g) <= b })
        .collect();
    let pathwise = if opts.pathwise {
        Some(pathwise_check(field, &k, &probes, opts.mode)?)
    } else {
        None
    };
    Ok(ChainingReport {
        d: field.d(),
        m_max: field.m_max(),
        n_rep: field.n_rep(),
        n_time: field.n_time(),
        alpha: opts.alpha,
        mode: opts.mode,
        i_max,
        c_d: chain_constant(phi, opts.alpha, field.d(), i_max, opts.mode)?,
        probe_pairs: probes.len(),
        k,
        seminorm_empirical: semi.per_replication,
        seminorm_per_time: semi.per_time,
        chain_bound: bound,
        seminorm_within_bound: within,
        pathwise,
    })
}
