use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::quadrature::GaussLegendre;
use crate::seed::SeedSequence;
use crate::{Error, Result};

/// Normalised jump law `ν / ν(E)` on `E = B_c(0) \ {0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarkDistribution {
    /// Uniform on `[low, high)`, one-dimensional marks only.
    Uniform {
        low: f64,
        high: f64,
    },
    /// Uniform on the ball of the given radius.
    UniformBall {
        radius: f64,
    },
    PointMass {
        at: Vec<f64>,
    },
    /// Radial density `∝ |v|^{-d-α}` on `eps ≤ |v| < c` with a uniform
    /// direction: a symmetric `α`-stable Lévy measure with its small jumps
    /// truncated at `eps`.
    RadialPowerLaw {
        alpha: f64,
        eps: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    /// `ν(E)`.
    pub total_mass: f64,
    pub dist: MarkDistribution,
}

/// A finite-intensity Poisson random measure on `(0, T] × E`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyConfig {
    /// Radius of the jump ball `E`.
    pub c: f64,
    pub d_jump: usize,
    pub nu: MeasureSpec,
    pub horizon: f64,
    /// Free-form record of how an infinite-activity measure was cut down.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<String>,
}

impl LevyConfig {
    /// `ν` uniform on `(0, high)` with mass `mass`, on the unit ball.
    pub fn uniform(mass: f64, high: f64, horizon: f64) -> Self {
        Self {
            c: high.max(1.0),
            d_jump: 1,
            nu: MeasureSpec {
                total_mass: mass,
                dist: MarkDistribution::Uniform { low: 0.0, high },
            },
            horizon,
            truncation: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        pos("c", self.c)?;
        pos("horizon", self.horizon)?;
        pos("total_mass", self.nu.total_mass)?;
        if self.d_jump == 0 {
            return Err(Error::invalid("d_jump must be at least 1"));
        }
        match &self.nu.dist {
            MarkDistribution::Uniform { low, high } => {
                if self.d_jump != 1 {
                    return Err(Error::invalid("uniform marks are one-dimensional"));
                }
                if !(low < high) || low.abs().max(high.abs()) > self.c {
                    return Err(Error::invalid(format!(
                        "[{low}, {high}) must lie in the ball of radius {}",
                        self.c
                    )));
                }
            }
            MarkDistribution::UniformBall { radius } => {
                pos("radius", *radius)?;
                if *radius > self.c {
                    return Err(Error::invalid("mark ball exceeds the jump space"));
                }
            }
            MarkDistribution::PointMass { at } => {
                if at.len() != self.d_jump {
                    return Err(Error::invalid("point mass dimension differs from d_jump"));
                }
                let r = norm(at);
                if !(r > 0.0 && r < self.c) {
                    return Err(Error::invalid(format!(
                        "point mass norm {r} must lie in (0, c)"
                    )));
                }
            }
            MarkDistribution::RadialPowerLaw { alpha, eps } => {
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return Err(Error::invalid("alpha must lie in (0, 2)"));
                }
                if !(*eps > 0.0 && *eps < self.c) {
                    return Err(Error::invalid("eps must lie in (0, c)"));
                }
            }
        }
        Ok(())
    }

    /// Expected number of atoms, `ν(E) · T`.
    pub fn intensity(&self) -> f64 {
        self.nu.total_mass * self.horizon
    }

    /// `E|v|^q` under the normalised mark law.
    pub fn norm_moment(&self, q: f64) -> f64 {
        let k = self.d_jump as f64;
        match &self.nu.dist {
            MarkDistribution::Uniform { low, high } => {
                abs_power_integral(*low, *high, q) / (high - low)
            }
            MarkDistribution::UniformBall { radius } => k * radius.powf(q) / (k + q),
            MarkDistribution::PointMass { at } => norm(at).powf(q),
            MarkDistribution::RadialPowerLaw { alpha, eps } => {
                radial_integral(*eps, self.c, q - alpha) / radial_integral(*eps, self.c, -alpha)
            }
        }
    }

    /// `E[v]` for one-dimensional marks.
    pub fn mean_mark(&self) -> Option<f64> {
        if self.d_jump != 1 {
            return None;
        }
        Some(match &self.nu.dist {
            MarkDistribution::Uniform { low, high } => 0.5 * (low + high),
            MarkDistribution::PointMass { at } => at[0],
            MarkDistribution::UniformBall { .. } | MarkDistribution::RadialPowerLaw { .. } => 0.0,
        })
    }

    /// Probability-weighted quadrature points for the mark law, available
    /// for one-dimensional laws and point masses.
    pub fn mark_rule(&self, n: usize) -> Option<Vec<(Vec<f64>, f64)>> {
        let gl = GaussLegendre::get(n);
        let uniform = |a: f64, b: f64| -> Vec<(Vec<f64>, f64)> {
            let len = b - a;
            let mut out = Vec::new();
            let mut piece = |lo: f64, hi: f64| {
                for (x, w) in gl.mapped(lo, hi) {
                    out.push((vec![x], w / len));
                }
            };
            if a < 0.0 && b > 0.0 {
                piece(a, 0.0);
                piece(0.0, b);
            } else {
                piece(a, b);
            }
            out
        };
        match &self.nu.dist {
            MarkDistribution::PointMass { at } => Some(vec![(at.clone(), 1.0)]),
            MarkDistribution::Uniform { low, high } => Some(uniform(*low, *high)),
            MarkDistribution::UniformBall { radius } if self.d_jump == 1 => {
                Some(uniform(-radius, *radius))
            }
            MarkDistribution::RadialPowerLaw { alpha, eps } if self.d_jump == 1 => {
                // u = r^{-α} is uniform on [c^{-α}, eps^{-α}].
                let (u_lo, u_hi) = (self.c.powf(-alpha), eps.powf(-alpha));
                let mut out = Vec::new();
                for (u, w) in gl.mapped(u_lo, u_hi) {
                    let r = u.powf(-1.0 / alpha);
                    let w = 0.5 * w / (u_hi - u_lo);
                    out.push((vec![r], w));
                    out.push((vec![-r], w));
                }
                Some(out)
            }
            _ => None,
        }
    }

    fn sample_mark(&self, rng: &mut impl Rng) -> Vec<f64> {
        match &self.nu.dist {
            MarkDistribution::Uniform { low, high } => loop {
                let v = rng.random_range(*low..*high);
                if v != 0.0 {
                    return vec![v];
                }
            },
            MarkDistribution::UniformBall { radius } => loop {
                let dir = unit_vector(self.d_jump, rng);
                let u: f64 = rng.random();
                let r = radius * u.powf(1.0 / self.d_jump as f64);
                if r > 0.0 {
                    return dir.into_iter().map(|x| x * r).collect();
                }
            },
            MarkDistribution::PointMass { at } => at.clone(),
            MarkDistribution::RadialPowerLaw { alpha, eps } => {
                let dir = unit_vector(self.d_jump, rng);
                let (u_lo, u_hi) = (self.c.powf(-alpha), eps.powf(-alpha));
                let u: f64 = rng.random();
                let r = (u_hi - u * (u_hi - u_lo)).powf(-1.0 / alpha);
                dir.into_iter().map(|x| x * r).collect()
            }
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit_vector(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    if d == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&g);
        if n > 0.0 {
            return g.into_iter().map(|x| x / n).collect();
        }
    }
}

/// `∫_a^b |v|^q dv`.
fn abs_power_integral(a: f64, b: f64, q: f64) -> f64 {
    let f = |x: f64| x.signum() * x.abs().powf(q + 1.0) / (q + 1.0);
    f(b) - f(a)
}

/// `∫_eps^c r^{s-1} dr`.
fn radial_integral(eps: f64, c: f64, s: f64) -> f64 {
    if s.abs() < 1e-12 {
        (c / eps).ln()
    } else {
        (c.powf(s) - eps.powf(s)) / s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub t: f64,
    pub v: Vec<f64>,
}

/// Atoms of one realisation, sorted by time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonMeasureSample {
    pub atoms: Vec<Atom>,
    pub horizon: f64,
    pub seed: u64,
    pub replication: u64,
}

impl PoissonMeasureSample {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Number of atoms with `t ∈ (a, b]`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        self.atoms.iter().filter(|x| x.t > a && x.t <= b).count()
    }

    /// CSV with columns `t, v0, v1, …`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let dim = self.atoms.first().map_or(1, |a| a.v.len());
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((0..dim).map(|k| format!("v{k}")));
        out.write_record(&header)?;
        for a in &self.atoms {
            let mut row = vec![format!("{:e}", a.t)];
            row.extend(a.v.iter().map(|x| format!("{x:e}")));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Exact simulation: a Poisson(`ν(E) T`) count, times uniform on `(0, T]`,
/// i.i.d. marks.
pub fn sample_prm(config: &LevyConfig, rng: &mut impl Rng) -> Result<Vec<Atom>> {
    config.validate()?;
    let lambda = config.intensity();
    let count = Poisson::new(lambda)
        .map_err(|e| Error::invalid(format!("Poisson intensity {lambda}: {e}")))?
        .sample(rng) as usize;
    let mut times: Vec<f64> = (0..count)
        .map(|_| config.horizon * (1.0 - rng.random::<f64>()))
        .collect();
    times.sort_by(f64::total_cmp);
    Ok(times
        .into_iter()
        .map(|t| Atom {
            t,
            v: config.sample_mark(rng),
        })
        .collect())
}

/// Replication `index` of the stream keyed by `seed`.
pub fn sample_prm_seeded(
    config: &LevyConfig,
    seed: u64,
    index: u64,
) -> Result<PoissonMeasureSample> {
    let atoms = sample_prm(config, &mut SeedSequence::new(seed).rng(index))?;
    Ok(PoissonMeasureSample {
        atoms,
        horizon: config.horizon,
        seed,
        replication: index,
    })
}
