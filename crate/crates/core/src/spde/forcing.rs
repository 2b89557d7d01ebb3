use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::levy::{LevyConfig, MarkFactor, SpaceProfile, TimeFactor};
use crate::modulus::ModulusFunction;
use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

/// `g(t, v, x)`.
pub type ForcingFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;
/// `h(t, v)`.
pub type WeightFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// Spatial modulus certificate
/// `|g(t,v,x) − g(t,v,y)| ≤ h(t,v) |x−y|^{d/p} φ^{1/p}(|x−y|)`.
#[derive(Clone)]
pub struct Certificate {
    pub p: f64,
    pub phi: ModulusFunction,
    pub h: WeightFn,
}

impl fmt::Debug for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Certificate {{ p: {}, phi: {:?} }}",
            self.p,
            self.phi.to_spec()
        )
    }
}

impl Certificate {
    pub fn new(
        p: f64,
        phi: ModulusFunction,
        h: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::invalid(format!(
                "certificate exponent p must be at least 1, got {p}"
            )));
        }
        Ok(Self {
            p,
            phi,
            h: Arc::new(h),
        })
    }

    /// A Lipschitz bound `h(t,v)|x − y|` written as `p = d + 1`, `φ(r) = r`.
    pub fn lipschitz(
        d: usize,
        h: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(d as f64 + 1.0, ModulusFunction::power(1.0)?, h)
    }

    /// `|x−y|^{d/p} φ^{1/p}(|x−y|)`.
    pub fn spatial_factor(&self, d: usize, dist: f64) -> Result<f64> {
        if dist == 0.0 {
            return Ok(0.0);
        }
        Ok(dist.powf(d as f64 / self.p) * self.phi.eval(dist)?.powf(1.0 / self.p))
    }

    pub fn bound(&self, t: f64, v: &[f64], d: usize, dist: f64) -> Result<f64> {
        Ok((self.h)(t, v) * self.spatial_factor(d, dist)?)
    }

    fn same_shape(&self, other: &Certificate) -> bool {
        self.p == other.p
            && self.phi.to_spec().is_some()
            && self.phi.to_spec() == other.phi.to_spec()
    }
}

/// Deterministic forcing `g(t, v, x)` of the mild equation, with arguments
/// fixed in the order time, mark, space.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    /// `time(t) · mark(v) · space(x)`.
    Separable {
        time: TimeFactor,
        mark: MarkFactor,
        space: SpaceProfile,
    },
    /// `Σ w_i g_i`.
    Combination(Vec<(f64, Forcing)>),
    Custom {
        name: String,
        g: ForcingFn,
        certificate: Option<Certificate>,
    },
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// Largest `|s'|` for the built-in profiles.
fn profile_lipschitz(space: &SpaceProfile) -> Option<f64> {
    match space {
        SpaceProfile::Constant(_) => Some(0.0),
        SpaceProfile::Sine { freq, .. } => Some(freq.abs()),
        SpaceProfile::Gaussian { width } => Some((-0.5f64).exp() / width),
        SpaceProfile::Custom { .. } => None,
    }
}

impl Forcing {
    /// `g(t, v, x) = v sin(x_0)`.
    pub fn eigen() -> Self {
        Forcing::Separable {
            time: TimeFactor::constant(1.0),
            mark: MarkFactor::Identity,
            space: SpaceProfile::Sine {
                freq: 1.0,
                phase: 0.0,
            },
        }
    }

    pub fn custom(
        name: impl Into<String>,
        g: impl Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Forcing::Custom {
            name: name.into(),
            g: Arc::new(g),
            certificate: None,
        }
    }

    pub fn with_certificate(self, cert: Certificate) -> Result<Self> {
        match self {
            Forcing::Custom { name, g, .. } => Ok(Forcing::Custom {
                name,
                g,
                certificate: Some(cert),
            }),
            _ => Err(Error::invalid(
                "only custom forcings take a declared certificate",
            )),
        }
    }

    pub fn eval(&self, t: f64, v: &[f64], x: &[f64]) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Separable { time, mark, space } => time.eval(t) * mark.eval(v) * space.eval(x),
            Forcing::Combination(terms) => terms.iter().map(|(w, g)| w * g.eval(t, v, x)).sum(),
            Forcing::Custom { g, .. } => g(t, v, x),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Forcing::Zero => "zero".into(),
            Forcing::Separable { time, mark, space } => {
                format!("separable({time:?}, {mark:?}, {space:?})")
            }
            Forcing::Combination(terms) => {
                let parts: Vec<String> = terms
                    .iter()
                    .map(|(w, g)| format!("{w}*{}", g.describe()))
                    .collect();
                format!("combination[{}]", parts.join(" + "))
            }
            Forcing::Custom { name, .. } => format!("custom({name})"),
        }
    }

    /// Built-in profiles carry a Lipschitz certificate; combinations combine
    /// certificates of equal shape; custom forcings return what was declared.
    pub fn certificate(&self, d: usize) -> Option<Certificate> {
        match self {
            Forcing::Zero => Certificate::lipschitz(d, |_, _| 0.0).ok(),
            Forcing::Separable { time, mark, space } => {
                let lip = profile_lipschitz(space)?;
                let (time, mark) = (*time, *mark);
                Certificate::lipschitz(d, move |t, v| (time.eval(t) * mark.eval(v)).abs() * lip)
                    .ok()
            }
            Forcing::Combination(terms) => {
                let certs: Vec<(f64, Certificate)> = terms
                    .iter()
                    .map(|(w, g)| g.certificate(d).map(|c| (*w, c)))
                    .collect::<Option<_>>()?;
                let first = certs.first().map(|(_, c)| c.clone())?;
                if !certs.iter().all(|(_, c)| c.same_shape(&first)) {
                    return None;
                }
                let hs: Vec<(f64, WeightFn)> =
                    certs.into_iter().map(|(w, c)| (w.abs(), c.h)).collect();
                Some(Certificate {
                    p: first.p,
                    phi: first.phi,
                    h: Arc::new(move |t, v| hs.iter().map(|(w, h)| w * h(t, v)).sum()),
                })
            }
            Forcing::Custom { certificate, .. } => certificate.clone(),
        }
    }

    /// `∫_0^T ∫_E ‖g(r, v, ·)‖_∞ ν(dv) dr` with the sup taken over `points`.
    /// Exact for separable forcings; for combinations the triangle-inequality
    /// upper bound; for custom forcings a Gauss–Legendre time–mark rule.
    pub fn sup_intensity(&self, cfg: &LevyConfig, points: &[Vec<f64>]) -> Result<f64> {
        let mass = cfg.nu.total_mass;
        match self {
            Forcing::Zero => Ok(0.0),
            Forcing::Separable { time, mark, space } => Ok(space.grid_sup(points)
                * time.abs_power_integral(cfg.horizon, 1.0)
                * mass
                * mark.abs_moment(cfg, 1.0)?),
            Forcing::Combination(terms) => terms
                .iter()
                .map(|(w, g)| Ok(w.abs() * g.sup_intensity(cfg, points)?))
                .sum(),
            Forcing::Custom { g, .. } => {
                let marks = cfg.mark_rule(32).ok_or_else(|| {
                    Error::invalid("custom forcing needs a one-dimensional mark law")
                })?;
                let gl = GaussLegendre::get(16);
                let total = gl.integrate(0.0, cfg.horizon, |r| {
                    marks
                        .iter()
                        .map(|(v, w)| {
                            w * points.iter().map(|x| g(r, v, x).abs()).fold(0.0, f64::max)
                        })
                        .sum::<f64>()
                });
                Ok(mass * total)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Forcing::Zero => true,
            Forcing::Combination(terms) => terms.iter().all(|(w, g)| *w == 0.0 || g.is_zero()),
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    Constant {
        value: f64,
    },
    Sine {
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    Gaussian {
        width: f64,
    },
}

impl From<SpaceSpec> for SpaceProfile {
    fn from(s: SpaceSpec) -> Self {
        match s {
            SpaceSpec::Constant { value } => SpaceProfile::Constant(value),
            SpaceSpec::Sine { freq, phase } => SpaceProfile::Sine { freq, phase },
            SpaceSpec::Gaussian { width } => SpaceProfile::Gaussian { width },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedForcing {
    pub weight: f64,
    pub forcing: ForcingSpec,
}

/// JSON form of the built-in forcings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingSpec {
    Zero,
    /// `v sin(x_0)`.
    Eigen,
    Separable {
        time: TimeFactor,
        mark: MarkFactor,
        space: SpaceSpec,
    },
    Combination {
        terms: Vec<WeightedForcing>,
    },
}

impl ForcingSpec {
    pub fn build(&self) -> Result<Forcing> {
        Ok(match self {
            ForcingSpec::Zero => Forcing::Zero,
            ForcingSpec::Eigen => Forcing::eigen(),
            ForcingSpec::Separable { time, mark, space } => {
                if time.exponent <= -1.0 {
                    return Err(Error::invalid("time exponent must exceed -1"));
                }
                Forcing::Separable {
                    time: *time,
                    mark: *mark,
                    space: (*space).into(),
                }
            }
            ForcingSpec::Combination { terms } => Forcing::Combination(
                terms
                    .iter()
                    .map(|t| Ok((t.weight, t.forcing.build()?)))
                    .collect::<Result<_>>()?,
            ),
        })
    }
}
