use serde::{Deserialize, Serialize};

use super::forcing::ForcingSpec;
use super::solver::{Ensemble, MildSolver, SolverOptions};
use crate::kernel::{KernelMethod, KernelSpec};
use crate::levy::LevyConfig;
use crate::{Error, Result};

/// Default number of evaluation times on `[0, T]`.
pub const DEFAULT_TIME_POINTS: usize = 65;

/// `n` equally spaced times on `[0, horizon]`, both ends included.
pub fn uniform_times(horizon: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![horizon];
    }
    (0..n)
        .map(|k| horizon * k as f64 / (n - 1) as f64)
        .collect()
}

/// Experiment configuration: `{kernel, levy, forcing, times, replications, seed}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpdeConfig {
    pub kernel: KernelSpec,
    pub levy: LevyConfig,
    pub forcing: ForcingSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    pub replications: usize,
    pub seed: u64,
    /// Radius of the probe ball.
    #[serde(default = "default_c1")]
    pub c1: f64,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn default_c1() -> f64 {
    1.0
}

impl SpdeConfig {
    /// `d = 1`, `T = 1`, `ν` uniform on `(0, 1)` with mass 2, `n = 1024`,
    /// `L = 10π`, `c1 = 1`, forcing `v sin(x)`.
    pub fn default_eigen(alpha: f64) -> Self {
        Self {
            kernel: KernelSpec::new(
                alpha,
                1,
                10.0 * std::f64::consts::PI,
                1024,
                KernelMethod::SpectralInversion,
            ),
            levy: LevyConfig::uniform(2.0, 1.0, 1.0),
            forcing: ForcingSpec::Eigen,
            times: None,
            replications: 1000,
            seed: 20_240_601,
            c1: 1.0,
            solver: SolverOptions::default(),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.times
            .clone()
            .unwrap_or_else(|| uniform_times(self.levy.horizon, DEFAULT_TIME_POINTS))
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.levy.validate()?;
        if !(self.c1 > 0.0 && self.kernel.extent >= 8.0 * self.c1) {
            return Err(Error::invalid(format!(
                "the torus must be at least 8 c1 wide (L = {}, c1 = {})",
                self.kernel.extent, self.c1
            )));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications must be positive"));
        }
        let times = self.times();
        if times.is_empty() || times.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("times must be a nonempty sorted list"));
        }
        if times
            .iter()
            .any(|t| !(*t >= 0.0 && *t <= self.levy.horizon))
        {
            return Err(Error::invalid("times must lie in [0, T]"));
        }
        Ok(())
    }

    pub fn solver(&self) -> Result<MildSolver> {
        self.validate()?;
        MildSolver::new(
            self.kernel,
            self.levy.clone(),
            self.forcing.build()?,
            self.solver,
        )
    }

    pub fn ensemble(&self) -> Result<Ensemble> {
        Ok(Ensemble::new(
            self.solver()?,
            self.times(),
            self.replications,
            self.seed,
        ))
    }
}
