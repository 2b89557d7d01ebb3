use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use kolmo_core::chaining::{
    ChainingMode, FieldConfig, MomentOptions, ProbeSet, DEFAULT_PAIR_BUDGET,
};
use kolmo_core::kernel::KernelSpec;
use kolmo_core::levy::{IntegrandSpec, LevyConfig, MarkFactor, TimeFactor};
use kolmo_core::modulus::{ModulusSpec, TailMethod};
use kolmo_core::spde::{
    ForcingSpec, HolderCheckOptions, ModulusCheckOptions, SolverOptions, SpdeConfig,
};

use crate::output::{CliError, SCHEMA_VERSION};

pub trait Versioned {
    fn schema_version(&self) -> u32;
}

/// Reads and parses a config, rejecting unknown keys and other schema
/// versions.
pub fn load<T: DeserializeOwned + Versioned>(path: &Path) -> Result<T, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: T = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))?;
    if cfg.schema_version() != SCHEMA_VERSION {
        return Err(CliError::usage(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            cfg.schema_version()
        )));
    }
    Ok(cfg)
}

macro_rules! versioned {
    ($($t:ty),*) => {
        $(impl Versioned for $t {
            fn schema_version(&self) -> u32 {
                self.schema_version
            }
        })*
    };
}

versioned!(
    ModulusCheckConfig,
    ChainConfig,
    LevyVerifyConfig,
    SpdeRunConfig
);

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusCheckConfig {
    pub schema_version: u32,
    pub modulus: ModulusSpec,
    pub gamma: f64,
    /// Defaults to the midpoint of the admissible window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_method: Option<TailMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_range: Option<(u32, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub schema_version: u32,
    pub field: FieldConfig,
    #[serde(default)]
    pub seed: u64,
    pub modulus: ModulusSpec,
    /// Moment exponent `γ`; the seminorm exponent is `1/γ − ϑ`.
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default)]
    pub mode: ChainingMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_max: Option<u32>,
    #[serde(default)]
    pub probes: ProbeSet,
    #[serde(default = "default_pair_budget")]
    pub pair_budget: usize,
    #[serde(default = "yes")]
    pub pathwise: bool,
    #[serde(default)]
    pub moment: MomentOptions,
}

fn default_pair_budget() -> usize {
    DEFAULT_PAIR_BUDGET
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyVerifyConfig {
    pub schema_version: u32,
    pub levy: LevyConfig,
    #[serde(default = "unit_integrand")]
    pub integrand: IntegrandSpec,
    #[serde(default = "default_moments")]
    pub p: Vec<f64>,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
}

fn unit_integrand() -> IntegrandSpec {
    IntegrandSpec {
        time: TimeFactor::constant(1.0),
        mark: MarkFactor::One,
    }
}

fn default_moments() -> Vec<f64> {
    vec![1.0, 2.0, 3.0]
}

/// Moment exponent and Hölder parameters for the `modulus` report set;
/// unset values come from the forcing's certificate.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpdeChecks {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<ModulusCheckOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder: Option<HolderCheckOptions>,
    /// Replications of the sup-over-space moment report, which needs no
    /// PDE solves.
    #[serde(default = "default_kunita_replications")]
    pub kunita_replications: usize,
}

impl Default for SpdeChecks {
    fn default() -> Self {
        Self {
            p: None,
            theta: None,
            beta: None,
            modulus: None,
            holder: None,
            kunita_replications: default_kunita_replications(),
        }
    }
}

fn default_kunita_replications() -> usize {
    100_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpdeRunConfig {
    pub schema_version: u32,
    pub kernel: KernelSpec,
    pub levy: LevyConfig,
    pub forcing: ForcingSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_c1")]
    pub c1: f64,
    #[serde(default)]
    pub solver: SolverOptions,
    /// Number of leading replications written to `field.csv`.
    #[serde(default = "default_export_paths")]
    pub export_paths: usize,
    #[serde(default)]
    pub checks: SpdeChecks,
}

fn default_c1() -> f64 {
    1.0
}

fn default_export_paths() -> usize {
    10
}

impl SpdeRunConfig {
    pub fn default_experiment() -> Self {
        let base = SpdeConfig::default_eigen(2.0);
        Self {
            schema_version: SCHEMA_VERSION,
            kernel: base.kernel,
            levy: base.levy,
            forcing: base.forcing,
            times: base.times,
            replications: base.replications,
            seed: base.seed,
            c1: base.c1,
            solver: base.solver,
            export_paths: default_export_paths(),
            checks: SpdeChecks::default(),
        }
    }

    pub fn experiment(&self) -> SpdeConfig {
        SpdeConfig {
            kernel: self.kernel,
            levy: self.levy.clone(),
            forcing: self.forcing.clone(),
            times: self.times.clone(),
            replications: self.replications,
            seed: self.seed,
            c1: self.c1,
            solver: self.solver,
        }
    }
}
