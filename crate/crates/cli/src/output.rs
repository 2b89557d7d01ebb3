use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use kolmo_core::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// Verdict of a run, ordered from best to worst.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Inconclusive,
    Fail,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 2,
            Status::Inconclusive => 3,
        }
    }

    pub fn worst(self, other: Status) -> Status {
        self.max(other)
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::MassDeficit { .. } => Status::Fail.exit_code(),
            Error::QuadratureFailure(_) | Error::NonFiniteResult(_) | Error::DegenerateFit(_) => {
                Status::Inconclusive.exit_code()
            }
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::usage(format!("i/o error: {e}"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("reports serialise to JSON");
    out.push(b'\n');
    out
}

#[derive(Debug, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema_version: u32,
    pub command: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub status: Status,
    pub exit_code: i32,
    pub outputs: Vec<OutputRecord>,
    pub wall_clock_seconds: f64,
}

/// Output directory of one run; every file written through it is listed in
/// `manifest.json` with its checksum.
pub struct Run {
    out: PathBuf,
    command: String,
    threads: Option<usize>,
    start: Instant,
    outputs: Vec<OutputRecord>,
}

impl Run {
    pub fn new(out: &Path, command: &str, threads: Option<usize>) -> Result<Self, CliError> {
        fs::create_dir_all(out).map_err(|e| {
            CliError::usage(format!(
                "cannot create output directory {}: {e}",
                out.display()
            ))
        })?;
        Ok(Self {
            out: out.to_path_buf(),
            command: command.to_string(),
            threads,
            start: Instant::now(),
            outputs: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.out.join(name), bytes)?;
        self.outputs.push(OutputRecord {
            file: name.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, &json_bytes(value))
    }

    /// Writes the effective config, then the manifest.
    pub fn finish<C: Serialize>(
        mut self,
        config: &C,
        seed: Option<u64>,
        status: Status,
    ) -> Result<Status, CliError> {
        let config = json_bytes(config);
        self.write("config.json", &config)?;
        let manifest = RunManifest {
            tool: "kolmo",
            version: env!("CARGO_PKG_VERSION"),
            schema_version: SCHEMA_VERSION,
            command: self.command,
            config_sha256: sha256_hex(&config),
            seed,
            threads: self.threads,
            status,
            exit_code: status.exit_code(),
            outputs: self.outputs,
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
        };
        fs::write(self.out.join("manifest.json"), json_bytes(&manifest))?;
        Ok(status)
    }
}
