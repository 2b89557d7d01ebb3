use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::grid::DyadicGrid;
use crate::seed::SeedSequence;
use crate::{exec, Error, Result};

/// Norm on the finite-dimensional value space `H = R^h_dim`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Sup,
    L2,
    L1,
}

impl Norm {
    pub fn of_difference(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Norm::Sup => diffs.fold(0.0, f64::max),
            Norm::L2 => diffs.map(|v| v * v).sum::<f64>().sqrt(),
            Norm::L1 => diffs.sum(),
        }
    }

    fn code(self) -> u8 {
        match self {
            Norm::Sup => 0,
            Norm::L2 => 1,
            Norm::L1 => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Norm::Sup),
            1 => Ok(Norm::L2),
            2 => Ok(Norm::L1),
            _ => Err(Error::invalid(format!("unknown norm code {c}"))),
        }
    }
}

/// Values of an `H`-valued field on `D_{m_max} × time_grid`, for each
/// replication. Layout is `[replication][time][point][component]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample {
    d: usize,
    m_max: u32,
    time_grid: Vec<f64>,
    h_dim: usize,
    norm: Norm,
    seed: u64,
    n_rep: usize,
    values: Vec<f64>,
}

impl FieldSample {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d: usize,
        m_max: u32,
        time_grid: Vec<f64>,
        h_dim: usize,
        norm: Norm,
        seed: u64,
        n_rep: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let grid = DyadicGrid::new(d, m_max)?;
        if h_dim == 0 {
            return Err(Error::invalid("h_dim must be at least 1"));
        }
        if time_grid.is_empty() {
            return Err(Error::invalid("time grid is empty"));
        }
        if time_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::invalid("time grid must lie in [0, 1]"));
        }
        if time_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("time grid must be strictly increasing"));
        }
        let expected = n_rep * time_grid.len() * grid.len() * h_dim;
        if values.len() != expected {
            return Err(Error::GridMismatch(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteResult(format!(
                "field value {k} is {}",
                values[k]
            )));
        }
        Ok(Self {
            d,
            m_max,
            time_grid,
            h_dim,
            norm,
            seed,
            n_rep,
            values,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m_max(&self) -> u32 {
        self.m_max
    }

    pub fn grid(&self) -> DyadicGrid {
        DyadicGrid::new(self.d, self.m_max).expect("validated on construction")
    }

    pub fn time_grid(&self) -> &[f64] {
        &self.time_grid
    }

    pub fn n_time(&self) -> usize {
        self.time_grid.len()
    }

    pub fn h_dim(&self) -> usize {
        self.h_dim
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_rep(&self) -> usize {
        self.n_rep
    }

    pub fn n_points(&self) -> usize {
        self.values.len() / (self.n_rep.max(1) * self.time_grid.len() * self.h_dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// All points at one `(replication, time)`.
    pub fn snapshot(&self, rep: usize, time: usize) -> Snapshot<'_> {
        let block = self.n_points() * self.h_dim;
        let start = (rep * self.n_time() + time) * block;
        Snapshot {
            values: &self.values[start..start + block],
            h_dim: self.h_dim,
            norm: self.norm,
        }
    }

    const MAGIC: &'static [u8; 4] = b"KFLD";
    const VERSION: u32 = 1;

    /// Little-endian binary layout: magic, version, d, m_max, time count,
    /// h_dim, replication count, norm code, seed, the time grid, then the
    /// values in storage order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&Self::VERSION.to_le_bytes())?;
        for v in [
            self.d as u64,
            self.m_max as u64,
            self.n_time() as u64,
            self.h_dim as u64,
            self.n_rep as u64,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&[self.norm.code()])?;
        w.write_all(&self.seed.to_le_bytes())?;
        for t in &self.time_grid {
            w.write_all(&t.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::invalid("not a field sample file"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != Self::VERSION {
            return Err(Error::invalid(format!(
                "unsupported field format version {version}"
            )));
        }
        let mut b8 = [0u8; 8];
        let mut header = [0u64; 5];
        for h in &mut header {
            r.read_exact(&mut b8)?;
            *h = u64::from_le_bytes(b8);
        }
        let [d, m_max, n_time, h_dim, n_rep] = header;
        let mut code = [0u8; 1];
        r.read_exact(&mut code)?;
        let norm = Norm::from_code(code[0])?;
        r.read_exact(&mut b8)?;
        let seed = u64::from_le_bytes(b8);
        let m_max = u32::try_from(m_max).map_err(|_| Error::invalid("m_max out of range"))?;
        let grid = DyadicGrid::new(d as usize, m_max)?;
        let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                r.read_exact(&mut b8)?;
                out.push(f64::from_le_bytes(b8));
            }
            Ok(out)
        };
        let time_grid = read_f64s(n_time as usize)?;
        let count = (n_rep as usize)
            .checked_mul(n_time as usize)
            .and_then(|v| v.checked_mul(grid.len()))
            .and_then(|v| v.checked_mul(h_dim as usize))
            .ok_or_else(|| Error::invalid("field header sizes overflow"))?;
        let values = read_f64s(count)?;
        Self::new(
            d as usize,
            m_max,
            time_grid,
            h_dim as usize,
            norm,
            seed,
            n_rep as usize,
            values,
        )
    }
}

/// One `(replication, time)` slice.
#[derive(Clone, Copy, Debug)]
pub struct Snapshot<'a> {
    values: &'a [f64],
    h_dim: usize,
    norm: Norm,
}

impl<'a> Snapshot<'a> {
    pub fn at(&self, point: usize) -> &'a [f64] {
        &self.values[point * self.h_dim..(point + 1) * self.h_dim]
    }

    pub fn increment(&self, a: usize, b: usize) -> f64 {
        if self.h_dim == 1 {
            (self.values[a] - self.values[b]).abs()
        } else {
            self.norm.of_difference(self.at(a), self.at(b))
        }
    }
}

/// Built-in test fields, all frozen in time. Component `k` of a vector field
/// uses coordinate `k mod d` where a coordinate is needed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldGenerator {
    /// `X(x)_k = slope · x_{k mod d}`.
    Linear {
        slope: f64,
    },
    Constant {
        value: f64,
    },
    /// Sum over axes of independent standard Brownian motions `B_a(x_a)`,
    /// each started at zero, independently per component.
    Brownian,
    /// `X(x)_k = ξ_k · x_{k mod d}` with `ξ_k` standard normal.
    ScaledNoise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub d: usize,
    pub m_max: u32,
    #[serde(default = "one")]
    pub time_points: usize,
    #[serde(default = "one")]
    pub h_dim: usize,
    #[serde(default)]
    pub norm: Norm,
    pub replications: usize,
    pub generator: FieldGenerator,
}

fn one() -> usize {
    1
}

/// `n` equally spaced times in `[0, 1]`; `[0]` when `n = 1`.
pub fn uniform_time_grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
}

pub fn generate_field(cfg: &FieldConfig, seed: u64) -> Result<FieldSample> {
    if cfg.replications == 0 {
        return Err(Error::invalid("need at least one replication"));
    }
    if cfg.time_points == 0 {
        return Err(Error::invalid("need at least one time point"));
    }
    let grid = DyadicGrid::new(cfg.d, cfg.m_max)?;
    let seeds = SeedSequence::new(seed);
    let per_rep = exec::map_indexed(cfg.replications, |rep| {
        let frame = generate_frame(cfg, &grid, &mut seeds.rng(rep as u64));
        let mut out = Vec::with_capacity(frame.len() * cfg.time_points);
        for _ in 0..cfg.time_points {
            out.extend_from_slice(&frame);
        }
        out
    });
    let values = per_rep.concat();
    FieldSample::new(
        cfg.d,
        cfg.m_max,
        uniform_time_grid(cfg.time_points),
        cfg.h_dim,
        cfg.norm,
        seed,
        cfg.replications,
        values,
    )
}

/// One replication at one time, `[point][component]`.
fn generate_frame(cfg: &FieldConfig, grid: &DyadicGrid, rng: &mut impl Rng) -> Vec<f64> {
    let (d, h) = (cfg.d, cfg.h_dim);
    let n = grid.len();
    let scale = (-(cfg.m_max as f64)).exp2();
    let mut out = vec![0.0; n * h];
    match cfg.generator {
        FieldGenerator::Constant { value } => out.fill(value),
        FieldGenerator::Linear { slope } => {
            for p in 0..n {
                let num = grid.numerators(p);
                for k in 0..h {
                    out[p * h + k] = slope * num[k % d] as f64 * scale;
                }
            }
        }
        FieldGenerator::ScaledNoise => {
            let xi: Vec<f64> = (0..h).map(|_| rng.sample(StandardNormal)).collect();
            for p in 0..n {
                let num = grid.numerators(p);
                for k in 0..h {
                    out[p * h + k] = xi[k] * num[k % d] as f64 * scale;
                }
            }
        }
        FieldGenerator::Brownian => {
            let side = grid.side();
            let sd = scale.sqrt();
            // paths[k][axis][j] = B^{k,axis}(j 2^{-m})
            let mut paths = vec![vec![vec![0.0; side]; d]; h];
            for comp in paths.iter_mut() {
                for path in comp.iter_mut() {
                    for j in 1..side {
                        let z: f64 = rng.sample(StandardNormal);
                        path[j] = path[j - 1] + sd * z;
                    }
                }
            }
            for p in 0..n {
                let num = grid.numerators(p);
                for (k, comp) in paths.iter().enumerate() {
                    out[p * h + k] = (0..d).map(|a| comp[a][num[a] as usize]).sum();
                }
            }
        }
    }
    out
}
