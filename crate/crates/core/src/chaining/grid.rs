use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default cap on the number of grid points a caller may materialise.
pub const DEFAULT_POINT_BUDGET: u128 = 1 << 24;

/// A point of `D_level`, stored as integer numerators over `2^level`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicPoint {
    level: u32,
    numerators: Vec<u64>,
}

impl DyadicPoint {
    pub fn new(level: u32, numerators: Vec<u64>) -> Result<Self> {
        if level > 62 {
            return Err(Error::invalid(format!("level {level} exceeds 62")));
        }
        if numerators.is_empty() {
            return Err(Error::invalid("a point needs at least one coordinate"));
        }
        let top = 1u64 << level;
        if let Some(n) = numerators.iter().find(|&&n| n > top) {
            return Err(Error::invalid(format!(
                "numerator {n} lies outside [0, 2^{level}]"
            )));
        }
        Ok(Self { level, numerators })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn numerators(&self) -> &[u64] {
        &self.numerators
    }

    pub fn dim(&self) -> usize {
        self.numerators.len()
    }

    pub fn coords(&self) -> Vec<f64> {
        let scale = (-(self.level as f64)).exp2();
        self.numerators.iter().map(|&n| n as f64 * scale).collect()
    }

    /// The same point expressed at a finer level.
    pub fn refine(&self, level: u32) -> Result<Self> {
        if level < self.level {
            return Err(Error::invalid(format!(
                "cannot refine level {} to {level}",
                self.level
            )));
        }
        let shift = level - self.level;
        Self::new(level, self.numerators.iter().map(|&n| n << shift).collect())
    }

    pub fn distance(&self, other: &DyadicPoint) -> f64 {
        let level = self.level.max(other.level);
        let a = self.refine(level).expect("refining to a finer level");
        let b = other.refine(level).expect("refining to a finer level");
        let sq: f64 = a
            .numerators
            .iter()
            .zip(&b.numerators)
            .map(|(&x, &y)| {
                let diff = x.abs_diff(y) as f64;
                diff * diff
            })
            .sum();
        sq.sqrt() * (-(level as f64)).exp2()
    }
}

/// The lattice `D_m = {2^{-m} i : i ∈ [0, 2^m]^d}` in lexicographic order,
/// the last axis varying fastest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicGrid {
    d: usize,
    m: u32,
}

impl DyadicGrid {
    pub fn new(d: usize, m: u32) -> Result<Self> {
        Self::with_budget(d, m, DEFAULT_POINT_BUDGET)
    }

    pub fn with_budget(d: usize, m: u32, budget: u128) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if m > 40 {
            return Err(Error::invalid(format!("level {m} is too deep")));
        }
        let side = (1u128 << m) + 1;
        let requested = side.checked_pow(d as u32).unwrap_or(u128::MAX);
        if requested > budget {
            return Err(Error::BudgetExceeded { requested, budget });
        }
        Ok(Self { d, m })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn level(&self) -> u32 {
        self.m
    }

    /// Points per axis, `2^m + 1`.
    pub fn side(&self) -> usize {
        (1usize << self.m) + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index offset between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.side().pow((self.d - 1 - axis) as u32)
    }

    pub fn numerators(&self, index: usize) -> Vec<u64> {
        let side = self.side();
        let mut rest = index;
        let mut out = vec![0u64; self.d];
        for axis in (0..self.d).rev() {
            out[axis] = (rest % side) as u64;
            rest /= side;
        }
        out
    }

    pub fn index_of(&self, numerators: &[u64]) -> Result<usize> {
        if numerators.len() != self.d {
            return Err(Error::invalid("point dimension does not match the grid"));
        }
        let side = self.side();
        let mut idx = 0usize;
        for &n in numerators {
            if n as usize >= side {
                return Err(Error::invalid(format!("numerator {n} is off the grid")));
            }
            idx = idx * side + n as usize;
        }
        Ok(idx)
    }

    pub fn point(&self, index: usize) -> DyadicPoint {
        DyadicPoint {
            level: self.m,
            numerators: self.numerators(index),
        }
    }

    pub fn coords(&self, index: usize) -> Vec<f64> {
        self.point(index).coords()
    }

    pub fn points(&self) -> impl Iterator<Item = DyadicPoint> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Indices (in this grid) of the points of the coarser lattice `D_level`.
    pub fn sublattice(&self, level: u32) -> Vec<usize> {
        assert!(level <= self.m);
        let step = 1usize << (self.m - level);
        let coarse_side = (1usize << level) + 1;
        let count = coarse_side.pow(self.d as u32);
        let mut out = Vec::with_capacity(count);
        let mut digits = vec![0usize; self.d];
        for _ in 0..count {
            let idx = digits
                .iter()
                .enumerate()
                .map(|(axis, &c)| c * step * self.stride(axis))
                .sum();
            out.push(idx);
            for axis in (0..self.d).rev() {
                digits[axis] += 1;
                if digits[axis] < coarse_side {
                    break;
                }
                digits[axis] = 0;
            }
        }
        out
    }
}

pub fn build_grid(d: usize, m: u32) -> Result<DyadicGrid> {
    DyadicGrid::new(d, m)
}

/// The axis-aligned nearest-neighbour pairs `Δ_m` of a grid, produced lazily
/// as `(a, b, axis)` index triples with `b = a + stride(axis)`.
#[derive(Clone, Copy, Debug)]
pub struct NeighborPairs {
    grid: DyadicGrid,
}

impl NeighborPairs {
    pub fn level(&self) -> u32 {
        self.grid.m
    }

    /// `d · 2^m · (2^m + 1)^{d-1}`.
    pub fn count(&self) -> usize {
        let side = self.grid.side();
        self.grid.d * (side - 1) * side.pow(self.grid.d as u32 - 1)
    }

    /// The crude count bound `d · 2^{(m+1)d}`.
    pub fn count_bound(&self) -> u128 {
        self.grid.d as u128 * (1u128 << ((self.grid.m as u128 + 1) * self.grid.d as u128))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let grid = self.grid;
        let side = grid.side();
        (0..grid.d).flat_map(move |axis| {
            let stride = grid.stride(axis);
            (0..grid.len())
                .filter(move |&i| (i / stride) % side < side - 1)
                .map(move |i| (i, i + stride, axis))
        })
    }
}

pub fn neighbor_pairs(grid: &DyadicGrid) -> NeighborPairs {
    NeighborPairs { grid: *grid }
}

/// Componentwise `⌊2^m x⌋ / 2^m`.
pub fn dyadic_approximation(x: &[f64], m: u32) -> Result<DyadicPoint> {
    if let Some(bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!(
            "coordinate {bad} lies outside [0, 1]"
        )));
    }
    let scale = (m as f64).exp2();
    let top = 1u64 << m;
    DyadicPoint::new(
        m,
        x.iter()
            .map(|&v| ((v * scale).floor() as u64).min(top))
            .collect(),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: DyadicPoint,
    pub to: DyadicPoint,
    pub axis: usize,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.from.distance(&self.to)
    }
}

/// Walks from `a` to `b` one axis at a time through nearest neighbours of
/// their common level. Needs every coordinate to differ by at most one
/// grid step.
pub fn chain_path(a: &DyadicPoint, b: &DyadicPoint) -> Result<Vec<Segment>> {
    if a.dim() != b.dim() {
        return Err(Error::invalid("points have different dimensions"));
    }
    let level = a.level.max(b.level);
    let (a, b) = (a.refine(level)?, b.refine(level)?);
    if let Some(axis) = (0..a.dim()).find(|&k| a.numerators[k].abs_diff(b.numerators[k]) > 1) {
        return Err(Error::NotReachable(format!(
            "coordinate {axis} differs by {} steps at level {level}",
            a.numerators[axis].abs_diff(b.numerators[axis])
        )));
    }
    let mut path = Vec::new();
    let mut here = a;
    for axis in 0..here.dim() {
        if here.numerators[axis] != b.numerators[axis] {
            let mut next = here.clone();
            next.numerators[axis] = b.numerators[axis];
            path.push(Segment {
                from: here,
                to: next.clone(),
                axis,
            });
            here = next;
        }
    }
    Ok(path)
}
