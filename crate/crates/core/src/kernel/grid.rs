use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest number of points a periodic grid may hold.
pub const MAX_GRID_POINTS: usize = 1 << 24;

/// Uniform periodic grid on `[-L/2, L/2)^d` with `n` points per axis,
/// `x_k = -L/2 + k h`, `h = L/n`, flattened with the last axis fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    pub d: usize,
    pub extent: f64,
    pub n: usize,
}

impl PeriodicGrid {
    pub fn new(d: usize, extent: f64, n: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::invalid(format!(
                "spectral grids support d in 1..=3, got {d}"
            )));
        }
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::invalid(format!("n must be a power of two, got {n}")));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::invalid(format!(
                "extent must be positive, got {extent}"
            )));
        }
        match n.checked_pow(d as u32) {
            Some(total) if total <= MAX_GRID_POINTS => Ok(Self { d, extent, n }),
            _ => Err(Error::BudgetExceeded {
                requested: (n as u128).pow(d as u32),
                budget: MAX_GRID_POINTS as u128,
            }),
        }
    }

    pub fn step(&self) -> f64 {
        self.extent / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element `h^d`.
    pub fn cell(&self) -> f64 {
        self.step().powi(self.d as i32)
    }

    pub fn coordinate(&self, k: usize) -> f64 {
        -0.5 * self.extent + k as f64 * self.step()
    }

    pub fn multi_index(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.d];
        for axis in (0..self.d).rev() {
            out[axis] = index % self.n;
            index /= self.n;
        }
        out
    }

    pub fn point(&self, index: usize) -> Vec<f64> {
        self.multi_index(index)
            .into_iter()
            .map(|k| self.coordinate(k))
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Signed wave number of FFT bin `k` along one axis.
    pub fn wave_number(&self, k: usize) -> f64 {
        let signed = if k <= self.n / 2 {
            k as f64
        } else {
            k as f64 - self.n as f64
        };
        std::f64::consts::TAU * signed / self.extent
    }

    /// `|ξ|` for every flattened FFT bin.
    pub fn frequency_norms(&self) -> Vec<f64> {
        let axis: Vec<f64> = (0..self.n).map(|k| self.wave_number(k)).collect();
        (0..self.len())
            .map(|i| {
                self.multi_index(i)
                    .into_iter()
                    .map(|k| axis[k] * axis[k])
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// `(-1)^{Σ k}` per flattened bin: the phase of the shift by `L/2`.
    pub fn shift_signs(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                if self.multi_index(i).into_iter().sum::<usize>() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect()
    }

    /// Indices of the points with some `|x_a| ≥ 3L/8`.
    pub fn is_boundary(&self, index: usize) -> bool {
        let edge = 0.375 * self.extent;
        self.multi_index(index)
            .into_iter()
            .any(|k| self.coordinate(k).abs() >= edge - 1e-12 * self.extent)
    }

    /// `(mass, boundary mass)` of a density sampled on this grid.
    pub fn masses(&self, values: &[f64]) -> (f64, f64) {
        let cell = self.cell();
        let mut total = Vec::with_capacity(values.len());
        let mut boundary = Vec::new();
        for (i, v) in values.iter().enumerate() {
            total.push(*v);
            if self.is_boundary(i) {
                boundary.push(v.abs());
            }
        }
        (
            cell * crate::stats::pairwise_sum(&total),
            cell * crate::stats::pairwise_sum(&boundary),
        )
    }
}

/// Unnormalised `d`-dimensional FFT on a flattened `n^d` array; the inverse
/// uses `e^{+2πi jk/n}`.
pub fn fft_nd(data: &mut [Complex64], n: usize, d: usize, inverse: bool) {
    assert_eq!(data.len(), n.pow(d as u32));
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        if stride == 1 {
            for chunk in data.chunks_exact_mut(n) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            continue;
        }
        let block = stride * n;
        for start in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout() {
        let g = PeriodicGrid::new(2, 4.0, 4).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g.point(0), vec![-2.0, -2.0]);
        assert_eq!(g.point(6), vec![-1.0, 0.0]);
        assert!(PeriodicGrid::new(1, 1.0, 6).is_err());
        assert!(PeriodicGrid::new(4, 1.0, 2).is_err());
    }

    #[test]
    fn fft_roundtrip_and_plane_wave() {
        let (n, d) = (8, 2);
        let g = PeriodicGrid::new(d, std::f64::consts::TAU, n).unwrap();
        let mut data: Vec<Complex64> = (0..g.len())
            .map(|i| {
                let x = g.point(i);
                Complex64::new((x[0] + 2.0 * x[1]).cos(), 0.0)
            })
            .collect();
        let orig = data.clone();
        fft_nd(&mut data, n, d, false);
        let big: Vec<usize> = (0..data.len()).filter(|&i| data[i].norm() > 1e-9).collect();
        assert_eq!(big.len(), 2);
        fft_nd(&mut data, n, d, true);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a / g.len() as f64 - b).norm() < 1e-13);
        }
    }
}
