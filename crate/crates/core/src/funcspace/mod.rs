//! Periodic grid functions and generalized Hölder norms on them.

mod corpus;
mod io;
mod norms;
pub mod spectral;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use corpus::{random_holder_sample, random_holder_sample_on};
pub use norms::{
    admissible_offsets, difference, difference_steps, equivalence_ratio, holder_norm, holder_order, mollify,
    seminorm, INTEGER_GUARD,
    HolderReport,
};

/// Uniform periodic grid on [0, L)^dim with n points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    #[serde(default = "default_period")]
    pub period: f64,
}

fn default_period() -> f64 {
    2.0 * PI
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, period: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Unsupported(format!("grid dimension {dim}; only 1 and 2")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Config(format!("points per axis must be a power of two ≥ 4, got {n}")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Config(format!("period must be positive, got {period}")));
        }
        Ok(Self { dim, n, period })
    }

    pub fn line(n: usize) -> Self {
        Self::new(1, n, 2.0 * PI).expect("valid grid")
    }

    pub fn square(n: usize) -> Self {
        Self::new(2, n, 2.0 * PI).expect("valid grid")
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.period / self.n as f64
    }

    /// Volume element dx^dim.
    pub fn cell(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    /// Multi-index of a flat index (second entry 0 in one dimension).
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    pub fn flatten(&self, i: [usize; 2]) -> usize {
        if self.dim == 1 {
            i[0]
        } else {
            i[0] * self.n + i[1]
        }
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.unflatten(idx);
        [i as f64 * self.dx(), j as f64 * self.dx()]
    }

    /// Flat index of the point shifted by `steps` grid cells (periodic).
    pub fn shift(&self, idx: usize, steps: [i64; 2]) -> usize {
        let n = self.n as i64;
        let [i, j] = self.unflatten(idx);
        let a = (i as i64 + steps[0]).rem_euclid(n) as usize;
        if self.dim == 1 {
            a
        } else {
            let b = (j as i64 + steps[1]).rem_euclid(n) as usize;
            a * self.n + b
        }
    }

    /// Minimal-image displacement y − x on the torus, per axis.
    pub fn displacement(&self, x: [f64; 2], y: [f64; 2]) -> [f64; 2] {
        let l = self.period;
        let wrap = |d: f64| d - l * (d / l).round();
        if self.dim == 1 {
            [wrap(y[0] - x[0]), 0.0]
        } else {
            [wrap(y[0] - x[0]), wrap(y[1] - x[1])]
        }
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Real samples of a periodic function, row-major in two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample at index {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn([f64; 2]) -> f64>(grid: GridSpec, f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self { grid, values }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Riemann sum over the box.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell()
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &Self, f: F) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Removes the mean.
    pub fn centered(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    pub fn spectrum(&self) -> Vec<num_complex::Complex64> {
        spectral::forward(&self.grid, &self.values)
    }

    pub fn from_spectrum(grid: GridSpec, s: Vec<num_complex::Complex64>) -> Self {
        Self { grid, values: spectral::inverse_real(&grid, s) }
    }

    /// Spectral partial derivative ∂^γ.
    pub fn derivative(&self, order: [usize; 2]) -> Self {
        if order == [0, 0] {
            return self.clone();
        }
        let values = spectral::apply_multiplier(&self.grid, &self.values, |xi, nyq| {
            spectral::derivative_multiplier(order, xi, nyq)
        });
        Self { grid: self.grid, values }
    }

    /// All partial derivatives of total order k.
    pub fn derivatives_of_order(&self, k: usize) -> Vec<Self> {
        multi_indices(self.grid.dim, k).into_iter().map(|g| self.derivative(g)).collect()
    }

    /// Spectral gradient (one entry per axis).
    pub fn gradient(&self) -> Vec<Self> {
        (0..self.grid.dim)
            .map(|a| {
                let mut o = [0, 0];
                o[a] = 1;
                self.derivative(o)
            })
            .collect()
    }
}

/// Multi-indices γ with |γ| = k in the given dimension.
pub fn multi_indices(dim: usize, k: usize) -> Vec<[usize; 2]> {
    if dim == 1 {
        vec![[k, 0]]
    } else {
        (0..=k).map(|a| [k - a, a]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_round_trip() {
        for g in [GridSpec::line(64), GridSpec::square(16)] {
            let f = GridFunction::from_fn(g, |p| (p[0] * 3.0).sin() + (p[1] - p[0]).cos() * 0.3 + 0.1);
            let back = GridFunction::from_spectrum(g, f.spectrum());
            for (a, b) in f.values.iter().zip(&back.values) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_derivatives_of_trig() {
        let g = GridSpec::line(64);
        let f = GridFunction::from_fn(g, |p| (3.0 * p[0]).sin());
        let d = f.derivative([1, 0]);
        let d3 = f.derivative([3, 0]);
        for i in 0..g.len() {
            let x = g.point(i)[0];
            assert!((d.values[i] - 3.0 * (3.0 * x).cos()).abs() < 1e-11);
            assert!((d3.values[i] + 27.0 * (3.0 * x).cos()).abs() < 1e-10);
        }
        let g2 = GridSpec::square(32);
        let f = GridFunction::from_fn(g2, |p| (2.0 * p[0]).sin() * p[1].cos());
        let d = f.derivative([1, 1]);
        for i in 0..g2.len() {
            let p = g2.point(i);
            assert!((d.values[i] + 2.0 * (2.0 * p[0]).cos() * p[1].sin()).abs() < 1e-11);
        }
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(3, 16, 1.0).is_err());
        assert!(GridSpec::new(1, 100, 1.0).is_err());
        assert!(GridFunction::new(GridSpec::line(8), vec![0.0; 7]).is_err());
        assert!(GridFunction::new(GridSpec::line(8), vec![f64::NAN; 8]).is_err());
    }

    #[test]
    fn displacement_is_minimal_image() {
        let g = GridSpec::new(1, 8, 10.0).unwrap();
        let d = g.displacement([9.0, 0.0], [1.0, 0.0]);
        assert!((d[0] - 2.0).abs() < 1e-14);
    }
}
