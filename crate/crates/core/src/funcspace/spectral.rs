//! FFT plumbing for periodic grids in one and two dimensions.
//!
//! Convention: the forward transform is unnormalized, the inverse divides by
//! the number of grid points.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use super::GridSpec;

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut planner = FftPlanner::new();
    (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
}

fn transform(spec: &GridSpec, data: &mut [Complex64], forward: bool) {
    let n = spec.n;
    let (fwd, inv) = plans(n);
    let plan = if forward { fwd } else { inv };
    if spec.dim == 1 {
        plan.process(data);
    } else {
        for row in data.chunks_mut(n) {
            plan.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            plan.process(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    }
    if !forward {
        let s = 1.0 / spec.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

pub fn forward(spec: &GridSpec, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(spec, &mut data, true);
    data
}

/// Inverse transform keeping the real part.
pub fn inverse_real(spec: &GridSpec, mut data: Vec<Complex64>) -> Vec<f64> {
    transform(spec, &mut data, false);
    data.into_iter().map(|c| c.re).collect()
}

pub fn inverse_complex(spec: &GridSpec, mut data: Vec<Complex64>) -> Vec<Complex64> {
    transform(spec, &mut data, false);
    data
}

/// Signed integer frequency of DFT index `i` (Nyquist counted as +n/2).
pub fn signed_index(n: usize, i: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Physical wavenumber 2πk/L of DFT index `i`.
pub fn wavenumber(spec: &GridSpec, i: usize) -> f64 {
    2.0 * PI * signed_index(spec.n, i) as f64 / spec.period
}

/// Wave vector (per axis) of flat spectral index `idx`; second component is
/// zero in one dimension.
pub fn wave_vector(spec: &GridSpec, idx: usize) -> [f64; 2] {
    if spec.dim == 1 {
        [wavenumber(spec, idx), 0.0]
    } else {
        [wavenumber(spec, idx / spec.n), wavenumber(spec, idx % spec.n)]
    }
}

pub fn is_nyquist(spec: &GridSpec, idx: usize) -> [bool; 2] {
    let h = spec.n / 2;
    if spec.dim == 1 {
        [idx == h, false]
    } else {
        [idx / spec.n == h, idx % spec.n == h]
    }
}

/// Multiplies the spectrum of `values` by `m(ξ, nyquist)` and transforms back.
pub fn apply_multiplier<M>(spec: &GridSpec, values: &[f64], m: M) -> Vec<f64>
where
    M: Fn([f64; 2], [bool; 2]) -> Complex64,
{
    let mut s = forward(spec, values);
    for (idx, v) in s.iter_mut().enumerate() {
        *v *= m(wave_vector(spec, idx), is_nyquist(spec, idx));
    }
    inverse_real(spec, s)
}

/// Multiplier of the spectral derivative ∂^γ; odd orders vanish at Nyquist.
pub fn derivative_multiplier(order: [usize; 2], xi: [f64; 2], nyq: [bool; 2]) -> Complex64 {
    let mut m = Complex64::new(1.0, 0.0);
    for a in 0..2 {
        let k = order[a];
        if k == 0 {
            continue;
        }
        if nyq[a] && k % 2 == 1 {
            return Complex64::new(0.0, 0.0);
        }
        m *= Complex64::new(0.0, xi[a]).powu(k as u32);
    }
    m
}
