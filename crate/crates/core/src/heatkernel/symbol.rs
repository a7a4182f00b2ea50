//! Fourier multipliers of translation-invariant operators and the
//! constant-coefficient solver built on them.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::funcspace::{spectral, GridFunction, GridSpec};
use crate::levykernel::{HPart, LevyKernel};
use crate::modulus::{tail_integral, Bernstein, Modulus};
use crate::quadrature::{adaptive, adaptive_log, euler_accelerate, GaussLegendre, Tolerance};

/// symbol(ξ) on the dual lattice of a grid, with F(𝓛₀u) = −symbol·F(u).
#[derive(Debug, Clone)]
pub struct SymbolTable {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

/// c in ∫_{ℝ^d}(1 − cos ξ·h)|h|^{−d−β} dh = c·|ξ|^β.
pub fn fractional_constant(beta: f64, dim: usize) -> f64 {
    let d = dim as f64;
    PI.powf(0.5 * d) * gamma(1.0 - 0.5 * beta)
        / (2f64.powf(beta - 1.0) * beta * gamma(0.5 * (d + beta)))
}

fn norm2(xi: [f64; 2]) -> f64 {
    xi[0] * xi[0] + xi[1] * xi[1]
}

/// Integer key |k|² of a flat spectral index, used to share radial values.
fn radial_key(grid: &GridSpec, idx: usize) -> u64 {
    let n = grid.n;
    let [a, b] = grid.unflatten(idx);
    let ka = spectral::signed_index(n, a);
    let kb = if grid.dim == 2 { spectral::signed_index(n, b) } else { 0 };
    (ka * ka + kb * kb) as u64
}

impl SymbolTable {
    pub fn from_radial<F: Fn(f64) -> f64 + Sync>(grid: GridSpec, f: F) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let xi = spectral::wave_vector(&grid, i);
                let r = norm2(xi).sqrt();
                if r == 0.0 {
                    0.0
                } else {
                    f(r)
                }
            })
            .collect();
        Self { grid, values }
    }

    /// Exact symbol φ(|ξ|²) of the subordinate Brownian motion.
    pub fn subordinate(b: &Bernstein, grid: GridSpec) -> Self {
        Self::from_radial(grid, |r| b.phi(r * r))
    }

    /// scale·|ξ|^β
    pub fn fractional(grid: GridSpec, beta: f64, scale: f64) -> Self {
        Self::from_radial(grid, |r| scale * r.powf(beta))
    }

    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Smallest value off the origin.
    pub fn min_nonzero(&self) -> f64 {
        self.values.iter().skip(1).cloned().fold(f64::INFINITY, f64::min)
    }

    /// Spectral 𝓛₀u = −F⁻¹(symbol·F(u)).
    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.grid.check_same(&u.grid)?;
        let mut s = u.spectrum();
        for (v, m) in s.iter_mut().zip(&self.values) {
            *v *= -m;
        }
        Ok(GridFunction::from_spectrum(self.grid, s))
    }

    /// P_t f with multiplier e^{−t·symbol}.
    pub fn semigroup(&self, t: f64, f: &GridFunction) -> Result<GridFunction> {
        self.grid.check_same(&f.grid)?;
        let mut s = f.spectrum();
        for (v, m) in s.iter_mut().zip(&self.values) {
            *v *= (-t * m).exp();
        }
        Ok(GridFunction::from_spectrum(self.grid, s))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        if self.grid.dim == 1 {
            writeln!(w, "xi,value")?;
            for i in 0..self.grid.len() {
                let xi = spectral::wave_vector(&self.grid, i);
                writeln!(w, "{:e},{:e}", xi[0], self.values[i])?;
            }
        } else {
            writeln!(w, "xi1,xi2,value")?;
            for i in 0..self.grid.len() {
                let xi = spectral::wave_vector(&self.grid, i);
                writeln!(w, "{:e},{:e},{:e}", xi[0], xi[1], self.values[i])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Radial profile of a frozen coefficient a₀(r) = A + B·C(r).
struct Radial<'a> {
    a: f64,
    b: f64,
    h: HPart,
    varphi: &'a Modulus,
    dim: usize,
}

impl Radial<'_> {
    fn coeff(&self, r: f64) -> f64 {
        if self.b == 0.0 {
            self.a
        } else {
            self.a + self.b * self.h.eval([r, 0.0])
        }
    }

    fn g(&self, r: f64) -> f64 {
        1.0 / (r * self.varphi.value(r))
    }

    /// 1 − cos x or 1 − J₀(x), evaluated without cancellation.
    fn weight(&self, x: f64) -> f64 {
        if self.dim == 1 {
            let s = (0.5 * x).sin();
            2.0 * s * s
        } else if x < 0.1 {
            let x2 = x * x;
            x2 / 4.0 - x2 * x2 / 64.0 + x2 * x2 * x2 / 2304.0
        } else {
            1.0 - libm::j0(x)
        }
    }

    fn surface(&self) -> f64 {
        if self.dim == 1 {
            2.0
        } else {
            2.0 * PI
        }
    }
}

/// Zeros of cos(ωr) (1D) or J₀(ωr) (2D) beyond `start`, as radii.
fn oscillation_nodes(dim: usize, omega: f64, start: f64, count: usize) -> Vec<f64> {
    let x0 = omega * start;
    if dim == 1 {
        let k0 = ((x0 / PI) - 0.5).ceil().max(0.0);
        (0..count).map(|k| (k0 + k as f64 + 0.5) * PI / omega).collect()
    } else {
        let mut out = Vec::with_capacity(count);
        let mut k = ((x0 / PI) + 0.25).floor().max(1.0);
        while out.len() < count {
            let mut z = (k - 0.25) * PI + 1.0 / (8.0 * (k - 0.25) * PI);
            for _ in 0..20 {
                let dz = libm::j0(z) / libm::j1(z);
                z += dz;
                if dz.abs() < 1e-15 * z {
                    break;
                }
            }
            if z > x0 {
                out.push(z / omega);
            }
            k += 1.0;
        }
        out
    }
}

/// ∫_R^∞ osc(ωr)·g(r)·c(r) dr by summing over half-waves with Euler averaging.
fn oscillatory_tail<F: Fn(f64) -> f64>(dim: usize, omega: f64, r0: f64, f: F) -> f64 {
    let osc = |r: f64| if dim == 1 { (omega * r).cos() } else { libm::j0(omega * r) };
    let nodes = oscillation_nodes(dim, omega, r0, 40);
    let tol = Tolerance::rel(1e-12);
    let mut partials = Vec::with_capacity(nodes.len());
    let mut acc = adaptive(|r| osc(r) * f(r), r0, nodes[0], tol).value;
    for w in nodes.windows(2) {
        acc += adaptive(|r| osc(r) * f(r), w[0], w[1], tol).value;
        partials.push(acc);
    }
    euler_accelerate(&partials[partials.len() - 24..])
}

fn symbol_at(rad: &Radial<'_>, xi: f64) -> Result<f64> {
    let tol = Tolerance::rel(1e-11);
    // below r_s the weight is its quadratic model; the piece is O((ξ r_s)^{2−M})
    let r_s = 1e-7 / xi;
    let p = (rad.varphi.value(2.0 * r_s) / rad.varphi.value(r_s)).log2();
    let lead = if rad.dim == 1 { 0.5 } else { 0.25 };
    let tiny = lead * xi * xi * rad.coeff(r_s) * r_s * r_s / ((2.0 - p) * rad.varphi.value(r_s));
    let support = match rad.h {
        HPart::Bump { radius } if rad.b != 0.0 => radius,
        _ => 0.0,
    };
    let r_split = (8.0 * PI / xi).max(support);
    let near = adaptive_log(
        |r| rad.weight(xi * r) * rad.coeff(r) * rad.g(r),
        r_s,
        r_split,
        tol,
    )
    .value;
    let mut tail = 0.0;
    if rad.a != 0.0 {
        let flat = tail_integral(rad.varphi, r_split, None, None)?.value;
        let osc = oscillatory_tail(rad.dim, xi, r_split, |r| rad.g(r));
        tail += rad.a * (flat - osc);
    }
    if rad.b != 0.0 {
        match rad.h {
            HPart::None | HPart::Bump { .. } => {}
            HPart::CosNorm => {
                if rad.dim != 1 {
                    return Err(Error::Unsupported(
                        "cos(|h|) coefficients have a symbol only in one dimension".into(),
                    ));
                }
                let mut part = oscillatory_tail(1, 1.0, r_split, |r| rad.g(r));
                for omega in [xi + 1.0, (xi - 1.0).abs()] {
                    part -= 0.5
                        * if omega < 1e-12 {
                            tail_integral(rad.varphi, r_split, None, None)?.value
                        } else {
                            oscillatory_tail(1, omega, r_split, |r| rad.g(r))
                        };
                }
                tail += rad.b * part;
            }
            HPart::OddRatio => {
                return Err(Error::Unsupported("odd coefficients give a complex symbol".into()))
            }
        }
    }
    Ok(rad.surface() * (tiny + near + tail))
}

/// Numerical multiplier of the operator with kernel a(x₀, h)/(|h|^d varphi(|h|)).
pub fn compute_symbol(kernel: &LevyKernel, x0: [f64; 2], grid: GridSpec) -> Result<SymbolTable> {
    let coeff = &kernel.coefficient;
    if !coeff.symmetric_in_h || coeff.h_part().is_odd() {
        return Err(Error::Unsupported(
            "symbol of an h-asymmetric coefficient is complex; only symmetric a₀ is supported".into(),
        ));
    }
    if kernel.dim != grid.dim {
        return Err(Error::GridMismatch(format!(
            "kernel dimension {} vs grid dimension {}",
            kernel.dim, grid.dim
        )));
    }
    if !(kernel.varphi.indices().big_m < 2.0) {
        return Err(Error::IndexGuard("order function must have upper index below 2".into()));
    }
    let rad = Radial {
        a: coeff.x_part(x0),
        b: coeff.mixed_part(x0),
        h: coeff.h_part(),
        varphi: &kernel.varphi,
        dim: kernel.dim,
    };
    let mut keys: BTreeMap<u64, f64> = BTreeMap::new();
    for i in 0..grid.len() {
        keys.entry(radial_key(&grid, i)).or_insert(0.0);
    }
    let scale = 2.0 * PI / grid.period;
    let list: Vec<u64> = keys.keys().cloned().collect();
    let vals = list
        .par_iter()
        .map(|&k| if k == 0 { Ok(0.0) } else { symbol_at(&rad, scale * (k as f64).sqrt()) })
        .collect::<Result<Vec<_>>>()?;
    for (k, v) in list.iter().zip(vals) {
        keys.insert(*k, v);
    }
    let values = (0..grid.len()).map(|i| keys[&radial_key(&grid, i)]).collect();
    Ok(SymbolTable { grid, values })
}

/// Solves 𝓛₀u = f spectrally: F(u) = −F(f)/symbol off the origin, mean zero.
pub fn solve_constant(symbol: &SymbolTable, f: &GridFunction) -> Result<GridFunction> {
    symbol.grid.check_same(&f.grid)?;
    let scale = f.sup_norm().max(f64::MIN_POSITIVE);
    if f.mean().abs() > 1e-10 * scale {
        return Err(Error::Compatibility(format!(
            "right-hand side has mean {:.3e}; the symbol vanishes at ξ = 0 so f must be mean-zero",
            f.mean()
        )));
    }
    let mut s = f.spectrum();
    for (i, v) in s.iter_mut().enumerate() {
        if i == 0 {
            *v = Complex64::new(0.0, 0.0);
            continue;
        }
        let m = symbol.values[i];
        if !(m > 0.0) {
            return Err(Error::SingularSymbol(format!("symbol is {m} at spectral index {i}")));
        }
        *v /= -m;
    }
    Ok(GridFunction::from_spectrum(f.grid, s))
}

/// R f = ∫₀^T P_t f dt + F⁻¹(F(f)·e^{−T·symbol}/symbol) by Gauss–Legendre
/// quadrature in time on geometrically graded panels.
pub fn potential_by_time_quadrature(symbol: &SymbolTable, f: &GridFunction) -> Result<GridFunction> {
    symbol.grid.check_same(&f.grid)?;
    let smin = symbol.min_nonzero();
    if !(smin > 0.0) {
        return Err(Error::SingularSymbol("symbol vanishes off the origin".into()));
    }
    let t_end = 8.0 * std::f64::consts::LN_10 / smin;
    let gl = GaussLegendre::new(12);
    let mut panels = vec![(0.0, t_end * 2f64.powi(-60))];
    for k in (0..60).rev() {
        panels.push((t_end * 2f64.powi(-k - 1), t_end * 2f64.powi(-k)));
    }
    let mut s = f.spectrum();
    for (i, v) in s.iter_mut().enumerate() {
        let m = symbol.values[i];
        if i == 0 || m == 0.0 {
            *v = Complex64::new(0.0, 0.0);
            continue;
        }
        let mut acc = 0.0;
        for &(a, b) in &panels {
            acc += gl.integrate(|t| (-t * m).exp(), a, b);
        }
        acc += (-t_end * m).exp() / m;
        *v *= acc;
    }
    Ok(GridFunction::from_spectrum(f.grid, s))
}
