//! Periodic quadrature weights W with ∫(u(x+h) − u(x))·g(h) dh ≈ Σ_k W_k (u_{i+k} − u_i).
//!
//! The weights combine three pieces:
//! - inner square |h|_∞ ≤ p·dx: moments of g against the degree-2p interpolant on the nodes −p..p;
//! - near field: g·χ integrated against the piecewise-cubic interpolant cell by cell;
//! - far field: Σ_m g(y + mL)(1 − χ) on the nodes, explicit images plus a continuum tail.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::funcspace::{spectral, GridSpec};
use crate::levykernel::HPart;
use crate::modulus::{tail_integral, Modulus};
use crate::quadrature::{adaptive, adaptive_log, GaussLegendre, Tolerance};

/// Smooth monotone step: 1 for t ≤ 0, 0 for t ≥ 1.
pub fn smooth_step(t: f64) -> f64 {
    let g = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let a = g(1.0 - t);
        a / (a + g(t))
    }
}

/// Shape of one separable piece g(h) = G(h)/(|h|^d varphi(|h|)).
#[derive(Debug, Clone, Copy)]
pub enum Shape {
    Unit,
    Radial(HPart),
    /// h₁/(1 + |h|)
    Odd,
}

impl Shape {
    pub fn from_hpart(h: HPart) -> Self {
        match h {
            HPart::None => Shape::Unit,
            HPart::OddRatio => Shape::Odd,
            other => Shape::Radial(other),
        }
    }

    fn parity_shift(&self) -> usize {
        match self {
            Shape::Odd => 1,
            _ => 0,
        }
    }

    fn support(&self) -> f64 {
        match self {
            Shape::Radial(HPart::Bump { radius }) => *radius,
            _ => f64::INFINITY,
        }
    }

    /// Radial factor w(r) of the moment integrands; the odd shape carries
    /// its h₁ separately through the parity shift.
    fn radial(&self, r: f64, varphi: &Modulus, dim: usize) -> f64 {
        let k0 = 1.0 / (r.powi(dim as i32) * varphi.value(r));
        match self {
            Shape::Unit => k0,
            Shape::Radial(h) => h.eval([r, 0.0]) * k0,
            Shape::Odd => k0 / (1.0 + r),
        }
    }

    fn eval(&self, h: [f64; 2], varphi: &Modulus, dim: usize) -> f64 {
        let r = (h[0] * h[0] + h[1] * h[1]).sqrt();
        if r >= self.support() {
            return 0.0;
        }
        let w = self.radial(r, varphi, dim);
        match self {
            Shape::Odd => h[0] * w,
            _ => w,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StencilConfig {
    pub inner_cells: usize,
    pub cell_points: usize,
    pub images: usize,
    pub tol: f64,
}

/// Weights and the equivalent Fourier multiplier of one separable piece.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub grid: GridSpec,
    pub weights: Vec<f64>,
    pub multiplier: Vec<Complex64>,
}

/// Coefficients of the Lagrange basis on integer nodes −p..p as polynomials in s.
fn lagrange_polynomials(p: usize) -> Vec<Vec<f64>> {
    let nodes: Vec<f64> = (-(p as i64)..=p as i64).map(|v| v as f64).collect();
    nodes
        .iter()
        .enumerate()
        .map(|(k, &xk)| {
            let mut poly = vec![1.0];
            for (j, &xj) in nodes.iter().enumerate() {
                if j == k {
                    continue;
                }
                let mut next = vec![0.0; poly.len() + 1];
                for (e, c) in poly.iter().enumerate() {
                    next[e + 1] += c / (xk - xj);
                    next[e] -= c * xj / (xk - xj);
                }
                poly = next;
            }
            poly
        })
        .collect()
}

/// Cubic Lagrange basis on local nodes −1, 0, 1, 2 at t ∈ [0, 1].
fn cubic_basis(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// ∫_0^ρ (r/dx)^s · r^{d−1} w(r) dr.
fn radial_power_integral(w: &dyn Fn(f64) -> f64, s: usize, dim: usize, dx: f64, rho: f64, tol: f64) -> f64 {
    let f = |r: f64| (r / dx).powi(s as i32) * r.powi(dim as i32 - 1) * w(r);
    adaptive_log(f, rho * 1e-12, rho, Tolerance::rel(tol)).value
}

/// Moments ∫_{|h|_∞ ≤ h₀} (h₁/dx)^P (h₂/dx)^Q w(|h|) dh for even P, Q.
fn square_moment(w: &dyn Fn(f64) -> f64, big_p: usize, big_q: usize, dx: f64, h0: f64, tol: f64) -> f64 {
    let s = big_p + big_q;
    let base = radial_power_integral(w, s, 2, dx, h0, tol);
    let gl = GaussLegendre::new(24);
    let mut acc = 0.0;
    // octant θ ∈ [0, π/4] reaches r = h₀/cosθ; the mirror octant swaps P and Q
    for (theta, wt) in gl.mapped(0.0, 0.25 * PI) {
        let (c, sn) = (theta.cos(), theta.sin());
        let rho = h0 / c;
        let extra = if rho > h0 {
            let f = |r: f64| (r / dx).powi(s as i32) * r * w(r);
            adaptive(f, h0, rho, Tolerance::rel(tol)).value
        } else {
            0.0
        };
        let radial = base + extra;
        acc += wt * radial * (c.powi(big_p as i32) * sn.powi(big_q as i32) + sn.powi(big_p as i32) * c.powi(big_q as i32));
    }
    4.0 * acc
}

pub fn build(grid: GridSpec, varphi: &Modulus, shape: Shape, cfg: &StencilConfig) -> Result<Stencil> {
    let n = grid.n;
    let dim = grid.dim;
    let dx = grid.dx();
    let l = grid.period;
    let p = cfg.inner_cells;
    let h0 = p as f64 * dx;
    let rho1 = 0.25 * l;
    let rho2 = 0.45 * l;
    let chi = |r: f64| smooth_step((r - rho1) / (rho2 - rho1));
    let mut weights = vec![0.0; grid.len()];
    let slot = |k: [i64; 2]| -> usize {
        let a = k[0].rem_euclid(n as i64) as usize;
        if dim == 1 {
            a
        } else {
            a * n + k[1].rem_euclid(n as i64) as usize
        }
    };

    // inner square
    let lag = lagrange_polynomials(p);
    let deg = 2 * p;
    let shift = shape.parity_shift();
    let w = |r: f64| shape.radial(r, varphi, dim);
    if dim == 1 {
        let moments: Vec<f64> = (0..=deg)
            .map(|q| {
                if q == 0 || (q + shift) % 2 == 1 {
                    0.0
                } else {
                    // extra factor dx^{shift} restores h₁ from (h/dx)
                    2.0 * radial_power_integral(&w, q + shift, 1, dx, h0, cfg.tol) * dx.powi(shift as i32)
                }
            })
            .collect();
        for (k, poly) in lag.iter().enumerate() {
            let c: f64 = poly.iter().zip(&moments).map(|(a, m)| a * m).sum();
            weights[slot([k as i64 - p as i64, 0])] += c;
        }
    } else {
        let mut moments = vec![vec![0.0; deg + 1]; deg + 1];
        let pairs: Vec<(usize, usize)> = (0..=deg)
            .flat_map(|a| (0..=deg).map(move |b| (a, b)))
            .filter(|&(a, b)| (a, b) != (0, 0) && (a + shift).is_multiple_of(2) && b % 2 == 0)
            .collect();
        let vals: Vec<f64> = pairs
            .par_iter()
            .map(|&(a, b)| square_moment(&w, a + shift, b, dx, h0, cfg.tol) * dx.powi(shift as i32))
            .collect();
        for (&(a, b), v) in pairs.iter().zip(vals) {
            moments[a][b] = v;
        }
        for (k, pk) in lag.iter().enumerate() {
            for (m, pm) in lag.iter().enumerate() {
                let mut c = 0.0;
                for (a, ca) in pk.iter().enumerate() {
                    for (b, cb) in pm.iter().enumerate() {
                        c += ca * cb * moments[a][b];
                    }
                }
                weights[slot([k as i64 - p as i64, m as i64 - p as i64])] += c;
            }
        }
    }

    // near field, cell by cell
    let gl = GaussLegendre::new(cfg.cell_points);
    let local: Vec<(f64, f64)> = gl.mapped(0.0, 1.0).collect();
    let half = (n / 2) as i64;
    let reach = ((rho2.min(shape.support()) / dx).ceil() as i64 + 1).min(half);
    let inside = |j: i64| j >= -(p as i64) && j < p as i64;
    let g = |h: [f64; 2]| shape.eval(h, varphi, dim) * chi((h[0] * h[0] + h[1] * h[1]).sqrt());
    if dim == 1 {
        for j in -reach..reach {
            if inside(j) {
                continue;
            }
            let mut acc = [0.0; 4];
            for &(t, wt) in &local {
                let v = wt * dx * g([(j as f64 + t) * dx, 0.0]);
                let b = cubic_basis(t);
                for a in 0..4 {
                    acc[a] += v * b[a];
                }
            }
            for a in 0..4 {
                weights[slot([j - 1 + a as i64, 0])] += acc[a];
            }
        }
    } else {
        let rows: Vec<Vec<(usize, f64)>> = (-reach..reach)
            .into_par_iter()
            .map(|j1| {
                let mut out = Vec::new();
                for j2 in -reach..reach {
                    if inside(j1) && inside(j2) {
                        continue;
                    }
                    let near = |j: i64| if j < 0 { (j + 1) as f64 } else { j as f64 }.abs() * dx;
                    let (n1, n2) = (near(j1), near(j2));
                    if (n1 * n1 + n2 * n2).sqrt() >= rho2.min(shape.support()) {
                        continue;
                    }
                    let mut acc = [[0.0; 4]; 4];
                    for &(t1, w1) in &local {
                        let b1 = cubic_basis(t1);
                        for &(t2, w2) in &local {
                            let v = w1 * w2 * dx * dx * g([(j1 as f64 + t1) * dx, (j2 as f64 + t2) * dx]);
                            if v == 0.0 {
                                continue;
                            }
                            let b2 = cubic_basis(t2);
                            for a in 0..4 {
                                for c in 0..4 {
                                    acc[a][c] += v * b1[a] * b2[c];
                                }
                            }
                        }
                    }
                    for a in 0..4 {
                        for c in 0..4 {
                            out.push((slot([j1 - 1 + a as i64, j2 - 1 + c as i64]), acc[a][c]));
                        }
                    }
                }
                out
            })
            .collect();
        for row in rows {
            for (i, v) in row {
                weights[i] += v;
            }
        }
    }

    // far field on the nodes
    let m = cfg.images as i64;
    let cell = grid.cell();
    let tail = match shape {
        Shape::Unit => {
            let a = (m as f64 + 0.5) * l;
            if dim == 1 {
                2.0 / l * tail_integral(varphi, a, None, None)?.value
            } else {
                // complement of the image square, by octants: 8∫_0^{π/4} T(a/cos θ) dθ
                let mut acc = 0.0;
                for (theta, w) in GaussLegendre::new(24).mapped(0.0, PI / 4.0) {
                    acc += w * tail_integral(varphi, a / theta.cos(), None, None)?.value;
                }
                8.0 * acc / (l * l)
            }
        }
        // compact, odd or oscillating shapes: explicit images only
        _ => 0.0,
    };
    let far: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let y = grid.displacement([0.0, 0.0], grid.point(i));
            let mut acc = 0.0;
            let range2 = if dim == 2 { -m..=m } else { 0..=0 };
            for a in -m..=m {
                for c in range2.clone() {
                    let h = [y[0] + a as f64 * l, y[1] + c as f64 * l];
                    let r = (h[0] * h[0] + h[1] * h[1]).sqrt();
                    let cut = 1.0 - chi(r);
                    if cut > 0.0 {
                        acc += cut * shape.eval(h, varphi, dim);
                    }
                }
            }
            cell * (acc + tail)
        })
        .collect();
    for (w, f) in weights.iter_mut().zip(far) {
        *w += f;
    }

    let total: f64 = weights.iter().sum();
    let multiplier = spectral::forward(&grid, &weights)
        .into_iter()
        .map(|c| c.conj() - total)
        .collect();
    Ok(Stencil { grid, weights, multiplier })
}

impl Stencil {
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut s = spectral::forward(&self.grid, u);
        for (v, m) in s.iter_mut().zip(&self.multiplier) {
            *v *= m;
        }
        spectral::inverse_real(&self.grid, s)
    }

    /// Σ_k W_k (u_{i+k} − u_i)(v_{i+k} − v_i) at every node, summed directly.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let grid = self.grid;
        let nz: Vec<(usize, f64)> = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(k, w)| (k, *w))
            .collect();
        (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let [i1, i2] = grid.unflatten(i);
                let mut acc = 0.0;
                for &(k, w) in &nz {
                    let [k1, k2] = grid.unflatten(k);
                    let j = grid.flatten([(i1 + k1) % grid.n, (i2 + k2) % grid.n]);
                    acc += w * (u[j] - u[i]) * (v[j] - v[i]);
                }
                acc
            })
            .collect()
    }
}
