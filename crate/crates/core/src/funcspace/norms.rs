use rayon::prelude::*;
use serde::Serialize;

use super::{spectral, GridFunction, GridSpec};
use crate::error::{Error, Result};
use crate::modulus::Modulus;

/// Distance to the nearest integer below which the order is ambiguous.
pub const INTEGER_GUARD: f64 = 0.02;

/// Δ_h f (order 1) or Δ²_h f (order 2) for an offset given in grid cells.
pub fn difference_steps(f: &GridFunction, steps: [i64; 2], order: usize) -> Result<GridFunction> {
    let g = f.grid;
    let v = &f.values;
    let values = match order {
        1 => (0..g.len()).map(|i| v[g.shift(i, steps)] - v[i]).collect(),
        2 => {
            let back = [-steps[0], -steps[1]];
            (0..g.len())
                .map(|i| v[g.shift(i, steps)] - 2.0 * v[i] + v[g.shift(i, back)])
                .collect()
        }
        _ => return Err(Error::Precondition(format!("difference order must be 1 or 2, got {order}"))),
    };
    Ok(GridFunction { grid: g, values })
}

/// Δ_h f for a physical offset h that must be a multiple of the grid spacing.
pub fn difference(f: &GridFunction, h: [f64; 2], order: usize) -> Result<GridFunction> {
    let dx = f.grid.dx();
    let mut steps = [0i64; 2];
    for a in 0..f.grid.dim {
        let s = h[a] / dx;
        let r = s.round();
        if (s - r).abs() > 1e-9 * r.abs().max(1.0) {
            return Err(Error::Alignment(format!(
                "offset component {} is not a multiple of the spacing {dx}",
                h[a]
            )));
        }
        steps[a] = r as i64;
    }
    difference_steps(f, steps, order)
}

/// Grid offsets 0 < |h| ≤ 1, one representative of each ±h pair.
fn half_offsets(g: &GridSpec) -> Vec<[i64; 2]> {
    let dx = g.dx();
    let smax = ((1.0 + 1e-12) / dx).floor() as i64;
    let smax = smax.min(g.n as i64 / 2);
    let mut out = Vec::new();
    if g.dim == 1 {
        out.extend((1..=smax).map(|s| [s, 0]));
    } else {
        let lim = ((1.0 + 1e-12) / dx).powi(2);
        for a in 0..=smax {
            for b in -smax..=smax {
                if a == 0 && b <= 0 {
                    continue;
                }
                if ((a * a + b * b) as f64) <= lim {
                    out.push([a, b]);
                }
            }
        }
    }
    out
}

fn max_abs_difference(f: &GridFunction, s: [i64; 2], order: usize) -> f64 {
    let g = f.grid;
    let v = &f.values;
    if g.dim == 1 {
        let n = g.n;
        let s = s[0].rem_euclid(n as i64) as usize;
        let mut m = 0.0f64;
        for i in 0..n {
            let fwd = v[(i + s) % n];
            let d = if order == 1 { fwd - v[i] } else { fwd - 2.0 * v[i] + v[(i + n - s) % n] };
            m = m.max(d.abs());
        }
        m
    } else {
        let back = [-s[0], -s[1]];
        (0..g.len())
            .map(|i| {
                let d = if order == 1 {
                    v[g.shift(i, s)] - v[i]
                } else {
                    v[g.shift(i, s)] - 2.0 * v[i] + v[g.shift(i, back)]
                };
                d.abs()
            })
            .fold(0.0, f64::max)
    }
}

/// sup over grid points and grid offsets 0 < |h| ≤ 1 of
/// |Δ_h^order f(x)| / (ψ(|h|)·|h|^{−j}).
pub fn seminorm(f: &GridFunction, psi: &Modulus, j: i32, order: usize) -> Result<f64> {
    if order != 1 && order != 2 {
        return Err(Error::Precondition(format!("seminorm order must be 1 or 2, got {order}")));
    }
    let dx = f.grid.dx();
    if dx > 1.0 {
        return Err(Error::Resolution(format!("grid spacing {dx} exceeds 1")));
    }
    let offsets = half_offsets(&f.grid);
    let vals: Vec<f64> = offsets
        .par_iter()
        .map(|s| {
            let h = dx * ((s[0] * s[0] + s[1] * s[1]) as f64).sqrt();
            let weight = h.powi(j) / psi.value(h);
            max_abs_difference(f, *s, order) * weight
        })
        .collect();
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Order k with m_ψ ∈ (k, k+1], guarded away from integers.
pub fn holder_order(psi: &Modulus) -> Result<usize> {
    let idx = psi.indices();
    let m = idx.m;
    if !m.is_finite() || m <= INTEGER_GUARD {
        return Err(Error::IndexGuard(format!(
            "lower index {m} of the modulus must be positive (moduli vanish at zero)"
        )));
    }
    if (m - m.round()).abs() < INTEGER_GUARD {
        return Err(Error::IndexGuard(format!(
            "lower index {m:.4} is within {INTEGER_GUARD} of an integer; integer orders are excluded"
        )));
    }
    Ok(m.ceil() as usize - 1)
}

/// Generalized Hölder norm and its ingredients.
#[derive(Debug, Clone, Serialize)]
pub struct HolderReport {
    pub sup_norm: f64,
    /// max over |γ| = j of ‖D^γ f‖₀, for j = 0..=k.
    pub deriv_sup_norms: Vec<f64>,
    /// [D^k f]_{C^{−k;ψ}}
    pub seminorm_first: f64,
    /// [[f]]_{C^ψ}, second differences against ψ.
    pub seminorm_second: f64,
    pub norm: f64,
    pub psi: Modulus,
    pub k: usize,
}

pub fn holder_norm(f: &GridFunction, psi: &Modulus) -> Result<HolderReport> {
    let k = holder_order(psi)?;
    let mut deriv_sup_norms = Vec::with_capacity(k + 1);
    let mut seminorm_first = 0.0f64;
    for j in 0..=k {
        let ds = f.derivatives_of_order(j);
        deriv_sup_norms.push(ds.iter().map(|d| d.sup_norm()).fold(0.0, f64::max));
        if j == k {
            for d in &ds {
                seminorm_first = seminorm_first.max(seminorm(d, psi, k as i32, 1)?);
            }
        }
    }
    let seminorm_second = seminorm(f, psi, 0, 2)?;
    let norm = deriv_sup_norms.iter().sum::<f64>() + seminorm_first;
    Ok(HolderReport {
        sup_norm: deriv_sup_norms[0],
        deriv_sup_norms,
        seminorm_first,
        seminorm_second,
        norm,
        psi: psi.clone(),
        k,
    })
}

/// ‖f‖_{C^ψ} / (‖f‖₀ + [[f]]_{C^ψ}).
pub fn equivalence_ratio(f: &GridFunction, psi: &Modulus) -> Result<f64> {
    let r = holder_norm(f, psi)?;
    Ok(r.norm / (r.sup_norm + r.seminorm_second))
}

fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// f ∗ ρ_ε with ρ the standard bump, renormalized to unit discrete mass.
pub fn mollify(f: &GridFunction, eps: f64) -> Result<GridFunction> {
    let g = f.grid;
    if !(eps >= 2.0 * g.dx() * (1.0 - 1e-12)) {
        return Err(Error::Resolution(format!(
            "mollifier radius {eps} below two grid spacings ({})",
            2.0 * g.dx()
        )));
    }
    if eps >= 0.5 * g.period {
        return Err(Error::Precondition(format!("mollifier radius {eps} exceeds half the box")));
    }
    let origin = [0.0, 0.0];
    let mut w: Vec<f64> = (0..g.len())
        .map(|i| {
            let d = g.displacement(origin, g.point(i));
            bump((d[0] * d[0] + d[1] * d[1]) / (eps * eps))
        })
        .collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    let kw = spectral::forward(&g, &w);
    let mut s = f.spectrum();
    for (a, b) in s.iter_mut().zip(&kw) {
        *a *= b;
    }
    Ok(GridFunction::from_spectrum(g, s))
}

/// Grid-quantized admissible offsets, exposed for brute-force checks.
pub fn admissible_offsets(g: &GridSpec) -> Vec<[i64; 2]> {
    half_offsets(g)
}
