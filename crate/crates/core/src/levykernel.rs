//! Jump kernels of subordinate Brownian motion and variable coefficients
//! a(x, h) of nonlocal operators.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::GridSpec;
use crate::modulus::{Bernstein, Modulus, ModulusSpec};
use crate::quadrature::{adaptive_log, Tolerance};

/// Radial jump density j(r) = ∫₀^∞ (4πt)^{−d/2} e^{−r²/(4t)} μ(t) dt.
pub fn jump_density(b: &Bernstein, r: f64, dim: usize) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Singularity(format!("jump density needs r > 0, got {r}")));
    }
    if dim == 0 || dim > 3 {
        return Err(Error::Unsupported(format!("dimension {dim}")));
    }
    let d = dim as f64;
    let r2 = r * r;
    // t = r²·s puts the Gaussian peak near s ≈ 1 for every r
    let integrand = |s: f64| {
        let t = r2 * s;
        (4.0 * PI * t).powf(-0.5 * d) * (-0.25 / s).exp() * b.levy_density(t) * r2
    };
    let v = adaptive_log(integrand, 1e-4, 1e22, Tolerance::rel(1e-10)).value;
    Ok(v)
}

/// Closed-form jump density of the rotationally symmetric 2α-stable process.
pub fn stable_jump_density(alpha: f64, r: f64, dim: usize) -> f64 {
    use statrs::function::gamma::gamma;
    let d = dim as f64;
    alpha * 4f64.powf(alpha) * gamma(0.5 * (d + 2.0 * alpha))
        / (PI.powf(0.5 * d) * gamma(1.0 - alpha))
        * r.powf(-d - 2.0 * alpha)
}

/// Log-spaced table of j(r) with log-log cubic interpolation and
/// power-law continuation outside the sampled range.
#[derive(Debug, Clone)]
pub struct JumpTable {
    log_r: Vec<f64>,
    log_j: Vec<f64>,
    slope_lo: f64,
    slope_hi: f64,
}

impl JumpTable {
    pub fn new(b: &Bernstein, dim: usize, r_min: f64, r_max: f64, per_decade: usize) -> Result<Self> {
        use rayon::prelude::*;
        let decades = (r_max / r_min).log10();
        let m = (decades * per_decade as f64).ceil() as usize + 1;
        let log_r: Vec<f64> = (0..m)
            .map(|i| r_min.ln() + (r_max / r_min).ln() * i as f64 / (m - 1) as f64)
            .collect();
        let log_j = log_r
            .par_iter()
            .map(|lr| jump_density(b, lr.exp(), dim).map(f64::ln))
            .collect::<Result<Vec<_>>>()?;
        let slope = |a: usize, c: usize| (log_j[c] - log_j[a]) / (log_r[c] - log_r[a]);
        let slope_lo = slope(0, 1);
        let slope_hi = slope(m - 2, m - 1);
        Ok(Self { log_r, log_j, slope_lo, slope_hi })
    }

    pub fn eval(&self, r: f64) -> f64 {
        let x = r.ln();
        let n = self.log_r.len();
        if x <= self.log_r[0] {
            return (self.log_j[0] + self.slope_lo * (x - self.log_r[0])).exp();
        }
        if x >= self.log_r[n - 1] {
            return (self.log_j[n - 1] + self.slope_hi * (x - self.log_r[n - 1])).exp();
        }
        let h = self.log_r[1] - self.log_r[0];
        let i = (((x - self.log_r[0]) / h).floor() as usize).min(n - 2);
        // four-point Lagrange stencil, shifted inward at the ends
        let s = i.saturating_sub(1).min(n.saturating_sub(4));
        let mut acc = 0.0;
        for a in 0..4 {
            let mut w = 1.0;
            for c in 0..4 {
                if c != a {
                    w *= (x - self.log_r[s + c]) / (self.log_r[s + a] - self.log_r[s + c]);
                }
            }
            acc += w * self.log_j[s + a];
        }
        acc.exp()
    }
}

/// Worst two-sided constant of j(r)·r^d·varphi(r) over the given radii.
pub fn comparability_constant(b: &Bernstein, dim: usize, radii: &[f64]) -> Result<f64> {
    let mut c = 1.0f64;
    for &r in radii {
        let v = jump_density(b, r, dim)? * r.powi(dim as i32) * b.varphi(r);
        c = c.max(v).max(1.0 / v);
    }
    Ok(c)
}

/// Whitelisted coefficient fields, all of the separable form
/// a(x, h) = A(x) + B(x)·C(h).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientSpec {
    Constant { value: f64 },
    /// base + amp·cos(x₁)
    CosX { base: f64, amp: f64 },
    /// base + amp·min(ψ(|x|), 1)·bump(|h|/radius), |x| the periodic distance to 0.
    PsiBump { base: f64, amp: f64, psi: ModulusSpec, radius: f64 },
    /// base + jump on the half box x₁ ∈ [0, L/2).
    Step { base: f64, jump: f64 },
    /// Piecewise-linear periodic samples of A(x₁) on a uniform grid.
    Tabulated { values: Vec<f64> },
    /// base + amp·cos(x₁)·cos(|h|)
    CosXCosH { base: f64, amp: f64 },
    /// base + amp·h₁/(1 + |h|), odd in h.
    Asymmetric { base: f64, amp: f64 },
}

/// Radial profile of a smooth bump, equal to 1 at 0 and vanishing for s ≥ 1.
pub fn unit_bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// h-dependence C(h) of a separable coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HPart {
    None,
    Bump { radius: f64 },
    CosNorm,
    OddRatio,
}

impl HPart {
    pub fn eval(&self, h: [f64; 2]) -> f64 {
        let r = (h[0] * h[0] + h[1] * h[1]).sqrt();
        match self {
            HPart::None => 0.0,
            HPart::Bump { radius } => unit_bump(r / radius),
            HPart::CosNorm => r.cos(),
            HPart::OddRatio => h[0] / (1.0 + r),
        }
    }

    pub fn is_odd(&self) -> bool {
        matches!(self, HPart::OddRatio)
    }
}

#[derive(Debug, Clone)]
pub struct KernelCoefficient {
    pub spec: CoefficientSpec,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub symmetric_in_h: bool,
    pub psi_cont: Modulus,
    period: f64,
    bump_psi: Option<Modulus>,
}

impl KernelCoefficient {
    pub fn new(spec: CoefficientSpec, period: f64) -> Result<Self> {
        let (lo, hi, l3, psi_cont, symmetric) = match &spec {
            CoefficientSpec::Constant { value } => (*value, *value, 0.0, Modulus::power(1.0), true),
            CoefficientSpec::CosX { base, amp } => {
                (base - amp.abs(), base + amp.abs(), amp.abs(), Modulus::power(1.0), true)
            }
            CoefficientSpec::PsiBump { base, amp, psi, radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::Config("bump radius must be positive".into()));
                }
                let m = Modulus::from_spec(psi)?;
                (base.min(base + amp), base.max(base + amp), amp.abs(), m, true)
            }
            CoefficientSpec::Step { base, jump } => {
                (base.min(base + jump), base.max(base + jump), jump.abs(), Modulus::power(1.0), true)
            }
            CoefficientSpec::Tabulated { values } => {
                if values.len() < 2 {
                    return Err(Error::Config("tabulated coefficient needs ≥ 2 samples".into()));
                }
                let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let dx = period / values.len() as f64;
                let lip = (0..values.len())
                    .map(|i| (values[(i + 1) % values.len()] - values[i]).abs() / dx)
                    .fold(0.0, f64::max);
                (lo, hi, lip, Modulus::power(1.0), true)
            }
            CoefficientSpec::CosXCosH { base, amp } => {
                (base - amp.abs(), base + amp.abs(), amp.abs(), Modulus::power(1.0), true)
            }
            CoefficientSpec::Asymmetric { base, amp } => {
                (base - amp.abs(), base + amp.abs(), 0.0, Modulus::power(1.0), false)
            }
        };
        if !(lo > 0.0 && lo.is_finite() && hi.is_finite()) {
            return Err(Error::Config(format!(
                "coefficient must be bounded below by a positive constant; bounds [{lo}, {hi}]"
            )));
        }
        let bump_psi = match &spec {
            CoefficientSpec::PsiBump { .. } => Some(psi_cont.clone()),
            _ => None,
        };
        Ok(Self {
            spec,
            lambda1: lo,
            lambda2: hi,
            lambda3: l3,
            symmetric_in_h: symmetric,
            psi_cont,
            period,
            bump_psi,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self::new(CoefficientSpec::Constant { value }, 2.0 * PI).expect("positive constant")
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    fn torus_norm(&self, x: [f64; 2]) -> f64 {
        let l = self.period;
        let w = |d: f64| d - l * (d / l).round();
        (w(x[0]).powi(2) + w(x[1]).powi(2)).sqrt()
    }

    /// A(x)
    pub fn x_part(&self, x: [f64; 2]) -> f64 {
        match &self.spec {
            CoefficientSpec::Constant { value } => *value,
            CoefficientSpec::CosX { base, amp } => base + amp * x[0].cos(),
            CoefficientSpec::PsiBump { base, .. } => *base,
            CoefficientSpec::Step { base, jump } => {
                if x[0].rem_euclid(self.period) < 0.5 * self.period {
                    base + jump
                } else {
                    *base
                }
            }
            CoefficientSpec::Tabulated { values } => {
                let n = values.len();
                let s = x[0].rem_euclid(self.period) / self.period * n as f64;
                let i = (s.floor() as usize).min(n - 1);
                let t = s - i as f64;
                values[i] * (1.0 - t) + values[(i + 1) % n] * t
            }
            CoefficientSpec::CosXCosH { base, .. } => *base,
            CoefficientSpec::Asymmetric { base, .. } => *base,
        }
    }

    /// B(x), multiplying the h-dependent part.
    pub fn mixed_part(&self, x: [f64; 2]) -> f64 {
        match &self.spec {
            CoefficientSpec::PsiBump { amp, .. } => {
                let d = self.torus_norm(x);
                let psi = self.bump_psi.as_ref().expect("set for psi bump");
                let v = if d > 0.0 { psi.value(d.min(psi.r_max())).min(1.0) } else { 0.0 };
                amp * v
            }
            CoefficientSpec::CosXCosH { amp, .. } => amp * x[0].cos(),
            CoefficientSpec::Asymmetric { amp, .. } => *amp,
            _ => 0.0,
        }
    }

    pub fn h_part(&self) -> HPart {
        match &self.spec {
            CoefficientSpec::PsiBump { radius, .. } => HPart::Bump { radius: *radius },
            CoefficientSpec::CosXCosH { .. } => HPart::CosNorm,
            CoefficientSpec::Asymmetric { .. } => HPart::OddRatio,
            _ => HPart::None,
        }
    }

    pub fn eval(&self, x: [f64; 2], h: [f64; 2]) -> f64 {
        let b = self.mixed_part(x);
        if b == 0.0 {
            self.x_part(x)
        } else {
            self.x_part(x) + b * self.h_part().eval(h)
        }
    }

    pub fn is_constant_in_x(&self) -> bool {
        matches!(
            self.spec,
            CoefficientSpec::Constant { .. } | CoefficientSpec::Asymmetric { .. }
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientReport {
    pub bounds_ok: bool,
    pub continuity_ok: bool,
    pub symmetry_ok: bool,
    pub observed_min: f64,
    pub observed_max: f64,
    /// sup |a(x+z,h) − a(x,h)|/ψ(|z|) over the samples.
    pub continuity_constant: f64,
    pub worst_asymmetry: f64,
}

fn sample_h(dim: usize) -> Vec<[f64; 2]> {
    let radii: Vec<f64> = (0..24).map(|i| 1e-3 * 10f64.powf(i as f64 * 4.0 / 23.0)).collect();
    let mut out = Vec::new();
    for r in radii {
        if dim == 1 {
            out.push([r, 0.0]);
        } else {
            for k in 0..6 {
                let t = PI * k as f64 / 6.0 + 0.1;
                out.push([r * t.cos(), r * t.sin()]);
            }
        }
    }
    out
}

/// Samples (x, z, h) on the grid and checks the standing assumptions on a.
pub fn verify_coefficient(k: &KernelCoefficient, grid: &GridSpec) -> CoefficientReport {
    let stride = (grid.len() / 256).max(1);
    let xs: Vec<usize> = (0..grid.len()).step_by(stride).collect();
    let hs = sample_h(grid.dim);
    let dx = grid.dx();
    let zmax = ((1.0 / dx).floor() as i64).max(1);
    let zsteps: Vec<[i64; 2]> = (1..=zmax.min(64))
        .map(|s| [s * (zmax / zmax.min(64)).max(1), 0])
        .chain(if grid.dim == 2 { vec![[0, 1], [1, 1]] } else { vec![] })
        .collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut cont = 0.0f64;
    let mut asym = 0.0f64;
    for &i in &xs {
        let x = grid.point(i);
        for h in &hs {
            let a = k.eval(x, *h);
            lo = lo.min(a);
            hi = hi.max(a);
            asym = asym.max((a - k.eval(x, [-h[0], -h[1]])).abs());
            for z in &zsteps {
                let zr = dx * ((z[0] * z[0] + z[1] * z[1]) as f64).sqrt();
                if zr > 1.0 + 1e-12 {
                    continue;
                }
                let xz = [x[0] + z[0] as f64 * dx, x[1] + z[1] as f64 * dx];
                let d = (k.eval(xz, *h) - a).abs();
                cont = cont.max(d / k.psi_cont.value(zr));
            }
        }
    }
    let tol = 1e-12 * k.lambda2.abs().max(1.0);
    CoefficientReport {
        bounds_ok: lo >= k.lambda1 - tol && hi <= k.lambda2 + tol,
        continuity_ok: cont <= k.lambda3 * (1.0 + 1e-9) + tol,
        symmetry_ok: !k.symmetric_in_h || asym <= tol,
        observed_min: lo,
        observed_max: hi,
        continuity_constant: cont,
        worst_asymmetry: asym,
    }
}

/// ν(dh) = a(x, h)/(|h|^d·varphi(|h|)) dh.
#[derive(Debug, Clone)]
pub struct LevyKernel {
    pub varphi: Modulus,
    pub dim: usize,
    pub coefficient: KernelCoefficient,
}

impl LevyKernel {
    pub fn new(varphi: Modulus, dim: usize, coefficient: KernelCoefficient) -> Result<Self> {
        if varphi.r_max().is_finite() {
            return Err(Error::Config("order function must be defined on (0, ∞)".into()));
        }
        if dim != 1 && dim != 2 {
            return Err(Error::Unsupported(format!("kernel dimension {dim}")));
        }
        Ok(Self { varphi, dim, coefficient })
    }

    pub fn unit(varphi: Modulus, dim: usize) -> Result<Self> {
        Self::new(varphi, dim, KernelCoefficient::constant(1.0))
    }

    /// 1/(|h|^d·varphi(|h|)) for radius r > 0.
    pub fn radial(&self, r: f64) -> f64 {
        1.0 / (r.powi(self.dim as i32) * self.varphi.value(r))
    }

    pub fn kernel_value(&self, x: [f64; 2], h: [f64; 2]) -> Result<f64> {
        let r = (h[0] * h[0] + h[1] * h[1]).sqrt();
        if r == 0.0 {
            return Err(Error::Singularity("kernel evaluated at h = 0".into()));
        }
        Ok(self.coefficient.eval(x, h) * self.radial(r))
    }

    /// ∫(1 ∧ |h|²)·Λ₂/(|h|^d varphi(|h|)) dh up to radius `outer`.
    pub fn levy_integrability(&self, outer: f64) -> f64 {
        let surface = if self.dim == 1 { 2.0 } else { 2.0 * PI };
        let rd = |r: f64| r.powi(self.dim as i32 - 1);
        let tol = Tolerance::rel(1e-10);
        let inner = adaptive_log(|r| r * r * self.radial(r) * rd(r), 1e-12, 1.0, tol).value;
        let outer_part = if outer > 1.0 {
            adaptive_log(|r| self.radial(r) * rd(r), 1.0, outer, tol).value
        } else {
            0.0
        };
        self.coefficient.lambda2 * surface * (inner + outer_part)
    }
}
