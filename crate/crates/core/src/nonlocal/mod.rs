//! Direct quadrature of the nonlocal operators 𝓛 and 𝓛₀ on periodic grids,
//! cutoffs, the freezing decomposition and the cross term H.

mod stencil;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{GridFunction, GridSpec};
use crate::levykernel::{HPart, KernelCoefficient, LevyKernel};
use crate::modulus::{tail_integral, Modulus};
use crate::quadrature::{adaptive_log, Tolerance};

pub use stencil::{smooth_step, Stencil};
use stencil::{Shape, StencilConfig};

/// Guard band below 1 in which the compensator choice is ambiguous.
pub const COMPENSATOR_GUARD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compensator {
    None,
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Half-width of the inner square in grid cells.
    pub inner_cutoff_cells: usize,
    /// Gauss–Legendre points per cell and axis in the near field.
    pub cell_points: usize,
    /// Explicit lattice images in the far field (0 picks 16 in 1D and 4 in 2D).
    pub images: usize,
    /// Relative tolerance of the moment integrals.
    pub tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { inner_cutoff_cells: 4, cell_points: 6, images: 0, tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub kernel: LevyKernel,
    pub compensator: Compensator,
    pub quadrature: QuadratureConfig,
}

impl OperatorSpec {
    pub fn new(kernel: LevyKernel, quadrature: QuadratureConfig) -> Result<Self> {
        let big_m = kernel.varphi.indices().big_m;
        if big_m >= 2.0 {
            return Err(Error::IndexGuard(format!("upper index {big_m:.4} of the order function must be below 2")));
        }
        let compensator = if big_m < 1.0 - COMPENSATOR_GUARD {
            Compensator::None
        } else if big_m >= 1.0 {
            Compensator::Gradient
        } else {
            return Err(Error::IndexGuard(format!(
                "upper index {big_m:.4} lies in the guard band below 1; compensator choice is ambiguous"
            )));
        };
        let c = &kernel.coefficient;
        let symmetric = c.symmetric_in_h && !c.h_part().is_odd();
        if compensator == Compensator::Gradient && !symmetric {
            return Err(Error::Config(
                "order ≥ 1 requires a coefficient symmetric in h".into(),
            ));
        }
        if quadrature.inner_cutoff_cells < 1 || quadrature.cell_points < 2 {
            return Err(Error::Config("inner_cutoff_cells ≥ 1 and cell_points ≥ 2 required".into()));
        }
        Ok(Self { kernel, compensator, quadrature })
    }

    fn stencil_config(&self, grid: &GridSpec) -> StencilConfig {
        let q = &self.quadrature;
        let images = if q.images > 0 {
            q.images
        } else if grid.dim == 1 {
            16
        } else {
            4
        };
        StencilConfig { inner_cells: q.inner_cutoff_cells, cell_points: q.cell_points, images, tol: q.tol }
    }
}

/// 𝓛 discretized on one grid: a(x,h) = A(x) + B(x)·C(h), each piece a stencil.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: GridSpec,
    base: Arc<Stencil>,
    mixed: Option<Arc<Stencil>>,
    coefficient: KernelCoefficient,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl DiscreteOperator {
    pub fn new(spec: &OperatorSpec, grid: GridSpec) -> Result<Self> {
        let k = &spec.kernel;
        if k.dim != grid.dim {
            return Err(Error::GridMismatch(format!("kernel dimension {} vs grid {}", k.dim, grid.dim)));
        }
        let coeff = &k.coefficient;
        if (coeff.period() - grid.period).abs() > 1e-12 * grid.period {
            return Err(Error::GridMismatch(format!(
                "coefficient period {} vs box {}",
                coeff.period(),
                grid.period
            )));
        }
        let cfg = spec.stencil_config(&grid);
        let base = Arc::new(stencil::build(grid, &k.varphi, Shape::Unit, &cfg)?);
        let a: Vec<f64> = (0..grid.len()).map(|i| coeff.x_part(grid.point(i))).collect();
        let b: Vec<f64> = (0..grid.len()).map(|i| coeff.mixed_part(grid.point(i))).collect();
        let h = coeff.h_part();
        let mixed = if matches!(h, HPart::None) || b.iter().all(|v| *v == 0.0) {
            None
        } else {
            Some(Arc::new(stencil::build(grid, &k.varphi, Shape::from_hpart(h), &cfg)?))
        };
        Ok(Self { grid, base, mixed, coefficient: coeff.clone(), a, b })
    }

    /// Operator with the coefficient frozen at x₀: a₀(h) = a(x₀, h).
    pub fn freeze(&self, x0: [f64; 2]) -> Self {
        let (a0, b0) = self.frozen_parts(x0);
        Self {
            a: vec![a0; self.a.len()],
            b: vec![b0; self.b.len()],
            ..self.clone()
        }
    }

    /// 𝓑 = 𝓛 − 𝓛₀ with b(x,h) = a(x,h) − a(x₀,h).
    pub fn perturbation(&self, x0: [f64; 2]) -> Self {
        let (a0, b0) = self.frozen_parts(x0);
        Self {
            a: self.a.iter().map(|v| v - a0).collect(),
            b: self.b.iter().map(|v| v - b0).collect(),
            ..self.clone()
        }
    }

    fn frozen_parts(&self, x0: [f64; 2]) -> (f64, f64) {
        (self.coefficient.x_part(x0), self.coefficient.mixed_part(x0))
    }

    pub fn coefficient(&self) -> &KernelCoefficient {
        &self.coefficient
    }

    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.grid.check_same(&u.grid)?;
        let t1 = self.base.apply(&u.values);
        let mut out: Vec<f64> = t1.iter().zip(&self.a).map(|(t, a)| a * t).collect();
        if let Some(m) = &self.mixed {
            let tc = m.apply(&u.values);
            for ((o, t), b) in out.iter_mut().zip(tc).zip(&self.b) {
                *o += b * t;
            }
        }
        Ok(GridFunction { grid: self.grid, values: out })
    }

    /// H(x) = ∫(u(x+h) − u(x))(η(x+h) − η(x)) a(x,h)/(|h|^d varphi) dh, summed directly.
    pub fn apply_h(&self, u: &GridFunction, eta: &GridFunction) -> Result<GridFunction> {
        self.grid.check_same(&u.grid)?;
        self.grid.check_same(&eta.grid)?;
        let t1 = self.base.bilinear(&u.values, &eta.values);
        let mut out: Vec<f64> = t1.iter().zip(&self.a).map(|(t, a)| a * t).collect();
        if let Some(m) = &self.mixed {
            let tc = m.bilinear(&u.values, &eta.values);
            for ((o, t), b) in out.iter_mut().zip(tc).zip(&self.b) {
                *o += b * t;
            }
        }
        Ok(GridFunction { grid: self.grid, values: out })
    }

    /// Quadrature multiplier of the frozen operator, as a real table when symmetric.
    pub fn base_stencil(&self) -> &Stencil {
        &self.base
    }
}

/// 𝓛₀u for the kernel frozen at x₀.
pub fn apply_l0(spec: &OperatorSpec, x0: [f64; 2], u: &GridFunction) -> Result<GridFunction> {
    DiscreteOperator::new(spec, u.grid)?.freeze(x0).apply(u)
}

/// 𝓛u with the x-dependent coefficient.
pub fn apply_l(spec: &OperatorSpec, u: &GridFunction) -> Result<GridFunction> {
    DiscreteOperator::new(spec, u.grid)?.apply(u)
}

/// η_{r,x₀}(x) = η̄(|x − x₀|/r) with η̄ = 1 on [0,1] and 0 on [2,∞).
#[derive(Debug, Clone)]
pub struct Cutoff {
    pub r: f64,
    pub x0: [f64; 2],
    pub values: GridFunction,
}

pub fn cutoff_profile(s: f64) -> f64 {
    smooth_step(s - 1.0)
}

impl Cutoff {
    pub fn new(grid: GridSpec, x0: [f64; 2], r: f64) -> Result<Self> {
        if !(r > 0.0) || 2.0 * r > 0.5 * grid.period {
            return Err(Error::Precondition(format!(
                "cutoff radius {r} must satisfy 0 < 2r ≤ L/2 = {}",
                0.5 * grid.period
            )));
        }
        let values = GridFunction::from_fn(grid, |p| {
            let d = grid.displacement(x0, p);
            cutoff_profile((d[0] * d[0] + d[1] * d[1]).sqrt() / r)
        });
        Ok(Self { r, x0, values })
    }
}

/// ∫ Ψ(|h| ∧ r)/(|h|^d varphi(|h|)) dh together with Ψ(r)/varphi(r).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AuxReport {
    pub integral: f64,
    pub scale: f64,
    pub ratio: f64,
}

pub fn aux_integral(psi: &Modulus, varphi: &Modulus, r: f64, dim: usize) -> Result<AuxReport> {
    let big_m = varphi.indices().big_m;
    let m_psi = psi.indices().m;
    if !(big_m < m_psi) {
        return Err(Error::Precondition(format!(
            "upper index of the order function ({big_m:.4}) must be below the lower index of Ψ ({m_psi:.4})"
        )));
    }
    if !(r > 0.0 && r <= psi.r_max()) {
        return Err(Error::Domain(format!("radius {r} outside the domain of Ψ")));
    }
    let surface = match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => return Err(Error::Unsupported(format!("dimension {dim}"))),
    };
    let eps = r * 1e-14;
    let ratio = |s: f64| psi.value(s) / varphi.value(s);
    // below eps the integrand is a pure power to working accuracy
    let slope = (ratio(2.0 * eps) / ratio(eps)).log2();
    let near = adaptive_log(|s| ratio(s) / s, eps, r, Tolerance::rel(1e-11)).value + ratio(eps) / slope;
    let far = psi.value(r) * tail_integral(varphi, r, None, None)?.value;
    let integral = surface * (near + far);
    let scale = psi.value(r) / varphi.value(r);
    Ok(AuxReport { integral, scale, ratio: integral / scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::random_holder_sample;
    use crate::heatkernel::{compute_symbol, fractional_constant};
    use crate::levykernel::CoefficientSpec;
    use std::f64::consts::PI;

    fn unit_spec(alpha: f64, dim: usize) -> OperatorSpec {
        OperatorSpec::new(LevyKernel::unit(Modulus::power(alpha), dim).unwrap(), QuadratureConfig::default()).unwrap()
    }

    fn coeff_spec(alpha: f64, c: CoefficientSpec) -> OperatorSpec {
        let coeff = KernelCoefficient::new(c, 2.0 * PI).unwrap();
        let k = LevyKernel::new(Modulus::power(alpha), 1, coeff).unwrap();
        OperatorSpec::new(k, QuadratureConfig::default()).unwrap()
    }

    #[test]
    fn compensator_selection() {
        assert_eq!(unit_spec(0.6, 1).compensator, Compensator::None);
        assert_eq!(unit_spec(1.0, 1).compensator, Compensator::Gradient);
        assert_eq!(unit_spec(1.5, 1).compensator, Compensator::Gradient);
        let k = LevyKernel::unit(Modulus::power(0.99), 1).unwrap();
        assert!(matches!(OperatorSpec::new(k, QuadratureConfig::default()), Err(Error::IndexGuard(_))));
        let coeff = KernelCoefficient::new(CoefficientSpec::Asymmetric { base: 1.0, amp: 0.2 }, 2.0 * PI).unwrap();
        let k = LevyKernel::new(Modulus::power(1.2), 1, coeff.clone()).unwrap();
        assert!(matches!(OperatorSpec::new(k, QuadratureConfig::default()), Err(Error::Config(_))));
        let k = LevyKernel::new(Modulus::power(0.5), 1, coeff).unwrap();
        assert!(OperatorSpec::new(k, QuadratureConfig::default()).is_ok());
    }

    #[test]
    fn cosine_matches_fractional_symbol() {
        let grid = GridSpec::line(512);
        for alpha in [0.4, 1.0, 1.4] {
            let spec = unit_spec(alpha, 1);
            let u = GridFunction::from_fn(grid, |p| (3.0 * p[0]).cos());
            let lu = apply_l0(&spec, [0.0, 0.0], &u).unwrap();
            let c = fractional_constant(alpha, 1) * 3f64.powf(alpha);
            let err = lu.add(&u.scale(c)).unwrap().sup_norm() / c;
            assert!(err < 1e-4, "α={alpha}: {err}");
        }
    }

    #[test]
    fn two_dimensional_cosine_matches_symbol() {
        let grid = GridSpec::square(64);
        for alpha in [0.5, 1.3] {
            let spec = unit_spec(alpha, 2);
            let u = GridFunction::from_fn(grid, |p| (2.0 * p[0] + p[1]).cos());
            let lu = apply_l0(&spec, [0.0, 0.0], &u).unwrap();
            let c = fractional_constant(alpha, 2) * 5f64.sqrt().powf(alpha);
            let err = lu.add(&u.scale(c)).unwrap().sup_norm() / c;
            assert!(err < 1e-3, "α={alpha}: {err}");
        }
    }

    #[test]
    fn constants_linearity_and_maximum() {
        let grid = GridSpec::line(256);
        let spec = unit_spec(0.7, 1);
        let op = DiscreteOperator::new(&spec, grid).unwrap();
        let c = op.apply(&GridFunction::constant(grid, 3.0)).unwrap();
        assert!(c.sup_norm() < 1e-10);
        let u = random_holder_sample(&Modulus::power(0.5), 1, 256, 1).unwrap();
        let v = random_holder_sample(&Modulus::power(0.5), 2, 256, 1).unwrap();
        let lhs = op.apply(&u.add(&v).unwrap()).unwrap();
        let rhs = op.apply(&u).unwrap().add(&op.apply(&v).unwrap()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().sup_norm() < 1e-10);
        let w = GridFunction::from_fn(grid, |p| p[0].cos().exp());
        assert!(op.apply(&w).unwrap().values[0] < 1e-8);
    }

    #[test]
    fn bump_coefficient_matches_numerical_symbol() {
        let grid = GridSpec::line(512);
        let spec = coeff_spec(
            0.6,
            CoefficientSpec::PsiBump { base: 1.0, amp: 0.5, psi: Modulus::power(0.5).spec().clone(), radius: 1.5 },
        );
        let x0 = [PI, 0.0];
        let sym = compute_symbol(&spec.kernel, x0, grid).unwrap();
        let u = GridFunction::from_fn(grid, |p| (4.0 * p[0]).cos());
        let lu = apply_l0(&spec, x0, &u).unwrap();
        let want = u.scale(-sym.values[4]);
        let err = lu.sub(&want).unwrap().sup_norm() / sym.values[4];
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn freezing_decomposition_and_identity() {
        let grid = GridSpec::line(256);
        let spec = coeff_spec(0.6, CoefficientSpec::CosX { base: 1.0, amp: 0.5 });
        let op = DiscreteOperator::new(&spec, grid).unwrap();
        let x0 = [0.0, 0.0];
        let u = random_holder_sample(&Modulus::power(0.5), 5, 256, 1).unwrap();
        let l = op.apply(&u).unwrap();
        let l0 = op.freeze(x0).apply(&u).unwrap();
        let b = op.perturbation(x0).apply(&u).unwrap();
        assert!(l.sub(&l0).unwrap().sub(&b).unwrap().sup_norm() < 1e-10);
        let eta = Cutoff::new(grid, [1.0, 0.0], 0.5).unwrap().values;
        let lhs = op.apply(&u.mul(&eta).unwrap()).unwrap();
        let rhs = eta
            .mul(&l)
            .unwrap()
            .add(&u.mul(&op.apply(&eta).unwrap()).unwrap())
            .unwrap()
            .add(&op.apply_h(&u, &eta).unwrap())
            .unwrap();
        assert!(lhs.sub(&rhs).unwrap().sup_norm() < 1e-9);
        let one = GridFunction::constant(grid, 1.0);
        assert!(op.apply_h(&u, &one).unwrap().sup_norm() == 0.0);
        let x_free = coeff_spec(0.6, CoefficientSpec::Constant { value: 1.3 });
        let op2 = DiscreteOperator::new(&x_free, grid).unwrap();
        assert!(op2.perturbation([1.0, 0.0]).apply(&u).unwrap().sup_norm() == 0.0);
    }

    #[test]
    fn cutoff_values() {
        let grid = GridSpec::line(256);
        let c = Cutoff::new(grid, [PI, 0.0], 0.5).unwrap();
        for i in 0..grid.len() {
            let x = grid.point(i)[0];
            let v = c.values.values[i];
            assert!((0.0..=1.0).contains(&v));
            if (x - PI).abs() <= 0.5 {
                assert_eq!(v, 1.0);
            }
            if (x - PI).abs() >= 1.0 {
                assert_eq!(v, 0.0);
            }
        }
        assert!(Cutoff::new(grid, [0.0, 0.0], 2.0).is_err());
    }

    #[test]
    fn aux_integral_examples() {
        let r = aux_integral(&Modulus::power(1.0), &Modulus::power(0.5), 1.0, 1).unwrap();
        assert!((r.integral - 8.0).abs() < 1e-8);
        let a = aux_integral(&Modulus::power(1.0), &Modulus::power(0.5), 0.25, 1).unwrap();
        let b = aux_integral(&Modulus::power(1.0), &Modulus::power(0.5), 2f64.powi(-8), 1).unwrap();
        assert!((a.ratio - b.ratio).abs() < 1e-8 * a.ratio);
        assert!(aux_integral(&Modulus::power(0.5), &Modulus::power(0.8), 0.5, 1).is_err());
    }
}
