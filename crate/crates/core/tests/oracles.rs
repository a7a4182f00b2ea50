use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use schauder_core::funcspace::{GridFunction, GridSpec};
use schauder_core::heatkernel::{compute_symbol, density, required_points, solve_constant};
use schauder_core::levykernel::{CoefficientSpec, KernelCoefficient, LevyKernel};
use schauder_core::modulus::{Bernstein, Modulus};
use schauder_core::nonlocal::{apply_l0, OperatorSpec, QuadratureConfig};

// ∫_{ℝ^d}(1 − cos ξ·h)|h|^{−d−β} dh = c|ξ|^β, via the Riesz-potential closed form
fn riesz_constant(beta: f64, d: f64) -> f64 {
    PI.powf(d / 2.0) * gamma(1.0 - beta / 2.0) / (2f64.powf(beta - 1.0) * beta * gamma((d + beta) / 2.0))
}

fn unit_spec(alpha: f64, dim: usize) -> OperatorSpec {
    OperatorSpec::new(LevyKernel::unit(Modulus::power(alpha), dim).unwrap(), QuadratureConfig::default()).unwrap()
}

#[test]
fn planar_operator_on_plane_waves() {
    let grid = GridSpec::square(64);
    for alpha in [0.5, 1.3] {
        let spec = unit_spec(alpha, 2);
        let c = riesz_constant(alpha, 2.0);
        for k in [[1.0, 0.0], [2.0, 3.0]] {
            let u = GridFunction::from_fn(grid, |p| (k[0] * p[0] + k[1] * p[1]).cos());
            let lu = apply_l0(&spec, [0.0; 2], &u).unwrap();
            let s = c * (k[0] * k[0] + k[1] * k[1]).sqrt().powf(alpha);
            let err = lu.add(&u.scale(s)).unwrap().sup_norm() / s;
            assert!(err < 1e-3, "alpha {alpha} k {k:?}: {err}");
        }
    }
}

#[test]
fn manufactured_solution_round_trip() {
    // f := 𝓛₀u from the stencil, then u from the quadrature symbol
    let grid = GridSpec::line(512);
    for (alpha, value) in [(0.6, 1.0), (1.5, 0.7)] {
        let coeff = KernelCoefficient::new(CoefficientSpec::Constant { value }, 2.0 * PI).unwrap();
        let kernel = LevyKernel::new(Modulus::power(alpha), 1, coeff).unwrap();
        let spec = OperatorSpec::new(kernel.clone(), QuadratureConfig::default()).unwrap();
        let u = GridFunction::from_fn(grid, |p| (3.0 * p[0]).cos() + 0.5 * (7.0 * p[0] + 1.0).sin());
        let f = apply_l0(&spec, [0.0; 2], &u).unwrap();
        let expected = GridFunction::from_fn(grid, |p| {
            -value * riesz_constant(alpha, 1.0)
                * (3f64.powf(alpha) * (3.0 * p[0]).cos() + 0.5 * 7f64.powf(alpha) * (7.0 * p[0] + 1.0).sin())
        });
        assert!(f.sub(&expected).unwrap().sup_norm() < 1e-4 * expected.sup_norm());
        let symbol = compute_symbol(&kernel, [0.0; 2], grid).unwrap();
        let back = solve_constant(&symbol, &f).unwrap();
        assert!(back.sub(&u).unwrap().sup_norm() < 1e-4, "alpha {alpha}");
    }
}

#[test]
fn planar_cauchy_density() {
    // φ(λ) = λ^{1/2} in the plane: q(t,x) = t/(2π)·(t² + |x|²)^{−3/2}
    let b = Bernstein::Stable { alpha: 0.5 };
    let (t, l) = (1.0, 32.0);
    let n = required_points(&b, t, l).unwrap().next_power_of_two();
    let grid = GridSpec::new(2, n, l).unwrap();
    let q = density(&b, t, grid).unwrap().with_free_space(8).unwrap();
    let v = q.values();
    let mut worst = 0.0f64;
    for i in (0..grid.len()).step_by(97) {
        let d = grid.displacement([0.0; 2], grid.point(i));
        let r2 = d[0] * d[0] + d[1] * d[1];
        let exact = t / (2.0 * PI) * (t * t + r2).powf(-1.5);
        worst = worst.max((v.values[i] - exact).abs());
    }
    assert!(worst < 1e-5, "{worst}");
    assert!((q.eval_at([0.0; 2]) - 1.0 / (2.0 * PI)).abs() < 1e-5);
}
