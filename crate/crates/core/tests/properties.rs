use std::f64::consts::PI;

use proptest::prelude::*;

use schauder_core::experiments::{apply_override, ExperimentConfig};
use schauder_core::funcspace::{holder_norm, mollify, random_holder_sample, seminorm, GridFunction, GridSpec};
use schauder_core::heatkernel::{density, solve_constant, SymbolTable};
use schauder_core::levykernel::{CoefficientSpec, KernelCoefficient, LevyKernel};
use schauder_core::modulus::{Bernstein, Modulus};
use schauder_core::montecarlo::{ks_two_sample, sample_sbm, sample_stable_subordinator};
use schauder_core::nonlocal::{DiscreteOperator, OperatorSpec, QuadratureConfig};

fn rotate(f: &GridFunction, s: usize) -> GridFunction {
    let n = f.values.len();
    let values = (0..n).map(|i| f.values[(i + s) % n]).collect();
    GridFunction::new(f.grid, values).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn power_indices_are_the_exponent(alpha in 0.05f64..2.9) {
        let m = Modulus::power(alpha);
        let idx = m.indices();
        prop_assert!((idx.m - alpha).abs() < 1e-9 && (idx.big_m - alpha).abs() < 1e-9);
        prop_assert!((m.value(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn product_indices_add(a in 0.05f64..1.4, b in 0.05f64..1.4) {
        let p = Modulus::power(a).product(&Modulus::power(b));
        let idx = p.indices();
        prop_assert!((idx.m - (a + b)).abs() < 1e-9);
        prop_assert!((p.value(0.3) - 0.3f64.powf(a + b)).abs() < 1e-12);
    }

    #[test]
    fn holder_norm_is_homogeneous_and_translation_invariant(
        seed in 0u64..1000,
        c in -4.0f64..4.0,
        shift in 0usize..256,
        alpha in prop_oneof![Just(0.3), Just(0.5), Just(1.5), Just(2.3)],
    ) {
        let psi = Modulus::power(alpha);
        let f = random_holder_sample(&psi, seed, 256, 1).unwrap();
        let base = holder_norm(&f, &psi).unwrap().norm;
        let scaled = holder_norm(&f.scale(c), &psi).unwrap().norm;
        prop_assert!((scaled - c.abs() * base).abs() <= 1e-9 * base.max(1.0));
        let moved = holder_norm(&rotate(&f, shift), &psi).unwrap().norm;
        prop_assert!(rel(base, moved) < 1e-9);
    }

    #[test]
    fn seminorms_vanish_on_constants(c in -10.0f64..10.0, alpha in 0.1f64..0.9) {
        let f = GridFunction::constant(GridSpec::line(128), c);
        let psi = Modulus::power(alpha);
        prop_assert_eq!(seminorm(&f, &psi, 0, 1).unwrap(), 0.0);
        prop_assert_eq!(seminorm(&f, &psi, 0, 2).unwrap(), 0.0);
    }

    #[test]
    fn mollification_keeps_mean_and_contracts(seed in 0u64..1000, k in 3i32..7) {
        let f = random_holder_sample(&Modulus::power(0.5), seed, 1024, 1).unwrap().map(|v| v + 0.7);
        let g = mollify(&f, 2f64.powi(-k)).unwrap();
        prop_assert!((g.mean() - f.mean()).abs() < 1e-12);
        prop_assert!(g.sup_norm() <= f.sup_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn spectrum_round_trip(seed in 0u64..1000, dim in 1usize..=2) {
        let n = if dim == 1 { 128 } else { 32 };
        let f = random_holder_sample(&Modulus::power(0.4), seed, n, dim).unwrap();
        let back = GridFunction::from_spectrum(f.grid, f.spectrum());
        prop_assert!(f.sub(&back).unwrap().sup_norm() < 1e-12 * f.sup_norm().max(1.0));
    }

    #[test]
    fn density_is_positive_symmetric_with_unit_mass(alpha in 0.25f64..0.9, t in 0.3f64..3.0) {
        let b = Bernstein::Stable { alpha };
        let grid = GridSpec::new(1, 4096, 64.0).unwrap();
        let q = match density(&b, t, grid) {
            Ok(q) => q,
            // under-resolved combinations are refused, not approximated
            Err(e) => { prop_assert!(e.to_string().contains("use n")); return Ok(()); }
        };
        let v = q.values();
        prop_assert!((q.mass() - 1.0).abs() < 1e-10);
        let n = grid.n;
        let peak = v.values[0];
        for i in 1..n / 2 {
            prop_assert!((v.values[i] - v.values[n - i]).abs() <= 1e-10 * peak);
            prop_assert!(v.values[i] > 0.0);
        }
    }

    #[test]
    fn semigroup_is_a_flow(alpha in 0.2f64..0.9, s in 0.01f64..1.0, t in 0.01f64..1.0, seed in 0u64..100) {
        let table = SymbolTable::subordinate(&Bernstein::Stable { alpha }, GridSpec::line(256));
        let f = random_holder_sample(&Modulus::power(0.5), seed, 256, 1).unwrap();
        let two = table.semigroup(t, &table.semigroup(s, &f).unwrap()).unwrap();
        let one = table.semigroup(s + t, &f).unwrap();
        prop_assert!(two.sub(&one).unwrap().sup_norm() < 1e-12 * f.sup_norm());
        prop_assert!(one.sup_norm() <= f.sup_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn solve_inverts_the_symbol(beta in 0.3f64..1.9, seed in 0u64..200) {
        let grid = GridSpec::line(256);
        let table = SymbolTable::fractional(grid, beta, 1.0);
        let f = random_holder_sample(&Modulus::power(0.5), seed, 256, 1).unwrap();
        let u = solve_constant(&table, &f).unwrap();
        let back = table.apply(&u).unwrap();
        prop_assert!(back.sub(&f).unwrap().sup_norm() < 1e-10 * f.sup_norm());
        prop_assert!(u.mean().abs() < 1e-12 * u.sup_norm().max(1e-300));
    }

    #[test]
    fn ks_statistics_are_bounded(seed in 0u64..500) {
        let a = sample_stable_subordinator(0.5, 1.0, 400, seed).unwrap();
        prop_assert!(a.iter().all(|s| *s > 0.0 && s.is_finite()));
        prop_assert_eq!(ks_two_sample(&a, &a), 0.0);
        let b = sample_stable_subordinator(0.5, 1.0, 400, seed + 1).unwrap();
        let d = ks_two_sample(&a, &b);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_two_sample(&b, &a));
    }

    #[test]
    fn sampling_is_reproducible(seed in 0u64..1000, n in 1usize..9000) {
        let a = sample_sbm(0.6, 0.5, n, 2, seed).unwrap();
        let b = sample_sbm(0.6, 0.5, n, 2, seed).unwrap();
        prop_assert_eq!(a.increments, b.increments);
    }

    #[test]
    fn overrides_change_the_hash(size in 1usize..64, seed in 0u64..1000) {
        let mut v = serde_json::json!({
            "psi": {"family": "power", "alpha": 0.5},
            "varphi": {"family": "power", "alpha": 1.0}
        });
        let base = ExperimentConfig::from_value(v.clone()).unwrap().hash();
        apply_override(&mut v, &format!("corpus.size={size}")).unwrap();
        apply_override(&mut v, &format!("corpus.seed={}", seed + 2)).unwrap();
        let cfg = ExperimentConfig::from_value(v).unwrap();
        prop_assert_eq!(cfg.corpus.size, size);
        prop_assert_ne!(cfg.hash(), base);
    }
}

fn operator(alpha: f64, coefficient: CoefficientSpec, grid: GridSpec) -> DiscreteOperator {
    let coeff = KernelCoefficient::new(coefficient, 2.0 * PI).unwrap();
    let kernel = LevyKernel::new(Modulus::power(alpha), grid.dim, coeff).unwrap();
    let spec = OperatorSpec::new(kernel, QuadratureConfig::default()).unwrap();
    DiscreteOperator::new(&spec, grid).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn operator_is_linear_and_kills_constants(
        alpha in prop_oneof![Just(0.4), Just(0.7), Just(1.2), Just(1.6)],
        c in -3.0f64..3.0,
        seed in 0u64..100,
    ) {
        let grid = GridSpec::line(256);
        let op = operator(alpha, CoefficientSpec::CosX { base: 1.0, amp: 0.5 }, grid);
        let u = random_holder_sample(&Modulus::power(alpha + 0.2), seed, 256, 1).unwrap();
        let w = random_holder_sample(&Modulus::power(alpha + 0.2), seed + 1, 256, 1).unwrap();
        let lhs = op.apply(&u.scale(c).add(&w).unwrap()).unwrap();
        let rhs = op.apply(&u).unwrap().scale(c).add(&op.apply(&w).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().sup_norm() <= 1e-9 * rhs.sup_norm().max(1.0));
        let k = op.apply(&GridFunction::constant(grid, c)).unwrap();
        prop_assert!(k.sup_norm() < 1e-9 * c.abs().max(1.0));
    }

    #[test]
    fn constant_coefficient_commutes_with_shifts(alpha in 0.3f64..1.7, shift in 1usize..128, seed in 0u64..100) {
        prop_assume!((alpha - 1.0).abs() > 0.03);
        let grid = GridSpec::line(128);
        let op = operator(alpha, CoefficientSpec::Constant { value: 1.3 }, grid);
        let u = random_holder_sample(&Modulus::power(0.5), seed, 128, 1).unwrap();
        let a = op.apply(&rotate(&u, shift)).unwrap();
        let b = rotate(&op.apply(&u).unwrap(), shift);
        prop_assert!(a.sub(&b).unwrap().sup_norm() <= 1e-10 * b.sup_norm().max(1.0));
    }

    #[test]
    fn maximum_principle_at_the_maximum(alpha in 0.3f64..0.9, seed in 0u64..100) {
        let grid = GridSpec::line(256);
        let op = operator(alpha, CoefficientSpec::CosX { base: 1.0, amp: 0.5 }, grid);
        let u = random_holder_sample(&Modulus::power(0.6), seed, 256, 1).unwrap();
        let lu = op.apply(&u).unwrap();
        let imax = (0..grid.n).max_by(|&i, &j| u.values[i].total_cmp(&u.values[j])).unwrap();
        let imin = (0..grid.n).min_by(|&i, &j| u.values[i].total_cmp(&u.values[j])).unwrap();
        prop_assert!(lu.values[imax] <= 1e-9);
        prop_assert!(lu.values[imin] >= -1e-9);
    }
}
