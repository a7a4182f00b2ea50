//! Transition densities of subordinate Brownian motion on a periodic box,
//! the associated semigroups and the constant-coefficient solver.

mod symbol;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::funcspace::{multi_indices, spectral, GridFunction, GridSpec};
use crate::levykernel::JumpTable;
use crate::modulus::Bernstein;
use crate::quadrature::{adaptive_log, Tolerance};

pub use symbol::{
    compute_symbol, fractional_constant, potential_by_time_quadrature, solve_constant, SymbolTable,
};

/// Spectral tail allowed at the highest resolved frequency.
pub const SPECTRAL_TAIL: f64 = 1e-14;

/// Box and resolution used by the pointwise checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct BoxSetup {
    pub dim: usize,
    pub n: usize,
    pub period: f64,
    /// Lattice images removed explicitly before the continuum tail (0 keeps the periodized density).
    #[serde(default = "default_images")]
    pub images: usize,
}

fn default_images() -> usize {
    8
}

impl BoxSetup {
    pub fn line(n: usize, period: f64) -> Self {
        Self { dim: 1, n, period, images: default_images() }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.dim, self.n, self.period)
    }

    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n, ..*self }
    }
}

/// Σ_{m≠0} q(t, x + mL), with q ≈ t·j far from the origin.
#[derive(Debug, Clone)]
struct ImageCorrection {
    table: JumpTable,
    t: f64,
    period: f64,
    dim: usize,
    images: i64,
    tail: f64,
}

impl ImageCorrection {
    fn new(b: &Bernstein, t: f64, spec: &GridSpec, images: usize) -> Result<Self> {
        let l = spec.period;
        let m = images as i64;
        let reach = (m as f64 + 1.0) * l * if spec.dim == 2 { 1.5 } else { 1.0 };
        let table = cached_table(b, spec.dim, 0.25 * l, 2.0 * reach)?;
        let tail = if spec.dim == 1 {
            let r0 = (m as f64 + 0.5) * l;
            2.0 * t / l * radial_moment(&table, r0, 0.0)
        } else {
            let r0 = (2.0 * m as f64 + 1.0) * l / PI.sqrt();
            2.0 * PI * t / (l * l) * radial_moment(&table, r0, 1.0)
        };
        Ok(Self { table, t, period: l, dim: spec.dim, images: m, tail })
    }

    fn eval(&self, x: [f64; 2]) -> f64 {
        let l = self.period;
        let m = self.images;
        let mut acc = 0.0;
        if self.dim == 1 {
            for k in -m..=m {
                if k != 0 {
                    acc += self.table.eval((x[0] + k as f64 * l).abs());
                }
            }
        } else {
            for a in -m..=m {
                for c in -m..=m {
                    if a != 0 || c != 0 {
                        let y = [x[0] + a as f64 * l, x[1] + c as f64 * l];
                        acc += self.table.eval((y[0] * y[0] + y[1] * y[1]).sqrt());
                    }
                }
            }
        }
        self.t * acc + self.tail
    }

    /// ∂^γ of the image sum by central differences on the scale of the box.
    fn derivative(&self, x: [f64; 2], order: [usize; 2]) -> f64 {
        let h = self.period / 256.0;
        let stencil = |k: usize| -> Vec<(i32, f64)> {
            match k {
                0 => vec![(0, 1.0)],
                1 => vec![(-1, -0.5), (1, 0.5)],
                2 => vec![(-1, 1.0), (0, -2.0), (1, 1.0)],
                _ => vec![(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
            }
        };
        let mut acc = 0.0;
        for (sa, wa) in stencil(order[0]) {
            for (sc, wc) in stencil(order[1]) {
                let p = [x[0] + sa as f64 * h, x[1] + sc as f64 * h];
                acc += wa * wc * (self.eval(p) - self.tail);
            }
        }
        acc / h.powi((order[0] + order[1]) as i32)
    }
}

/// Jump tables do not depend on t, and the stable-log ones are slow to build.
fn cached_table(b: &Bernstein, dim: usize, r_min: f64, r_max: f64) -> Result<JumpTable> {
    static CACHE: OnceLock<Mutex<HashMap<String, JumpTable>>> = OnceLock::new();
    let key = format!("{b:?}|{dim}|{r_min:e}|{r_max:e}");
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().expect("cache lock").get(&key) {
        return Ok(t.clone());
    }
    let table = JumpTable::new(b, dim, r_min, r_max, 24)?;
    cache.lock().expect("cache lock").insert(key, table.clone());
    Ok(table)
}

/// ∫_{r0}^∞ j(r) r^p dr from a jump table with power-law continuation.
fn radial_moment(table: &JumpTable, r0: f64, p: f64) -> f64 {
    let r1 = r0 * 1e6;
    let body = adaptive_log(|r| table.eval(r) * r.powf(p), r0, r1, Tolerance::rel(1e-10)).value;
    let slope = (table.eval(2.0 * r1) / table.eval(r1)).log2();
    let q = -(slope + p + 1.0);
    body + table.eval(r1) * r1.powf(p + 1.0) / q
}

/// q(t, ·) on a periodic box.
#[derive(Debug, Clone)]
pub struct HeatKernelGrid {
    pub t: f64,
    pub bernstein: Bernstein,
    /// Box-periodized density on the grid.
    pub grid: GridFunction,
    /// Largest resolved wavenumber along an axis.
    pub spectral_cutoff: f64,
    /// e^{−tφ(|ξ|²)} on the dual lattice.
    characteristic: Vec<f64>,
    correction: Option<ImageCorrection>,
}

/// Smallest power-of-two n that resolves time t on a box of side `period`.
pub fn required_points(b: &Bernstein, t: f64, period: f64) -> Result<usize> {
    let lambda = b.phi_inverse(-SPECTRAL_TAIL.ln() / t)?;
    let n = (lambda.sqrt() * period / PI).ceil().max(4.0) as usize;
    Ok(n.next_power_of_two())
}

/// Inverse DFT of e^{−tφ(|ξ|²)} on the dual lattice of `spec`.
pub fn density(b: &Bernstein, t: f64, spec: GridSpec) -> Result<HeatKernelGrid> {
    b.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    let cutoff = PI * spec.n as f64 / spec.period;
    let edge = (-t * b.phi(cutoff * cutoff)).exp();
    if edge >= SPECTRAL_TAIL {
        let need = required_points(b, t, spec.period)?;
        return Err(Error::Resolution(format!(
            "e^(-tφ) = {edge:.2e} at the grid cutoff for t = {t}; use n ≥ {need}"
        )));
    }
    let characteristic: Vec<f64> = (0..spec.len())
        .map(|i| {
            let xi = spectral::wave_vector(&spec, i);
            (-t * b.phi(xi[0] * xi[0] + xi[1] * xi[1])).exp()
        })
        .collect();
    let s = characteristic.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    let grid = GridFunction::from_spectrum(spec, s).scale(1.0 / spec.cell());
    Ok(HeatKernelGrid {
        t,
        bernstein: *b,
        grid,
        spectral_cutoff: cutoff,
        characteristic,
        correction: None,
    })
}

impl HeatKernelGrid {
    /// Enables removal of the nearest lattice images and a continuum tail, so
    /// pointwise values approximate the density on the whole space.
    pub fn with_free_space(mut self, images: usize) -> Result<Self> {
        self.correction = if images == 0 {
            None
        } else {
            Some(ImageCorrection::new(&self.bernstein, self.t, &self.grid.grid, images)?)
        };
        Ok(self)
    }

    pub fn spec(&self) -> GridSpec {
        self.grid.grid
    }

    /// Grid values, free-space corrected when enabled.
    pub fn values(&self) -> GridFunction {
        match &self.correction {
            None => self.grid.clone(),
            Some(c) => {
                let spec = self.spec();
                let mut out = self.grid.clone();
                for (i, v) in out.values.iter_mut().enumerate() {
                    let x = spec.displacement([0.0, 0.0], spec.point(i));
                    *v -= c.eval(x);
                }
                out
            }
        }
    }

    pub fn mass(&self) -> f64 {
        self.grid.integral()
    }

    /// ∂^γ q(t, x) at an arbitrary point by summing the Fourier series.
    pub fn derivative_at(&self, x: [f64; 2], order: [usize; 2]) -> f64 {
        let spec = self.spec();
        let mut acc = 0.0;
        for (i, &c) in self.characteristic.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let xi = spectral::wave_vector(&spec, i);
            let phase = Complex64::new(0.0, xi[0] * x[0] + xi[1] * x[1]).exp();
            let m = spectral::derivative_multiplier(order, xi, spectral::is_nyquist(&spec, i));
            acc += c * (m * phase).re;
        }
        let mut v = acc / spec.period.powi(spec.dim as i32);
        if let Some(corr) = &self.correction {
            v -= if order == [0, 0] { corr.eval(x) } else { corr.derivative(x, order) };
        }
        v
    }

    pub fn eval_at(&self, x: [f64; 2]) -> f64 {
        self.derivative_at(x, [0, 0])
    }
}

/// Semigroup given either by a density (Q_t) or by a multiplier (P_t).
#[derive(Debug, Clone, Copy)]
pub enum Propagator<'a> {
    Density(&'a HeatKernelGrid),
    Symbol { table: &'a SymbolTable, t: f64 },
}

/// Q_t f = q(t,·) ⊛ f or P_t f = F⁻¹(e^{−t·symbol}F(f)).
pub fn semigroup_apply(p: Propagator<'_>, f: &GridFunction) -> Result<GridFunction> {
    match p {
        Propagator::Density(q) => {
            q.spec().check_same(&f.grid)?;
            let mut s = f.spectrum();
            let k = q.grid.spectrum();
            let cell = q.spec().cell();
            for (v, w) in s.iter_mut().zip(k) {
                *v *= w * cell;
            }
            Ok(GridFunction::from_spectrum(f.grid, s))
        }
        Propagator::Symbol { table, t } => table.semigroup(t, f),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundSample {
    pub t: f64,
    pub x: f64,
    pub value: f64,
    pub reference: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub c_hat: f64,
    pub worst_t: f64,
    pub worst_x: f64,
    pub samples: Vec<BoundSample>,
}

impl BoundReport {
    fn from_samples(samples: Vec<BoundSample>, two_sided: bool) -> Self {
        let score = |s: &BoundSample| {
            if two_sided {
                s.ratio.max(1.0 / s.ratio)
            } else {
                s.ratio
            }
        };
        let mut best = (0.0, f64::NAN, f64::NAN);
        for s in &samples {
            let c = score(s);
            if c > best.0 || c.is_nan() {
                best = (c, s.t, s.x);
            }
        }
        Self { c_hat: best.0, worst_t: best.1, worst_x: best.2, samples }
    }
}

/// min(φ⁻¹(1/t)^{d/2}, tφ(|x|⁻²)/|x|^d)
pub fn twosided_reference(b: &Bernstein, t: f64, x: f64, dim: usize) -> Result<f64> {
    let d = dim as f64;
    let near = b.phi_inverse(1.0 / t)?.powf(0.5 * d);
    if x == 0.0 {
        return Ok(near);
    }
    let far = t * b.phi(1.0 / (x * x)) / x.abs().powf(d);
    Ok(near.min(far))
}

fn resolved_setup(b: &Bernstein, t: f64, setup: &BoxSetup) -> Result<HeatKernelGrid> {
    density(b, t, setup.grid()?)?.with_free_space(setup.images)
}

/// Worst two-sided ratio of q(t,x) to its comparison profile; x runs along
/// the first axis.
pub fn check_twosided(b: &Bernstein, t_list: &[f64], x_list: &[f64], setup: &BoxSetup) -> Result<BoundReport> {
    let mut samples = Vec::new();
    for &t in t_list {
        let q = resolved_setup(b, t, setup)?;
        for &x in x_list {
            let value = q.eval_at([x, 0.0]);
            let reference = twosided_reference(b, t, x, setup.dim)?;
            samples.push(BoundSample { t, x, value, reference, ratio: value / reference });
        }
    }
    Ok(BoundReport::from_samples(samples, true))
}

/// Worst ratio of Σ_{|γ|=k}|∂^γ q(t,x)| to φ⁻¹(1/t)^{k/2} times the profile.
pub fn check_derivative_bound(
    b: &Bernstein,
    k: usize,
    t_list: &[f64],
    x_list: &[f64],
    setup: &BoxSetup,
) -> Result<BoundReport> {
    if k > 3 {
        return Err(Error::Precondition(format!("derivative order {k} > 3")));
    }
    let mut samples = Vec::new();
    for &t in t_list {
        let q = resolved_setup(b, t, setup)?;
        let scale = b.phi_inverse(1.0 / t)?.powf(0.5 * k as f64);
        for &x in x_list {
            let value: f64 = multi_indices(setup.dim, k)
                .into_iter()
                .map(|g| q.derivative_at([x, 0.0], g).abs())
                .sum();
            let reference = scale * twosided_reference(b, t, x, setup.dim)?;
            samples.push(BoundSample { t, x, value, reference, ratio: value / reference });
        }
    }
    Ok(BoundReport::from_samples(samples, false))
}

#[derive(Debug, Clone, Serialize)]
pub struct SemigroupBoundReport {
    pub c_hat: f64,
    pub worst_t: f64,
    /// (t, ‖D^k P_t f‖₀·varphi⁻¹(t)^k/‖f‖₀)
    pub ratios: Vec<(f64, f64)>,
}

/// max_t ‖D^k P_t f‖₀ varphi⁻¹(t)^k / ‖f‖₀ with the exact subordinate symbol.
pub fn check_semigroup_derivative_bound(
    b: &Bernstein,
    f: &GridFunction,
    k: usize,
    t_list: &[f64],
) -> Result<SemigroupBoundReport> {
    if k > 3 {
        return Err(Error::Precondition(format!("derivative order {k} > 3")));
    }
    let table = SymbolTable::subordinate(b, f.grid);
    let norm = f.sup_norm();
    let mut ratios = Vec::with_capacity(t_list.len());
    for &t in t_list {
        if norm == 0.0 {
            ratios.push((t, 0.0));
            continue;
        }
        let p = table.semigroup(t, f)?;
        let d = p
            .derivatives_of_order(k)
            .iter()
            .map(GridFunction::sup_norm)
            .fold(0.0, f64::max);
        ratios.push((t, d * b.varphi_inverse(t)?.powi(k as i32) / norm));
    }
    let (worst_t, c_hat) = ratios
        .iter()
        .cloned()
        .fold((f64::NAN, 0.0), |acc, (t, r)| if r > acc.1 { (t, r) } else { acc });
    Ok(SemigroupBoundReport { c_hat, worst_t, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::random_holder_sample;
    use crate::modulus::Modulus;

    fn cauchy() -> Bernstein {
        Bernstein::Stable { alpha: 0.5 }
    }

    // subordination with the closed 1/2-stable subordinator density
    fn cauchy_by_subordination(t: f64, x: f64) -> f64 {
        let eta = |s: f64| t / (2.0 * PI.sqrt()) * s.powf(-1.5) * (-t * t / (4.0 * s)).exp();
        let gauss = |s: f64| (4.0 * PI * s).powf(-0.5) * (-x * x / (4.0 * s)).exp();
        adaptive_log(|s| eta(s) * gauss(s), 1e-8, 1e14, Tolerance::rel(1e-12)).value
    }

    #[test]
    fn subordination_oracle_is_cauchy() {
        for x in [0.0, 0.5, 3.0] {
            let v = cauchy_by_subordination(1.0, x);
            assert!((v - 1.0 / (PI * (1.0 + x * x))).abs() < 1e-9, "{x}");
        }
    }

    #[test]
    fn cauchy_density_on_large_box() {
        let spec = GridSpec::new(1, 2048, 64.0).unwrap();
        let q = density(&cauchy(), 1.0, spec).unwrap().with_free_space(8).unwrap();
        let v0 = q.eval_at([0.0, 0.0]);
        assert!((v0 - cauchy_by_subordination(1.0, 0.0)).abs() < 1e-5, "{v0}");
        let vals = q.values();
        let mut worst = 0.0f64;
        for i in 0..spec.len() {
            let x = spec.displacement([0.0, 0.0], spec.point(i))[0];
            worst = worst.max((vals.values[i] - 1.0 / (PI * (1.0 + x * x))).abs());
        }
        assert!(worst < 1e-5, "{worst}");
        assert!((q.mass() - 1.0).abs() < 1e-12);
        // the raw periodized density misses the oracle at the origin
        assert!((q.grid.values[0] - 1.0 / PI).abs() > 1e-4);
    }

    #[test]
    fn density_symmetry_positivity_and_mass() {
        for b in [cauchy(), Bernstein::StableLog { alpha: 0.3, beta: 0.4 }] {
            let n = required_points(&b, 1.0, 16.0).unwrap();
            for spec in [GridSpec::new(1, n, 16.0).unwrap(), GridSpec::new(2, n, 16.0).unwrap()] {
                let q = density(&b, 1.0, spec).unwrap();
                assert!((q.mass() - 1.0).abs() < 1e-6);
                assert!(q.grid.min() > -1e-8);
                for i in 0..spec.len() {
                    let [a, c] = spec.unflatten(i);
                    let j = spec.flatten([(spec.n - a) % spec.n, (spec.n - c) % spec.n]);
                    assert!((q.grid.values[i] - q.grid.values[j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn resolution_error_suggests_points() {
        let spec = GridSpec::new(1, 64, 64.0).unwrap();
        match density(&cauchy(), 0.25, spec) {
            Err(Error::Resolution(msg)) => assert!(msg.contains("n ≥ 4096"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let need = required_points(&cauchy(), 0.25, 64.0).unwrap();
        assert!(density(&cauchy(), 0.25, GridSpec::new(1, need, 64.0).unwrap()).is_ok());
    }

    #[test]
    fn chapman_kolmogorov() {
        let b = Bernstein::StableLog { alpha: 0.3, beta: 0.4 };
        let spec = GridSpec::new(1, 1024, 32.0).unwrap();
        let q1 = density(&b, 0.5, spec).unwrap();
        let q2 = density(&b, 0.75, spec).unwrap();
        let q3 = density(&b, 1.25, spec).unwrap();
        let conv = semigroup_apply(Propagator::Density(&q1), &q2.grid).unwrap();
        assert!(conv.sub(&q3.grid).unwrap().sup_norm() < 1e-8);
    }

    #[test]
    fn semigroup_law_and_eigenfunctions() {
        let grid = GridSpec::line(256);
        let sym = SymbolTable::subordinate(&Bernstein::Stable { alpha: 0.7 }, grid);
        let f = random_holder_sample(&Modulus::power(0.5), 3, 256, 1).unwrap();
        let a = sym.semigroup(0.3, &sym.semigroup(0.2, &f).unwrap()).unwrap();
        let b = sym.semigroup(0.5, &f).unwrap();
        assert!(a.sub(&b).unwrap().sup_norm() < 1e-10);
        assert!(sym.semigroup(0.5, &f).unwrap().sup_norm() <= f.sup_norm() * (1.0 + 1e-12));
        let c = GridFunction::from_fn(grid, |p| (5.0 * p[0]).cos());
        let pc = sym.semigroup(0.4, &c).unwrap();
        let m = (-0.4 * sym.values[5]).exp();
        assert!(pc.sub(&c.scale(m)).unwrap().sup_norm() < 1e-13);
        let small = sym.semigroup(1e-9, &f).unwrap();
        assert!(small.sub(&f).unwrap().sup_norm() < 1e-4);
    }

    #[test]
    fn twosided_single_point_and_cauchy_range() {
        let setup = BoxSetup::line(4096, 64.0);
        let r = check_twosided(&cauchy(), &[1.0], &[0.0], &setup).unwrap();
        assert!((r.samples[0].ratio - 1.0 / PI).abs() < 1e-5);
        let xs: Vec<f64> = (-6..=3).map(|k| 2f64.powi(k)).collect();
        let r = check_twosided(&cauchy(), &[0.25, 1.0, 4.0], &xs, &setup).unwrap();
        // explicit Cauchy ratio: (t/π(t²+x²))/min(1/t, t/x²)
        let mut oracle = 0.0f64;
        for t in [0.25, 1.0, 4.0] {
            for &x in &xs {
                let ratio = t / (PI * (t * t + x * x)) / (1.0 / t).min(t / (x * x));
                oracle = oracle.max(ratio.max(1.0 / ratio));
            }
        }
        assert!((r.c_hat / oracle - 1.0).abs() < 1e-3, "{} vs {oracle}", r.c_hat);
    }

    #[test]
    fn derivative_bound_for_cauchy() {
        let setup = BoxSetup::line(4096, 64.0);
        let xs: Vec<f64> = (-6..=3).map(|k| 2f64.powi(k)).collect();
        let r = check_derivative_bound(&cauchy(), 1, &[0.25, 1.0, 4.0], &xs, &setup).unwrap();
        let q = density(&cauchy(), 1.0, setup.grid().unwrap()).unwrap();
        assert!(q.derivative_at([0.0, 0.0], [1, 0]).abs() < 1e-14);
        // derivative of t/(π(t²+x²)) is −2tx/(π(t²+x²)²)
        let x = 0.5f64;
        let t = 1.0;
        let exact = -2.0 * t * x / (PI * (t * t + x * x).powi(2));
        let q = q.with_free_space(8).unwrap();
        assert!((q.derivative_at([x, 0.0], [1, 0]) - exact).abs() < 1e-6);
        assert!(r.c_hat.is_finite() && r.c_hat > 0.0);
        let r2 = check_derivative_bound(&cauchy(), 1, &[0.25, 1.0, 4.0], &xs, &setup.refined()).unwrap();
        assert!((r2.c_hat / r.c_hat - 1.0).abs() < 1e-2);
    }

    #[test]
    fn semigroup_derivative_bound_constant_and_finite() {
        let b = Bernstein::Stable { alpha: 0.5 };
        let grid = GridSpec::line(256);
        let ts: Vec<f64> = (0..=8).map(|k| 2f64.powi(-k)).collect();
        let c = GridFunction::constant(grid, 2.0);
        let r = check_semigroup_derivative_bound(&b, &c, 1, &ts).unwrap();
        assert!(r.c_hat < 1e-12);
        let f = random_holder_sample(&Modulus::power(0.5), 1, 256, 1).unwrap();
        for k in [1, 2] {
            let r = check_semigroup_derivative_bound(&b, &f, k, &ts).unwrap();
            assert!(r.c_hat.is_finite() && r.c_hat > 0.0);
        }
    }
}
