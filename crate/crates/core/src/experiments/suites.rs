use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::funcspace::{holder_norm, mollify, random_holder_sample_on, GridFunction, GridSpec, INTEGER_GUARD};
use crate::heatkernel::{compute_symbol, solve_constant, SymbolTable};
use crate::levykernel::{KernelCoefficient, LevyKernel};
use crate::modulus::Modulus;
use crate::nonlocal::{Cutoff, DiscreteOperator, OperatorSpec};

/// One corpus function at one resolution.
#[derive(Debug, Clone, Serialize)]
pub struct RatioSample {
    pub seed: u64,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
}

/// Ratios of one corpus at one resolution.
#[derive(Debug, Clone, Serialize)]
pub struct ResolutionTrace {
    pub n: usize,
    pub seed_base: u64,
    pub c_hat: f64,
    pub samples: Vec<RatioSample>,
}

impl ResolutionTrace {
    fn new(n: usize, seed_base: u64, samples: Vec<RatioSample>) -> Self {
        let c_hat = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
        Self { n, seed_base, c_hat, samples }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioReport {
    pub experiment: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    /// One trace per resolution on the primary corpus, then the re-seeded
    /// corpus at the finest resolution.
    pub traces: Vec<ResolutionTrace>,
    /// Ĉ on the primary corpus at the finest resolution.
    pub c_hat: f64,
    /// Relative change of Ĉ between the two finest resolutions.
    pub resolution_change: f64,
    /// Relative change of Ĉ under re-seeding at the finest resolution.
    pub reseed_change: f64,
}

impl RatioReport {
    fn assemble(experiment: &str, cfg: &ExperimentConfig, primary: Vec<ResolutionTrace>, reseeded: ResolutionTrace) -> Self {
        let c_hat = primary.last().map_or(0.0, |t| t.c_hat);
        let resolution_change = match primary.len() {
            0 | 1 => 0.0,
            k => rel_change(primary[k - 2].c_hat, primary[k - 1].c_hat),
        };
        let reseed_change = rel_change(c_hat, reseeded.c_hat);
        let mut seeds = corpus_seeds(cfg.corpus.seed, cfg.corpus.size);
        seeds.extend(corpus_seeds(cfg.corpus.reseed, cfg.corpus.size));
        let mut traces = primary;
        traces.push(reseeded);
        Self {
            experiment: experiment.into(),
            config_hash: cfg.hash(),
            seeds,
            traces,
            c_hat,
            resolution_change,
            reseed_change,
        }
    }
}

pub fn rel_change(reference: f64, other: f64) -> f64 {
    if reference == 0.0 {
        if other == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (other - reference).abs() / reference.abs()
    }
}

fn corpus_seeds(base: u64, size: usize) -> Vec<u64> {
    (0..size as u64).map(|i| base + i).collect()
}

/// Corpus members in seed order.
pub fn corpus(m: &Modulus, grid: GridSpec, base: u64, size: usize) -> Result<Vec<(u64, GridFunction)>> {
    corpus_seeds(base, size)
        .into_par_iter()
        .map(|s| random_holder_sample_on(m, s, grid).map(|f| (s, f)))
        .collect()
}

/// I_ψ inside (0, 1).
pub fn guard_source(psi: &Modulus) -> Result<()> {
    let idx = psi.indices();
    if idx.inside_unit_interval(0, INTEGER_GUARD) {
        Ok(())
    } else {
        Err(Error::IndexGuard(format!(
            "I_ψ = [{:.4}, {:.4}] must lie in (0, 1) with margin {INTEGER_GUARD}; integer orders are excluded",
            idx.m, idx.big_m
        )))
    }
}

/// I_{φψ} inside one of (0,1), (1,2), (2,3).
pub fn guard_target(phipsi: &Modulus) -> Result<()> {
    let idx = phipsi.indices();
    if (0..3).any(|k| idx.inside_unit_interval(k, INTEGER_GUARD)) {
        Ok(())
    } else {
        Err(Error::IndexGuard(format!(
            "I_φψ = [{:.4}, {:.4}] must lie inside (0,1), (1,2) or (2,3) with margin {INTEGER_GUARD} (integer orders excluded)",
            idx.m, idx.big_m
        )))
    }
}

/// M_φ ∨ M_ψ < m_φψ, needed to control the frozen-coefficient perturbation.
pub fn guard_perturbation(varphi: &Modulus, psi: &Modulus, phipsi: &Modulus) -> Result<()> {
    let top = varphi.indices().big_m.max(psi.indices().big_m);
    let low = phipsi.indices().m;
    if top < low {
        Ok(())
    } else {
        Err(Error::IndexGuard(format!(
            "M_φ ∨ M_ψ = {top:.4} must be below m_φψ = {low:.4} (perturbation estimate)"
        )))
    }
}

/// M_φ ∨ M_ψ < m_φ + m_ψ.
pub fn guard_mapping(varphi: &Modulus, psi: &Modulus) -> Result<()> {
    let (a, b) = (varphi.indices(), psi.indices());
    let top = a.big_m.max(b.big_m);
    if top < a.m + b.m {
        Ok(())
    } else {
        Err(Error::IndexGuard(format!(
            "M_φ ∨ M_ψ = {top:.4} must be below m_φ + m_ψ = {:.4} (mapping estimate)",
            a.m + b.m
        )))
    }
}

/// The three moduli of an experiment, with the common guards checked.
pub struct Moduli {
    pub varphi: Modulus,
    pub psi: Modulus,
    pub phipsi: Modulus,
}

impl Moduli {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let varphi = Modulus::from_spec(&cfg.varphi)?;
        let psi = Modulus::from_spec(&cfg.psi)?;
        guard_source(&psi)?;
        let phipsi = varphi.product(&psi);
        guard_target(&phipsi)?;
        Ok(Self { varphi, psi, phipsi })
    }
}

pub fn operator_spec(cfg: &ExperimentConfig, varphi: &Modulus) -> Result<OperatorSpec> {
    let coeff = KernelCoefficient::new(cfg.coefficient.clone(), cfg.period)?;
    let kernel = LevyKernel::new(varphi.clone(), cfg.dim, coeff)?;
    OperatorSpec::new(kernel, cfg.quadrature)
}

fn grid_at(cfg: &ExperimentConfig, n: usize) -> Result<GridSpec> {
    GridSpec::new(cfg.dim, n, cfg.period)
}

fn constant_symbol(spec: &OperatorSpec, grid: GridSpec) -> Result<SymbolTable> {
    if !spec.kernel.coefficient.is_constant_in_x() {
        return Err(Error::Config("the constant-coefficient solver needs a coefficient independent of x".into()));
    }
    compute_symbol(&spec.kernel, [0.0; 2], grid)
}

fn traces<F>(cfg: &ExperimentConfig, member: &Modulus, per_grid: F) -> Result<(Vec<ResolutionTrace>, ResolutionTrace)>
where
    F: Fn(GridSpec, &[(u64, GridFunction)]) -> Result<Vec<RatioSample>>,
{
    let mut primary = Vec::with_capacity(cfg.resolutions.len());
    for &n in &cfg.resolutions {
        let grid = grid_at(cfg, n)?;
        let fs = corpus(member, grid, cfg.corpus.seed, cfg.corpus.size)?;
        primary.push(ResolutionTrace::new(n, cfg.corpus.seed, per_grid(grid, &fs)?));
    }
    let n = *cfg.resolutions.last().expect("validated non-empty");
    let grid = grid_at(cfg, n)?;
    let fs = corpus(member, grid, cfg.corpus.reseed, cfg.corpus.size)?;
    let reseeded = ResolutionTrace::new(n, cfg.corpus.reseed, per_grid(grid, &fs)?);
    Ok((primary, reseeded))
}

fn solve_ratios(
    spec: &OperatorSpec,
    m: &Moduli,
    grid: GridSpec,
    fs: &[(u64, GridFunction)],
    sign: f64,
) -> Result<Vec<RatioSample>> {
    let symbol = constant_symbol(spec, grid)?;
    fs.par_iter()
        .map(|(seed, f)| {
            let u = solve_constant(&symbol, f)?.scale(sign);
            let numerator = holder_norm(&u, &m.phipsi)?.norm;
            let denominator = u.sup_norm() + holder_norm(f, &m.psi)?.norm;
            Ok(RatioSample { seed: *seed, numerator, denominator, ratio: numerator / denominator })
        })
        .collect()
}

/// ‖u‖_{C^{φψ}} / (‖u‖₀ + ‖f‖_{C^ψ}) for 𝓛₀u = f over a C^ψ corpus.
pub fn schauder_ratio(cfg: &ExperimentConfig) -> Result<RatioReport> {
    let m = Moduli::from_config(cfg)?;
    let spec = operator_spec(cfg, &m.varphi)?;
    let (primary, reseeded) = traces(cfg, &m.psi, |g, fs| solve_ratios(&spec, &m, g, fs, 1.0))?;
    Ok(RatioReport::assemble("schauder", cfg, primary, reseeded))
}

/// ‖Rf‖_{C^{φψ}} / (‖f‖_{C^ψ} + ‖Rf‖₀) for the potential R = −𝓛₀⁻¹ on mean-zero data.
pub fn potential_regularity(cfg: &ExperimentConfig) -> Result<RatioReport> {
    let m = Moduli::from_config(cfg)?;
    let spec = operator_spec(cfg, &m.varphi)?;
    let (primary, reseeded) = traces(cfg, &m.psi, |g, fs| solve_ratios(&spec, &m, g, fs, -1.0))?;
    Ok(RatioReport::assemble("potential", cfg, primary, reseeded))
}

/// Order function of the I_φψ ⊂ (2,3) potential branch.
pub const HIGH_ORDER_VARPHI: f64 = 1.8;

/// The potential ratio rerun with varphi = r^1.8, which needs m_φ > 1 and
/// I_φψ inside (2,3).
pub fn potential_high_order(cfg: &ExperimentConfig) -> Result<RatioReport> {
    let mut branch = cfg.clone();
    branch.varphi = crate::modulus::ModulusSpec::Power { alpha: HIGH_ORDER_VARPHI };
    let m = Moduli::from_config(&branch)?;
    if !m.phipsi.indices().inside_unit_interval(2, INTEGER_GUARD) {
        let idx = m.phipsi.indices();
        return Err(Error::IndexGuard(format!(
            "high-order branch needs I_φψ = [{:.4}, {:.4}] inside (2,3), which forces m_φ > 1",
            idx.m, idx.big_m
        )));
    }
    let spec = operator_spec(&branch, &m.varphi)?;
    let (primary, reseeded) = traces(&branch, &m.psi, |g, fs| solve_ratios(&spec, &m, g, fs, -1.0))?;
    Ok(RatioReport::assemble("potential_high_order", &branch, primary, reseeded))
}

/// ‖𝓛u‖_{C^ψ} / ‖u‖_{C^{φψ}} over a C^{φψ} corpus.
pub fn mapping_ratio(cfg: &ExperimentConfig) -> Result<RatioReport> {
    let m = Moduli::from_config(cfg)?;
    guard_mapping(&m.varphi, &m.psi)?;
    let spec = operator_spec(cfg, &m.varphi)?;
    let (primary, reseeded) = traces(cfg, &m.phipsi, |g, us| {
        let op = DiscreteOperator::new(&spec, g)?;
        us.par_iter()
            .map(|(seed, u)| {
                let lu = op.apply(u)?;
                let numerator = holder_norm(&lu, &m.psi)?.norm;
                let denominator = holder_norm(u, &m.phipsi)?.norm;
                Ok(RatioSample { seed: *seed, numerator, denominator, ratio: numerator / denominator })
            })
            .collect()
    })?;
    Ok(RatioReport::assemble("mapping", cfg, primary, reseeded))
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationRow {
    pub r: f64,
    pub seed: u64,
    pub h_norm: f64,
    pub b_norm: f64,
    pub v_sup: f64,
    pub v_norm: f64,
    pub u_norm: f64,
    pub identity_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationReport {
    pub config_hash: String,
    pub n: usize,
    pub x0: [f64; 2],
    pub rows: Vec<PerturbationRow>,
    /// (r, max over the corpus of ‖𝓑v‖_{C^ψ}/‖v‖_{C^{φψ}})
    pub coefficients: Vec<(f64, f64)>,
    /// Strictly decreasing as r shrinks.
    pub monotone: bool,
    /// sup over rows of the residual of 𝓛(uη) = η𝓛u + u𝓛η + H.
    pub identity_residual: f64,
}

/// For v = uη_{r,x₀}: ‖H‖_{C^ψ}, ‖𝓑v‖_{C^ψ} and the coefficient of ‖v‖_{C^{φψ}}
/// in the bound on 𝓑v, on the finest configured grid.
pub fn perturbation_suite(cfg: &ExperimentConfig) -> Result<PerturbationReport> {
    let m = Moduli::from_config(cfg)?;
    guard_perturbation(&m.varphi, &m.psi, &m.phipsi)?;
    let spec = operator_spec(cfg, &m.varphi)?;
    let n = *cfg.resolutions.last().expect("validated non-empty");
    let grid = grid_at(cfg, n)?;
    let mut x0 = cfg.perturbation.x0;
    if cfg.dim == 1 {
        x0[1] = 0.0;
    }
    let op = DiscreteOperator::new(&spec, grid)?;
    let bop = op.perturbation(x0);
    let us = corpus(&m.phipsi, grid, cfg.corpus.seed, cfg.perturbation.corpus_size)?;
    let lus: Vec<GridFunction> = us.iter().map(|(_, u)| op.apply(u)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut coefficients = Vec::new();
    for &r in &cfg.perturbation.radii {
        let eta = Cutoff::new(grid, x0, r)?.values;
        let l_eta = op.apply(&eta)?;
        let batch: Vec<PerturbationRow> = us
            .par_iter()
            .zip(&lus)
            .map(|((seed, u), lu)| {
                let v = u.mul(&eta)?;
                let h = op.apply_h(u, &eta)?;
                let bv = bop.apply(&v)?;
                let rhs = eta.mul(lu)?.add(&u.mul(&l_eta)?)?.add(&h)?;
                let identity_residual = op.apply(&v)?.sub(&rhs)?.sup_norm();
                Ok(PerturbationRow {
                    r,
                    seed: *seed,
                    h_norm: holder_norm(&h, &m.psi)?.norm,
                    b_norm: holder_norm(&bv, &m.psi)?.norm,
                    v_sup: v.sup_norm(),
                    v_norm: holder_norm(&v, &m.phipsi)?.norm,
                    u_norm: holder_norm(u, &m.phipsi)?.norm,
                    identity_residual,
                })
            })
            .collect::<Result<_>>()?;
        let c = batch.iter().map(|row| row.b_norm / row.v_norm).fold(0.0, f64::max);
        coefficients.push((r, c));
        rows.extend(batch);
    }
    let mut by_radius = coefficients.clone();
    by_radius.sort_by(|a, b| b.0.total_cmp(&a.0));
    let monotone = by_radius.windows(2).all(|w| w[1].1 < w[0].1);
    let identity_residual = rows.iter().map(|r| r.identity_residual).fold(0.0, f64::max);
    Ok(PerturbationReport { config_hash: cfg.hash(), n, x0, rows, coefficients, monotone, identity_residual })
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceTrace {
    pub n: usize,
    /// max over the corpus of ‖f‖_{C^ψ}/(‖f‖₀ + [[f]]_{C^ψ})
    pub max_ratio: f64,
    /// max over the corpus of the reciprocal
    pub max_reciprocal: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub psi: Modulus,
    pub traces: Vec<EquivalenceTrace>,
    /// Relative change of max(ratio, reciprocal) between the two finest grids.
    pub resolution_change: f64,
}

impl EquivalenceReport {
    pub fn worst(&self) -> f64 {
        self.traces.iter().map(|t| t.max_ratio.max(t.max_reciprocal)).fold(0.0, f64::max)
    }
}

/// Norm-equivalence constants of ψ over a C^ψ corpus at each resolution.
pub fn norm_equivalence(
    psi: &Modulus,
    dim: usize,
    period: f64,
    resolutions: &[usize],
    seed: u64,
    size: usize,
) -> Result<EquivalenceReport> {
    let mut traces = Vec::new();
    for &n in resolutions {
        let grid = GridSpec::new(dim, n, period)?;
        let fs = corpus(psi, grid, seed, size)?;
        let ratios: Vec<f64> = fs
            .par_iter()
            .map(|(_, f)| {
                let r = holder_norm(f, psi)?;
                Ok(r.norm / (r.sup_norm + r.seminorm_second))
            })
            .collect::<Result<_>>()?;
        traces.push(EquivalenceTrace {
            n,
            max_ratio: ratios.iter().cloned().fold(0.0, f64::max),
            max_reciprocal: ratios.iter().map(|r| 1.0 / r).fold(0.0, f64::max),
        });
    }
    let worst = |t: &EquivalenceTrace| t.max_ratio.max(t.max_reciprocal);
    let resolution_change = match traces.len() {
        0 | 1 => 0.0,
        k => rel_change(worst(&traces[k - 2]), worst(&traces[k - 1])),
    };
    Ok(EquivalenceReport { psi: psi.clone(), traces, resolution_change })
}

#[derive(Debug, Clone, Serialize)]
pub struct MollificationFit {
    pub seed: u64,
    /// log-log slope of ‖f − f_ε‖₀ against ε
    pub error_slope: f64,
    /// log-log slope of max_{|γ|=2}‖D^γ f_ε‖₀ against ε
    pub second_derivative_slope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MollificationReport {
    pub n: usize,
    pub eps: Vec<f64>,
    pub fits: Vec<MollificationFit>,
    pub min_error_slope: f64,
    /// Largest |slope − (m_ψ − 2)| over the corpus.
    pub max_second_derivative_deviation: f64,
    pub m_psi: f64,
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Mollification rates over a C^ψ corpus.
pub fn mollification_rates(
    psi: &Modulus,
    grid: GridSpec,
    eps: &[f64],
    seed: u64,
    size: usize,
) -> Result<MollificationReport> {
    if eps.len() < 2 {
        return Err(Error::Precondition("at least two mollifier radii are needed for a slope".into()));
    }
    let m_psi = psi.indices().m;
    let fs = corpus(psi, grid, seed, size)?;
    let fits: Vec<MollificationFit> = fs
        .par_iter()
        .map(|(s, f)| {
            let mut err = Vec::with_capacity(eps.len());
            let mut d2 = Vec::with_capacity(eps.len());
            for &e in eps {
                let fe = mollify(f, e)?;
                err.push(f.sub(&fe)?.sup_norm());
                d2.push(fe.derivatives_of_order(2).iter().map(GridFunction::sup_norm).fold(0.0, f64::max));
            }
            Ok(MollificationFit {
                seed: *s,
                error_slope: loglog_slope(eps, &err),
                second_derivative_slope: loglog_slope(eps, &d2),
            })
        })
        .collect::<Result<_>>()?;
    let min_error_slope = fits.iter().map(|f| f.error_slope).fold(f64::INFINITY, f64::min);
    let max_second_derivative_deviation = fits
        .iter()
        .map(|f| (f.second_derivative_slope - (m_psi - 2.0)).abs())
        .fold(0.0, f64::max);
    Ok(MollificationReport { n: grid.n, eps: eps.to_vec(), fits, min_error_slope, max_second_derivative_deviation, m_psi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heatkernel::fractional_constant;
    use crate::modulus::ModulusSpec;
    use serde_json::json;

    fn config(varphi: f64, psi: f64, extra: serde_json::Value) -> ExperimentConfig {
        let mut v = json!({
            "psi": {"family": "power", "alpha": psi},
            "varphi": {"family": "power", "alpha": varphi},
            "resolutions": [128, 256],
            "corpus": {"size": 4, "seed": 1, "reseed": 101},
        });
        for (k, val) in extra.as_object().unwrap() {
            v[k] = val.clone();
        }
        ExperimentConfig::from_value(v).unwrap()
    }

    #[test]
    fn guards_reject_integer_orders() {
        let cfg = config(1.0, 0.5, json!({"psi": {"family": "power", "alpha": 1.0}}));
        assert!(matches!(schauder_ratio(&cfg), Err(Error::IndexGuard(_))));
        let cfg = config(0.5, 0.5, json!({}));
        assert!(matches!(schauder_ratio(&cfg), Err(Error::IndexGuard(_))));
        // pure powers always satisfy the mapping condition
        assert!(guard_mapping(&Modulus::power(1.5), &Modulus::power(0.2)).is_ok());
        assert!(guard_perturbation(&Modulus::power(0.6), &Modulus::power(0.3), &Modulus::power(0.9)).is_ok());
        assert!(guard_perturbation(&Modulus::power(0.8), &Modulus::power(0.1), &Modulus::power(0.9)).is_ok());
        assert!(guard_perturbation(&Modulus::power(0.95), &Modulus::power(0.05), &Modulus::power(1.0)).is_ok());
        assert!(guard_perturbation(&Modulus::power(0.7), &Modulus::power(0.7), &Modulus::power(0.7)).is_err());
    }

    #[test]
    fn schauder_ratio_is_homogeneous() {
        // f ↦ 2f scales u and f together, so every ratio is unchanged
        let cfg = config(0.6, 0.3, json!({}));
        let m = Moduli::from_config(&cfg).unwrap();
        let spec = operator_spec(&cfg, &m.varphi).unwrap();
        let grid = GridSpec::line(256);
        let fs = corpus(&m.psi, grid, 3, 3).unwrap();
        let doubled: Vec<_> = fs.iter().map(|(s, f)| (*s, f.scale(2.0))).collect();
        let a = solve_ratios(&spec, &m, grid, &fs, 1.0).unwrap();
        let b = solve_ratios(&spec, &m, grid, &doubled, 1.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.ratio - y.ratio).abs() <= 1e-10 * x.ratio);
        }
    }

    #[test]
    fn schauder_matches_fractional_symbol() {
        // a₀ = 1/c₁ turns the order-one kernel into the exact |ξ| symbol
        let c1 = fractional_constant(1.0, 1);
        let cfg = config(1.0, 0.5, json!({"coefficient": {"kind": "constant", "value": 1.0 / c1}}));
        let rep = schauder_ratio(&cfg).unwrap();
        let m = Moduli::from_config(&cfg).unwrap();
        let grid = GridSpec::line(256);
        let table = SymbolTable::fractional(grid, 1.0, 1.0);
        let fs = corpus(&m.psi, grid, 1, 4).unwrap();
        let exact = fs
            .iter()
            .map(|(_, f)| {
                let u = solve_constant(&table, f).unwrap();
                holder_norm(&u, &m.phipsi).unwrap().norm / (u.sup_norm() + holder_norm(f, &m.psi).unwrap().norm)
            })
            .fold(0.0, f64::max);
        assert!(rel_change(exact, rep.c_hat) < 0.2, "{exact} vs {}", rep.c_hat);
        assert_eq!(rep.traces.len(), 3);
        assert_eq!(rep.seeds.len(), 8);
        assert!(rep.c_hat > 0.0 && rep.c_hat.is_finite());
    }

    #[test]
    fn potential_and_schauder_agree() {
        let cfg = config(0.6, 0.3, json!({}));
        let a = schauder_ratio(&cfg).unwrap();
        let b = potential_regularity(&cfg).unwrap();
        assert!(rel_change(a.c_hat, b.c_hat) < 1e-12);
    }

    #[test]
    fn high_order_branch_guard() {
        let cfg = config(0.6, 0.5, json!({}));
        let rep = potential_high_order(&cfg).unwrap();
        assert_eq!(rep.experiment, "potential_high_order");
        assert!(rep.c_hat.is_finite() && rep.c_hat > 0.0);
        let cfg = config(0.6, 0.1, json!({}));
        assert!(matches!(potential_high_order(&cfg), Err(Error::IndexGuard(_))));
    }

    #[test]
    fn mapping_is_bounded_and_rejects_asymmetry() {
        let cfg = config(1.0, 0.5, json!({"coefficient": {"kind": "cos_x", "base": 1.0, "amp": 0.5}}));
        let rep = mapping_ratio(&cfg).unwrap();
        assert!(rep.c_hat > 0.0 && rep.c_hat < 100.0);
        let cfg = config(1.0, 0.5, json!({"coefficient": {"kind": "asymmetric", "base": 1.0, "amp": 0.2}}));
        assert!(matches!(mapping_ratio(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn perturbation_rows_and_identity() {
        let cfg = config(
            0.6,
            0.3,
            json!({
                "coefficient": {"kind": "cos_x", "base": 1.0, "amp": 0.5},
                "resolutions": [256],
                "perturbation": {"corpus_size": 2}
            }),
        );
        let rep = perturbation_suite(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 6);
        assert_eq!(rep.coefficients.len(), 3);
        assert!(rep.identity_residual < 1e-9);
    }

    #[test]
    fn equivalence_and_mollification_on_small_grids() {
        let psi = Modulus::from_spec(&ModulusSpec::Power { alpha: 0.5 }).unwrap();
        let rep = norm_equivalence(&psi, 1, 2.0 * std::f64::consts::PI, &[256, 512], 1, 4).unwrap();
        assert!(rep.worst() >= 1.0 && rep.worst() < 50.0);
        let eps: Vec<f64> = (3..=6).map(|k| 2f64.powi(-k)).collect();
        let mr = mollification_rates(&psi, GridSpec::line(1024), &eps, 1, 2).unwrap();
        assert_eq!(mr.fits.len(), 2);
        assert!(mr.min_error_slope > 0.0);
        assert!((loglog_slope(&[1.0, 2.0, 4.0], &[3.0, 12.0, 48.0]) - 2.0).abs() < 1e-12);
    }
}
