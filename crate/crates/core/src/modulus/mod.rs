//! Moduli of continuity, Bernstein functions and the scaling analysis built
//! on them.

mod analysis;
mod bernstein;

use std::f64::consts::LN_2;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use analysis::{
    check_bernstein, check_scaling, dyadic_pair_extrema, estimate_indices, invert, tail_integral,
    BernsteinReport, IndexInterval, ScalingCertificate, ScalingReport, TailReport,
    DEFAULT_INDEX_DEPTH,
};
pub use bernstein::Bernstein;

/// Declarative description of a modulus, as it appears in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModulusSpec {
    /// r^α
    Power { alpha: f64 },
    /// r^α (ln(2/r)/ln 2)^{sign·β} on (0, 1].
    PowerLog {
        alpha: f64,
        beta: f64,
        #[serde(default = "default_sign")]
        sign: i8,
    },
    /// r^α ln(1 + r^β)/ln 2.
    PowerLog1p { alpha: f64, beta: f64 },
    Product { factors: Vec<ModulusSpec> },
    /// r⁻¹·m(r)
    RatioByR { inner: Box<ModulusSpec> },
    /// Log-log linear interpolation of samples; must bracket r = 1.
    Tabulated { r: Vec<f64>, values: Vec<f64> },
    /// varphi(r) = 1/φ(r⁻²) for a Bernstein function φ.
    OrderOf { bernstein: Bernstein },
}

fn default_sign() -> i8 {
    1
}

#[derive(Debug, Clone, PartialEq)]
struct Table {
    log_r: Vec<f64>,
    log_v: Vec<f64>,
}

impl Table {
    fn interp(&self, r: f64) -> Option<f64> {
        let x = r.ln();
        let n = self.log_r.len();
        let tol = 1e-12 * (1.0 + x.abs());
        if x < self.log_r[0] - tol || x > self.log_r[n - 1] + tol {
            return None;
        }
        let x = x.clamp(self.log_r[0], self.log_r[n - 1]);
        let i = match self.log_r.partition_point(|&v| v <= x) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        };
        let t = (x - self.log_r[i]) / (self.log_r[i + 1] - self.log_r[i]);
        Some((self.log_v[i] + t * (self.log_v[i + 1] - self.log_v[i])).exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    Power(f64),
    PowerLog { alpha: f64, beta: f64, sign: f64 },
    PowerLog1p { alpha: f64, beta: f64 },
    Product(Vec<Modulus>),
    RatioByR(Box<Modulus>),
    Tabulated(Table),
    OrderOf(Bernstein),
}

/// An evaluable modulus, normalized to equal 1 at r = 1.
#[derive(Debug, Clone)]
pub struct Modulus {
    spec: ModulusSpec,
    family: Family,
    r_min: f64,
    r_max: f64,
    indices: OnceLock<IndexInterval>,
}

impl PartialEq for Modulus {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Serialize for Modulus {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Modulus {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = ModulusSpec::deserialize(d)?;
        Modulus::from_spec(&spec).map_err(serde::de::Error::custom)
    }
}

impl Modulus {
    pub fn from_spec(spec: &ModulusSpec) -> Result<Self> {
        let (family, r_min, r_max) = match spec {
            ModulusSpec::Power { alpha } => {
                finite("alpha", *alpha)?;
                (Family::Power(*alpha), 0.0, f64::INFINITY)
            }
            ModulusSpec::PowerLog { alpha, beta, sign } => {
                finite("alpha", *alpha)?;
                finite("beta", *beta)?;
                if *sign != 1 && *sign != -1 {
                    return Err(Error::Config(format!("power_log sign must be ±1, got {sign}")));
                }
                let f = Family::PowerLog { alpha: *alpha, beta: *beta, sign: *sign as f64 };
                (f, 0.0, 1.0)
            }
            ModulusSpec::PowerLog1p { alpha, beta } => {
                finite("alpha", *alpha)?;
                if !(*beta > 0.0) {
                    return Err(Error::Config(format!("power_log1p needs beta > 0, got {beta}")));
                }
                (Family::PowerLog1p { alpha: *alpha, beta: *beta }, 0.0, f64::INFINITY)
            }
            ModulusSpec::Product { factors } => {
                if factors.is_empty() {
                    return Err(Error::Config("product needs at least one factor".into()));
                }
                let fs = factors.iter().map(Modulus::from_spec).collect::<Result<Vec<_>>>()?;
                let lo = fs.iter().map(|f| f.r_min).fold(0.0, f64::max);
                let hi = fs.iter().map(|f| f.r_max).fold(f64::INFINITY, f64::min);
                (Family::Product(fs), lo, hi)
            }
            ModulusSpec::RatioByR { inner } => {
                let m = Modulus::from_spec(inner)?;
                let (lo, hi) = (m.r_min, m.r_max);
                (Family::RatioByR(Box::new(m)), lo, hi)
            }
            ModulusSpec::Tabulated { r, values } => {
                let t = build_table(r, values)?;
                let lo = r[0];
                let hi = *r.last().unwrap();
                (Family::Tabulated(t), lo, hi)
            }
            ModulusSpec::OrderOf { bernstein } => {
                bernstein.validate()?;
                (Family::OrderOf(*bernstein), 0.0, f64::INFINITY)
            }
        };
        Ok(Self { spec: spec.clone(), family, r_min, r_max, indices: OnceLock::new() })
    }

    pub fn power(alpha: f64) -> Self {
        Self::from_spec(&ModulusSpec::Power { alpha }).expect("finite exponent")
    }

    pub fn power_log(alpha: f64, beta: f64, sign: i8) -> Result<Self> {
        Self::from_spec(&ModulusSpec::PowerLog { alpha, beta, sign })
    }

    pub fn power_log1p(alpha: f64, beta: f64) -> Result<Self> {
        Self::from_spec(&ModulusSpec::PowerLog1p { alpha, beta })
    }

    pub fn order_of(b: Bernstein) -> Result<Self> {
        Self::from_spec(&ModulusSpec::OrderOf { bernstein: b })
    }

    pub fn tabulated(r: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::from_spec(&ModulusSpec::Tabulated { r, values })
    }

    pub fn product(&self, other: &Modulus) -> Modulus {
        let spec = ModulusSpec::Product { factors: vec![self.spec.clone(), other.spec.clone()] };
        Self::from_spec(&spec).expect("factors already valid")
    }

    /// r ↦ r⁻¹·m(r)
    pub fn ratio_by_r(&self) -> Modulus {
        let spec = ModulusSpec::RatioByR { inner: Box::new(self.spec.clone()) };
        Self::from_spec(&spec).expect("inner already valid")
    }

    pub fn spec(&self) -> &ModulusSpec {
        &self.spec
    }

    /// Upper end of the domain (0, r_max].
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Smallest admissible argument (positive only for tabulated moduli).
    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) || r > self.r_max || r < self.r_min {
            return Err(Error::Domain(format!(
                "modulus argument {r} outside ({}, {}]",
                self.r_min, self.r_max
            )));
        }
        Ok(self.raw(r))
    }

    /// Evaluates without the domain check; callers guarantee `r` is admissible.
    pub fn value(&self, r: f64) -> f64 {
        debug_assert!(r > 0.0);
        self.raw(r)
    }

    fn raw(&self, r: f64) -> f64 {
        match &self.family {
            Family::Power(a) => r.powf(*a),
            Family::PowerLog { alpha, beta, sign } => {
                r.powf(*alpha) * ((2.0 / r).ln() / LN_2).powf(sign * beta)
            }
            Family::PowerLog1p { alpha, beta } => r.powf(*alpha) * r.powf(*beta).ln_1p() / LN_2,
            Family::Product(fs) => fs.iter().map(|f| f.raw(r)).product(),
            Family::RatioByR(m) => m.raw(r) / r,
            Family::Tabulated(t) => t.interp(r).unwrap_or(f64::NAN),
            Family::OrderOf(b) => b.varphi(r),
        }
    }

    /// Exponent α when the modulus is exactly r^α.
    pub fn power_exponent(&self) -> Option<f64> {
        match &self.family {
            Family::Power(a) => Some(*a),
            Family::Product(fs) => {
                fs.iter().map(|f| f.power_exponent()).try_fold(0.0, |acc, e| e.map(|e| acc + e))
            }
            Family::RatioByR(m) => m.power_exponent().map(|a| a - 1.0),
            Family::OrderOf(b) => b.power_exponent().map(|a| 2.0 * a),
            Family::PowerLog { alpha, beta, .. } if *beta == 0.0 => Some(*alpha),
            _ => None,
        }
    }

    /// Scaling indices at the default depth, computed once.
    pub fn indices(&self) -> IndexInterval {
        *self
            .indices
            .get_or_init(|| estimate_indices(self, DEFAULT_INDEX_DEPTH).unwrap_or(IndexInterval {
                m: f64::NAN,
                big_m: f64::NAN,
                depth: DEFAULT_INDEX_DEPTH,
            }))
    }

    /// Bernstein function behind an `OrderOf` modulus.
    pub fn bernstein(&self) -> Option<Bernstein> {
        match &self.family {
            Family::OrderOf(b) => Some(*b),
            _ => None,
        }
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite")))
    }
}

fn build_table(r: &[f64], values: &[f64]) -> Result<Table> {
    if r.len() < 2 || r.len() != values.len() {
        return Err(Error::Config("tabulated modulus needs ≥ 2 matching samples".into()));
    }
    if r.windows(2).any(|w| !(w[1] > w[0])) || r[0] <= 0.0 {
        return Err(Error::Config("tabulated r must be positive and increasing".into()));
    }
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Config("tabulated values must be positive".into()));
    }
    if r[0] > 1.0 || *r.last().unwrap() < 1.0 {
        return Err(Error::Config("tabulated samples must bracket r = 1".into()));
    }
    let mut t = Table {
        log_r: r.iter().map(|v| v.ln()).collect(),
        log_v: values.iter().map(|v| v.ln()).collect(),
    };
    let at_one = t.interp(1.0).expect("bracketed").ln();
    for v in &mut t.log_v {
        *v -= at_one;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        assert!((Modulus::power(0.5).eval(0.25).unwrap() - 0.5).abs() < 1e-15);
        let p = Modulus::power(0.3).product(&Modulus::power(0.4));
        assert!((p.eval(0.5).unwrap() - 0.5f64.powf(0.7)).abs() < 1e-15);
        assert!((p.eval(0.5).unwrap() - 0.61557).abs() < 1e-5);
    }

    #[test]
    fn normalization_at_one() {
        let ms = [
            Modulus::power(0.7),
            Modulus::power_log(0.5, 1.0, 1).unwrap(),
            Modulus::power_log(0.5, 2.0, -1).unwrap(),
            Modulus::power_log1p(0.4, 0.8).unwrap(),
            Modulus::order_of(Bernstein::StableLog { alpha: 0.3, beta: 0.4 }).unwrap(),
            Modulus::tabulated(vec![0.1, 0.5, 2.0], vec![3.0, 7.0, 20.0]).unwrap(),
            Modulus::power(1.5).ratio_by_r(),
        ];
        for m in &ms {
            assert!((m.eval(1.0).unwrap() - 1.0).abs() < 1e-14, "{:?}", m.spec());
        }
    }

    #[test]
    fn domain_errors() {
        assert!(Modulus::power(0.5).eval(0.0).is_err());
        assert!(Modulus::power(0.5).eval(-1.0).is_err());
        assert!(Modulus::power_log(0.5, 1.0, 1).unwrap().eval(1.5).is_err());
        let t = Modulus::tabulated(vec![0.1, 1.0], vec![0.1, 1.0]).unwrap();
        assert!(t.eval(0.05).is_err());
    }

    #[test]
    fn tabulated_reproduces_power_between_samples() {
        let r: Vec<f64> = (0..=20).map(|k| 2f64.powi(-k)).rev().collect();
        let v: Vec<f64> = r.iter().map(|x| x.powf(0.6)).collect();
        let t = Modulus::tabulated(r, v).unwrap();
        for x in [0.3, 0.01, 1e-5] {
            assert!((t.eval(x).unwrap() - x.powf(0.6)).abs() < 1e-12);
        }
    }

    #[test]
    fn vanishes_at_zero() {
        let m = Modulus::power_log(0.5, 1.0, 1).unwrap();
        assert!(m.eval(2f64.powi(-20)).unwrap() < m.eval(2f64.powi(-10)).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let m: Modulus = serde_json::from_str(r#"{"family":"power","alpha":0.5}"#).unwrap();
        assert_eq!(m.power_exponent(), Some(0.5));
        let m: Modulus = serde_json::from_str(
            r#"{"family":"product","factors":[{"family":"power","alpha":0.5},{"family":"order_of","bernstein":{"family":"stable","alpha":0.5}}]}"#,
        )
        .unwrap();
        assert_eq!(m.power_exponent(), Some(1.5));
        let s = serde_json::to_string(&m).unwrap();
        let back: Modulus = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn varphi_identity() {
        let b = Bernstein::StableLog { alpha: 0.3, beta: 0.4 };
        let m = Modulus::order_of(b).unwrap();
        for k in 0..100 {
            let r = 10f64.powf(-4.0 + 8.0 * k as f64 / 99.0);
            let prod = m.eval(r).unwrap() * b.phi(r.powi(-2));
            assert!((prod - 1.0).abs() < 1e-12);
        }
    }
}
