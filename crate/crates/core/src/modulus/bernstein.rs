//! Bernstein functions used as Laplace exponents of subordinators.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_log, Tolerance};

/// Laplace exponent of a driftless subordinator, normalized so that φ(1) = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Bernstein {
    /// φ(λ) = λ^α, 0 < α < 1.
    Stable { alpha: f64 },
    /// φ(λ) = λ^α ln(1 + λ^β) / ln 2, with α + β < 1 so that φ stays complete Bernstein.
    StableLog { alpha: f64, beta: f64 },
}

impl Bernstein {
    pub fn stable(alpha: f64) -> Result<Self> {
        let b = Bernstein::Stable { alpha };
        b.validate()?;
        Ok(b)
    }

    pub fn stable_log(alpha: f64, beta: f64) -> Result<Self> {
        let b = Bernstein::StableLog { alpha, beta };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Bernstein::Stable { alpha } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::Domain(format!(
                        "stable exponent must lie in (0,1), got {alpha}"
                    )));
                }
            }
            Bernstein::StableLog { alpha, beta } => {
                if !(alpha >= 0.0 && beta > 0.0 && alpha + beta < 1.0) {
                    return Err(Error::Domain(format!(
                        "stable-log needs alpha >= 0, beta > 0, alpha + beta < 1; got ({alpha}, {beta})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// φ(λ) for λ ≥ 0.
    pub fn phi(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return 0.0;
        }
        match *self {
            Bernstein::Stable { alpha } => lambda.powf(alpha),
            Bernstein::StableLog { alpha, beta } => {
                lambda.powf(alpha) * lambda.powf(beta).ln_1p() / LN_2
            }
        }
    }

    /// Order function varphi(r) = 1/φ(r⁻²).
    pub fn varphi(&self, r: f64) -> f64 {
        1.0 / self.phi(1.0 / (r * r))
    }

    /// Exponent α when φ is an exact power.
    pub fn power_exponent(&self) -> Option<f64> {
        match *self {
            Bernstein::Stable { alpha } => Some(alpha),
            Bernstein::StableLog { .. } => None,
        }
    }

    /// Imaginary part of the analytic continuation φ(−s + i0), s > 0.
    fn im_phi_cut(&self, s: f64) -> f64 {
        match *self {
            Bernstein::Stable { alpha } => s.powf(alpha) * (PI * alpha).sin(),
            Bernstein::StableLog { alpha, beta } => {
                let za = Complex64::from_polar(s.powf(alpha), PI * alpha);
                let zb = Complex64::from_polar(s.powf(beta), PI * beta);
                (za * (Complex64::new(1.0, 0.0) + zb).ln()).im / LN_2
            }
        }
    }

    /// Density of the Lévy measure μ(dt) of the subordinator.
    ///
    /// Closed form for the stable family; for stable-log it is recovered from
    /// the boundary values of φ on the negative axis,
    /// μ(t) = (1/π) ∫₀^∞ e^{−ts} Im φ(−s + i0) ds.
    pub fn levy_density(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::INFINITY;
        }
        match *self {
            Bernstein::Stable { alpha } => alpha / gamma(1.0 - alpha) * t.powf(-1.0 - alpha),
            Bernstein::StableLog { .. } => {
                let tol = Tolerance::rel(1e-11);
                let r = adaptive_log(
                    |u| (-u).exp() * self.im_phi_cut(u / t),
                    1e-16,
                    80.0,
                    tol,
                );
                r.value / (PI * t)
            }
        }
    }

    /// φ⁻¹(y) by log-scale bisection.
    pub fn phi_inverse(&self, y: f64) -> Result<f64> {
        if let Some(alpha) = self.power_exponent() {
            if y > 0.0 && y.is_finite() {
                return Ok(y.powf(1.0 / alpha));
            }
        }
        super::invert(|l| self.phi(l), y)
    }

    /// Inverse of the order function: varphi⁻¹(t) = φ⁻¹(1/t)^{-1/2}.
    pub fn varphi_inverse(&self, t: f64) -> Result<f64> {
        Ok(self.phi_inverse(1.0 / t)?.powf(-0.5))
    }
}
