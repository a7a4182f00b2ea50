//! Sampling of stable subordinators and subordinate Brownian motion, and a
//! Kolmogorov–Smirnov bridge to the grid densities.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::heatkernel::HeatKernelGrid;

const CHUNK: usize = 4096;

/// Draws `n` values in chunks, each chunk from its own ChaCha20 stream.
fn chunked<T: Send, F>(n: usize, seed: u64, draw: F) -> Vec<T>
where
    F: Fn(&mut ChaCha20Rng) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).map(|_| draw(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("stability index must lie in (0,1), got {alpha}")));
    }
    Ok(())
}

/// One positive α-stable variate with Laplace transform e^{−λ^α} (Kanter's representation).
fn positive_stable(alpha: f64, rng: &mut ChaCha20Rng) -> f64 {
    loop {
        let u: f64 = PI * rng.gen::<f64>();
        let e: f64 = rng.sample(Exp1);
        if u == 0.0 || e == 0.0 {
            continue;
        }
        let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
        let b = (((1.0 - alpha) * u).sin() / e).powf((1.0 - alpha) / alpha);
        let s = a * b;
        if s > 0.0 && s.is_finite() {
            return s;
        }
    }
}

/// n i.i.d. samples of S_t with 𝔼e^{−λS_t} = e^{−tλ^α}.
pub fn sample_stable_subordinator(alpha: f64, t: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    let scale = t.powf(1.0 / alpha);
    Ok(chunked(n, seed, |rng| scale * positive_stable(alpha, rng)))
}

#[derive(Debug, Clone, Serialize)]
pub struct PathSample {
    pub t: f64,
    pub alpha: f64,
    pub dim: usize,
    pub seed: u64,
    pub subordinator_values: Vec<f64>,
    /// X_t samples, `dim` consecutive entries each.
    pub increments: Vec<f64>,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.subordinator_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subordinator_values.is_empty()
    }

    /// First coordinate of each sample.
    pub fn first_axis(&self) -> Vec<f64> {
        self.increments.iter().step_by(self.dim).cloned().collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let coords: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "# seed={} alpha={} t={}", self.seed, self.alpha, self.t)?;
        writeln!(w, "s,{}", coords.join(","))?;
        for (i, s) in self.subordinator_values.iter().enumerate() {
            let xs: Vec<String> = self.increments[i * self.dim..(i + 1) * self.dim]
                .iter()
                .map(|v| format!("{v:e}"))
                .collect();
            writeln!(w, "{s:e},{}", xs.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// X_t = W_{S_t} = √(2S_t)·Z with Z standard normal in `dim` dimensions.
pub fn sample_sbm(alpha: f64, t: f64, n: usize, dim: usize, seed: u64) -> Result<PathSample> {
    check_alpha(alpha)?;
    if dim != 1 && dim != 2 {
        return Err(Error::Unsupported(format!("dimension {dim}")));
    }
    let scale = t.powf(1.0 / alpha);
    let pairs = chunked(n, seed, |rng| {
        let s = scale * positive_stable(alpha, rng);
        let r = (2.0 * s).sqrt();
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = if dim == 2 { rng.sample(StandardNormal) } else { 0.0 };
        (s, [r * z1, r * z2])
    });
    let mut subordinator_values = Vec::with_capacity(n);
    let mut increments = Vec::with_capacity(n * dim);
    for (s, x) in pairs {
        subordinator_values.push(s);
        increments.extend_from_slice(&x[..dim]);
    }
    Ok(PathSample { t, alpha, dim, seed, subordinator_values, increments })
}

#[derive(Debug, Clone, Serialize)]
pub struct KsReport {
    pub statistic: f64,
    pub samples: usize,
    pub clipped_fraction: f64,
    /// Model mass outside the box.
    pub outside_mass: f64,
}

/// Piecewise-linear CDF of a one-dimensional grid density on [−L/2, L/2),
/// with the mass outside the box split evenly between the two tails.
struct GridCdf {
    left: f64,
    dx: f64,
    cum: Vec<f64>,
}

impl GridCdf {
    fn new(q: &HeatKernelGrid) -> Result<Self> {
        let spec = q.spec();
        if spec.dim != 1 {
            return Err(Error::Unsupported("KS comparison needs a one-dimensional density".into()));
        }
        let vals = q.values();
        let n = spec.n;
        let h = n / 2;
        // reorder to ascending x from −L/2
        let ordered: Vec<f64> = (0..n).map(|i| vals.values[(i + h) % n]).collect();
        let dx = spec.dx();
        let inside: f64 = dx * (ordered.iter().sum::<f64>() - 0.5 * (ordered[0] + ordered[n - 1]));
        let outside = (1.0 - inside).max(0.0);
        let mut cum = Vec::with_capacity(n);
        let mut acc = 0.5 * outside;
        cum.push(acc);
        for w in ordered.windows(2) {
            acc += 0.5 * dx * (w[0] + w[1]);
            cum.push(acc);
        }
        Ok(Self { left: -(h as f64) * dx, dx, cum })
    }

    fn outside(&self) -> f64 {
        2.0 * self.cum[0]
    }

    fn right(&self) -> f64 {
        self.left + (self.cum.len() - 1) as f64 * self.dx
    }

    fn eval(&self, x: f64) -> f64 {
        let s = (x - self.left) / self.dx;
        if s <= 0.0 {
            return self.cum[0];
        }
        let i = s.floor() as usize;
        if i + 1 >= self.cum.len() {
            return *self.cum.last().unwrap();
        }
        let f = s - i as f64;
        self.cum[i] * (1.0 - f) + self.cum[i + 1] * f
    }
}

/// KS distance between the empirical law of `samples` and the grid density,
/// taken over the box.
pub fn ks_compare(samples: &[f64], density: &HeatKernelGrid) -> Result<KsReport> {
    let cdf = GridCdf::new(density)?;
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let (lo, hi) = (cdf.left, cdf.right());
    let clipped = xs.iter().filter(|&&x| x < lo || x > hi).count() as f64 / n;
    if clipped > 0.01 {
        return Err(Error::Coverage(format!(
            "{:.2}% of samples fall outside the box [{lo}, {hi}]",
            100.0 * clipped
        )));
    }
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        if x < lo || x > hi {
            continue;
        }
        let f = cdf.eval(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    Ok(KsReport { statistic: d, samples: xs.len(), clipped_fraction: clipped, outside_mass: cdf.outside() })
}

/// Two-sample KS distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / nx - j as f64 / ny).abs());
    }
    d
}

/// Inverse-CDF samples from a one-dimensional grid density (within the box).
pub fn sample_from_grid(density: &HeatKernelGrid, n: usize, seed: u64) -> Result<Vec<f64>> {
    let cdf = GridCdf::new(density)?;
    let (lo, hi) = (cdf.cum[0], *cdf.cum.last().unwrap());
    Ok(chunked(n, seed, |rng| {
        let u = lo + (hi - lo) * rng.gen::<f64>();
        let i = cdf.cum.partition_point(|&c| c < u).clamp(1, cdf.cum.len() - 1);
        let (c0, c1) = (cdf.cum[i - 1], cdf.cum[i]);
        let f = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        cdf.left + (i as f64 - 1.0 + f) * cdf.dx
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::GridSpec;
    use crate::heatkernel::density;
    use crate::modulus::Bernstein;
    use statrs::function::erf::erfc;

    #[test]
    fn half_stable_cdf_and_laplace() {
        let s = sample_stable_subordinator(0.5, 1.0, 100_000, 11).unwrap();
        assert!(s.iter().all(|&v| v > 0.0));
        let below = s.iter().filter(|&&v| v <= 1.0).count() as f64 / s.len() as f64;
        assert!((below - erfc(0.5)).abs() < 0.01, "{below}");
        for lambda in [0.5, 1.0, 2.0] {
            let vals: Vec<f64> = s.iter().map(|v| (-lambda * v).exp()).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
            let se = (var / vals.len() as f64).sqrt();
            let want = (-f64::powf(lambda, 0.5)).exp();
            assert!((mean - want).abs() < 4.0 * se, "λ={lambda}");
        }
        assert_eq!(s, sample_stable_subordinator(0.5, 1.0, 100_000, 11).unwrap());
        assert!(sample_stable_subordinator(1.0, 1.0, 10, 1).is_err());
    }

    #[test]
    fn cauchy_samples() {
        let p = sample_sbm(0.5, 1.0, 100_000, 1, 5).unwrap();
        let x = p.first_axis();
        let inside = x.iter().filter(|v| v.abs() <= 1.0).count() as f64 / x.len() as f64;
        assert!((inside - 0.5).abs() < 0.01);
        let sign: f64 = x.iter().map(|v| v.signum()).sum::<f64>() / x.len() as f64;
        assert!(sign.abs() < 3.0 / (x.len() as f64).sqrt());
        let p4 = sample_sbm(0.5, 4.0, 100_000, 1, 6).unwrap();
        let scaled: Vec<f64> = p4.first_axis().iter().map(|v| v / 4.0).collect();
        assert!(ks_two_sample(&scaled, &x) <= 0.02);
    }

    #[test]
    fn ks_against_cauchy_density_and_self() {
        let b = Bernstein::Stable { alpha: 0.5 };
        let q = density(&b, 1.0, GridSpec::new(1, 1 << 17, 8192.0).unwrap()).unwrap().with_free_space(8).unwrap();
        let x = sample_sbm(0.5, 1.0, 100_000, 1, 9).unwrap().first_axis();
        let r = ks_compare(&x, &q).unwrap();
        assert!(r.statistic <= 0.02, "{}", r.statistic);
        assert!(r.clipped_fraction < 0.01);
        let own = sample_from_grid(&q, 100_000, 3).unwrap();
        let r = ks_compare(&own, &q).unwrap();
        assert!(r.statistic < 1.63 / (1e5f64).sqrt() + 1e-3, "{}", r.statistic);
    }

    #[test]
    fn coverage_error() {
        let b = Bernstein::Stable { alpha: 0.5 };
        let q = density(&b, 1.0, GridSpec::new(1, 1024, 16.0).unwrap()).unwrap();
        let x = sample_sbm(0.5, 1.0, 10_000, 1, 9).unwrap().first_axis();
        assert!(matches!(ks_compare(&x, &q), Err(Error::Coverage(_))));
    }
}
