use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{GridFunction, GridSpec};
use crate::error::Result;
use crate::modulus::Modulus;

/// Random trigonometric series Σ a_k cos(k·(x − x_c) + ϑ_k) with
/// |a_k| = ψ(1/|k|)·|k|^{−dim}·U[1/2, 1].
///
/// The phases are aligned at a random center x_c up to a jitter of ±π/4, so
/// the sample attains its modulus at x_c instead of averaging it out.
/// Coefficients are drawn in order of increasing frequency shell, so the
/// sample at resolution 2n extends the one at resolution n.
pub fn random_holder_sample(psi: &Modulus, seed: u64, n: usize, dim: usize) -> Result<GridFunction> {
    let grid = GridSpec::new(dim, n, 2.0 * PI)?;
    random_holder_sample_on(psi, seed, grid)
}

pub fn random_holder_sample_on(psi: &Modulus, seed: u64, grid: GridSpec) -> Result<GridFunction> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let l = grid.period;
    let center = [rng.gen::<f64>() * l, rng.gen::<f64>() * l];
    let n = grid.n;
    let total = grid.len() as f64;
    let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
    let scale = 2.0 * PI / l;
    let kmax = n as i64 / 2 - 1;
    let mut add = |k: [i64; 2], rng: &mut ChaCha20Rng| {
        let amp_u: f64 = rng.gen_range(0.5..=1.0);
        let jitter: f64 = rng.gen_range(-0.25 * PI..=0.25 * PI);
        let xi = [scale * k[0] as f64, scale * k[1] as f64];
        let norm = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        let a = psi.value((1.0 / norm).min(1.0)) * norm.powi(-(grid.dim as i32)) * amp_u;
        let theta = jitter - (xi[0] * center[0] + xi[1] * center[1]);
        let c = Complex64::from_polar(0.5 * total * a, theta);
        let idx = |k: [i64; 2]| {
            let i = k[0].rem_euclid(n as i64) as usize;
            let j = k[1].rem_euclid(n as i64) as usize;
            grid.flatten([i, j])
        };
        spec[idx(k)] += c;
        spec[idx([-k[0], -k[1]])] += c.conj();
    };
    if grid.dim == 1 {
        for k in 1..=kmax {
            add([k, 0], &mut rng);
        }
    } else {
        for s in 1..=kmax {
            for k1 in 0..=s {
                for k2 in -s..=s {
                    if k1.abs().max(k2.abs()) == s && (k1 > 0 || k2 > 0) {
                        add([k1, k2], &mut rng);
                    }
                }
            }
        }
    }
    Ok(GridFunction::from_spectrum(grid, spec))
}
