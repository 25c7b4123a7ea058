//! Walk-on-spheres estimate of the harmonic measure of the slit [0, K] in the
//! sector |arg z| < π/4 with the slit removed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sweep::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub walks: u64,
}

/// Walk parameters relative to K.
#[derive(Clone, Copy, Debug)]
pub struct WalkParams {
    /// Absorption shell width / K.
    pub shell: f64,
    /// Walks beyond this radius / K count as reaching the rays.
    pub far: f64,
    pub max_steps: usize,
}

impl Default for WalkParams {
    fn default() -> Self {
        WalkParams { shell: 1e-4, far: 1e3, max_steps: 100_000 }
    }
}

fn dist_slit(z: C64, k_band: f64) -> f64 {
    let x = z.re.clamp(0.0, k_band);
    C64::new(z.re - x, z.im).norm()
}

fn dist_rays(z: C64) -> f64 {
    // both rays leave the origin at ±45°, z lies inside the sector
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let up = (z.re * s - z.im * s).abs();
    let down = (z.re * s + z.im * s).abs();
    up.min(down)
}

fn in_domain(z: C64, k_band: f64) -> bool {
    z.re > 0.0 && z.im.abs() < z.re && dist_slit(z, k_band) > 0.0
}

/// One walk: true if it is absorbed on the slit.
fn walk(mut z: C64, k_band: f64, p: &WalkParams, rng: &mut ChaCha8Rng) -> bool {
    let shell = p.shell * k_band;
    let far = p.far * k_band;
    for _ in 0..p.max_steps {
        let ds = dist_slit(z, k_band);
        let dr = dist_rays(z);
        if ds <= shell || dr <= shell {
            return ds <= dr;
        }
        if z.norm() > far {
            return false;
        }
        let r = ds.min(dr);
        let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        z += C64::from_polar(r, a);
    }
    false
}

/// Monte Carlo μ(k) at a point of the slit sector; walk `w` uses ChaCha stream `w` of `seed`.
pub fn harmonic_measure_mc(k: C64, k_band: f64, n_walks: u64, seed: u64) -> Result<McEstimate> {
    harmonic_measure_mc_with(k, k_band, n_walks, seed, WalkParams::default())
}

pub fn harmonic_measure_mc_with(k: C64, k_band: f64, n_walks: u64, seed: u64, p: WalkParams) -> Result<McEstimate> {
    if !(k_band > 0.0) {
        return invalid("K must be positive");
    }
    if !in_domain(k, k_band) {
        return invalid(format!("{k} is not inside the slit sector"));
    }
    if n_walks == 0 {
        return invalid("need at least one walk");
    }
    const CHUNK: u64 = 4096;
    let chunks = n_walks.div_ceil(CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut n = 0u64;
            for w in c * CHUNK..((c + 1) * CHUNK).min(n_walks) {
                rng.set_stream(w);
                rng.set_word_pos(0);
                n += walk(k, k_band, &p, &mut rng) as u64;
            }
            n
        })
        .sum();
    let v = hits as f64 / n_walks as f64;
    let se = (v * (1.0 - v) / n_walks as f64).sqrt();
    Ok(McEstimate { value: v, stderr: se, walks: n_walks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances() {
        assert!((dist_slit(C64::new(0.5, 0.3), 1.0) - 0.3).abs() < 1e-15);
        assert!((dist_slit(C64::new(2.0, 0.0), 1.0) - 1.0).abs() < 1e-15);
        let z = C64::new(1.0, 0.0);
        assert!((dist_rays(z) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn rejects_outside_points() {
        assert!(harmonic_measure_mc(C64::new(0.5, 0.0), 1.0, 10, 1).is_err());
        assert!(harmonic_measure_mc(C64::new(1.0, 2.0), 1.0, 10, 1).is_err());
    }

    #[test]
    fn deterministic_and_bounded() {
        let a = harmonic_measure_mc(C64::new(1.5, 0.1), 1.0, 2000, 9).unwrap();
        let b = harmonic_measure_mc(C64::new(1.5, 0.1), 1.0, 2000, 9).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a.value));
    }
}
