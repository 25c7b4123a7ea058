//! Frequency ↔ time on the boundary.
//!
//! Pairing: û(ω) = −∫U(t)e^{iωt}dt and U(t) = −(1/2π)∫u(ω)e^{−iωt}dω, discretized on
//! t_n = nΔt with N_t·Δt·Δω = 2π. The stored window is one full period.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::domain::BoundaryMesh;
use crate::error::{invalid, Error, Result};
use crate::sweep::{FrequencyGrid, FrequencySweep, C64};

/// Real boundary history, `values[(node·n_t + n)·arity + c]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub mesh: BoundaryMesh,
    pub arity: usize,
    pub dt: f64,
    pub n_t: usize,
    pub values: Vec<f64>,
}

impl TimeTrace {
    pub fn zeros(mesh: &BoundaryMesh, arity: usize, dt: f64, n_t: usize) -> Self {
        TimeTrace { mesh: mesh.clone(), arity, dt, n_t, values: vec![0.0; mesh.len() * n_t * arity] }
    }

    pub fn nodes(&self) -> usize {
        self.mesh.len()
    }

    #[inline]
    pub fn offset(&self, node: usize, n: usize) -> usize {
        (node * self.n_t + n) * self.arity
    }

    #[inline]
    pub fn value(&self, node: usize, n: usize, c: usize) -> f64 {
        self.values[self.offset(node, n) + c]
    }

    pub fn t_end(&self) -> f64 {
        self.n_t as f64 * self.dt
    }

    /// Σᵢ wᵢ Δt Σₙ |U(xᵢ, tₙ)|² over samples with t in [t0, t1).
    pub fn mass(&self, t0: f64, t1: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..self.nodes() {
            let mut acc = 0.0;
            for n in 0..self.n_t {
                let t = n as f64 * self.dt;
                if t >= t0 && t < t1 {
                    let o = self.offset(i, n);
                    acc += self.values[o..o + self.arity].iter().map(|v| v * v).sum::<f64>();
                }
            }
            s += self.mesh.weights[i] * acc * self.dt;
        }
        s
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Band-limiting applied before synthesis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Cutoff {
    Hard,
    /// cos² roll-off over the top fraction of [0, k_cut].
    Cosine { fraction: f64 },
}

/// Smallest power of two with at least four samples per stored frequency.
pub fn default_samples(grid: &FrequencyGrid) -> usize {
    (4 * grid.count + 2).next_power_of_two()
}

fn band_weight(om: f64, k_cut: f64, cut: Cutoff) -> f64 {
    if om > k_cut * (1.0 + 1e-12) {
        return 0.0;
    }
    match cut {
        Cutoff::Hard => 1.0,
        Cutoff::Cosine { fraction } => {
            let start = k_cut * (1.0 - fraction);
            if om <= start {
                1.0
            } else {
                let x = (om - start) / (k_cut - start);
                (0.5 * PI * x).cos().powi(2)
            }
        }
    }
}

/// Synthesized trace together with the largest imaginary residue relative to the peak.
pub struct Synthesis {
    pub trace: TimeTrace,
    pub leakage: f64,
}

pub fn synthesize_time_trace(sweep: &FrequencySweep, k_cut: f64) -> Result<TimeTrace> {
    Ok(synthesize_with(sweep, k_cut, Cutoff::Hard, default_samples(&sweep.grid))?.trace)
}

/// Inverse transform of the conjugate-symmetric extension, band-limited at `k_cut`.
pub fn synthesize_with(sweep: &FrequencySweep, k_cut: f64, cut: Cutoff, n_t: usize) -> Result<Synthesis> {
    let g = &sweep.grid;
    if !(k_cut > 0.0) || k_cut > g.omega_max() * (1.0 + 1e-12) {
        return invalid(format!("k_cut = {k_cut} outside (0, {}]", g.omega_max()));
    }
    let jmax = g.index_for(k_cut);
    if n_t < 2 * jmax + 2 {
        return invalid(format!("{n_t} samples cannot carry {jmax} frequencies"));
    }
    let dt = 2.0 * PI / (n_t as f64 * g.d_omega);
    let a = sweep.arity;
    let scale = -g.d_omega / (2.0 * PI);
    let weights: Vec<f64> = (0..=jmax).map(|j| band_weight(g.omega(j), k_cut, cut)).collect();
    let per: Vec<(Vec<f64>, f64, f64)> = (0..sweep.nodes())
        .into_par_iter()
        .map(|i| {
            let fft = FftPlanner::new().plan_fft_forward(n_t);
            let mut out = vec![0.0; n_t * a];
            let (mut im_max, mut re_max) = (0.0f64, 0.0f64);
            for c in 0..a {
                let mut buf = vec![C64::new(0.0, 0.0); n_t];
                buf[0] = sweep.static_entry(i, c) * weights[0];
                for j in 1..=jmax {
                    let v = sweep.value(i, j, c) * weights[j];
                    buf[j] = v;
                    buf[n_t - j] = v.conj();
                }
                fft.process(&mut buf);
                for n in 0..n_t {
                    let v = buf[n] * scale;
                    out[n * a + c] = v.re;
                    im_max = im_max.max(v.im.abs());
                    re_max = re_max.max(v.re.abs());
                }
            }
            (out, im_max, re_max)
        })
        .collect();
    let mut trace = TimeTrace::zeros(&sweep.mesh, a, dt, n_t);
    let (mut im, mut re) = (0.0f64, 0.0f64);
    for (i, (v, a_im, a_re)) in per.into_iter().enumerate() {
        let o = trace.offset(i, 0);
        trace.values[o..o + v.len()].copy_from_slice(&v);
        im = im.max(a_im);
        re = re.max(a_re);
    }
    Ok(Synthesis { trace, leakage: if re > 0.0 { im / re } else { 0.0 } })
}

/// u(xᵢ, ωⱼ) = −Δt Σₙ U(xᵢ, tₙ)e^{iωⱼtₙ} for j = 0..=count.
pub fn forward_transform(trace: &TimeTrace, grid: &FrequencyGrid) -> FrequencySweep {
    let a = trace.arity;
    let cols = grid.count + 1;
    let per: Vec<Vec<C64>> = (0..trace.nodes())
        .into_par_iter()
        .map(|i| {
            let mut u = vec![C64::new(0.0, 0.0); cols * a];
            for n in 0..trace.n_t {
                let t = n as f64 * trace.dt;
                let o = trace.offset(i, n);
                let vals = &trace.values[o..o + a];
                if vals.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let step = C64::from_polar(1.0, grid.d_omega * t);
                let mut ph = C64::new(1.0, 0.0);
                for j in 0..cols {
                    if j > 0 {
                        ph = if j % 32 == 0 { C64::from_polar(1.0, grid.omega(j) * t) } else { ph * step };
                    }
                    for c in 0..a {
                        u[j * a + c] += ph * vals[c];
                    }
                }
            }
            u.iter_mut().for_each(|v| *v *= -trace.dt);
            u
        })
        .collect();
    let mut out = FrequencySweep::zeros(&trace.mesh, grid, a, false);
    for (i, u) in per.into_iter().enumerate() {
        let o = out.offset(i, 0);
        out.values[o..o + u.len()].copy_from_slice(&u);
    }
    out
}

/// Time-side energy over frequency-side energy restricted to ω ≤ k_cut.
pub fn parseval_check(sweep: &FrequencySweep, trace: &TimeTrace, k_cut: f64) -> Result<f64> {
    if sweep.nodes() != trace.nodes() || sweep.arity != trace.arity {
        return Err(Error::Mismatch("sweep and trace differ in layout".into()));
    }
    let g = &sweep.grid;
    if ((trace.n_t as f64 * trace.dt * g.d_omega) / (2.0 * PI) - 1.0).abs() > 1e-9 {
        return Err(Error::Mismatch("N_t·Δt·Δω ≠ 2π".into()));
    }
    let jmax = g.index_for(k_cut);
    let mut freq = 0.0;
    for i in 0..sweep.nodes() {
        let mut s: f64 = (0..sweep.arity).map(|c| sweep.static_entry(i, c).norm_sqr()).sum();
        for j in 1..=jmax {
            s += 2.0 * sweep.entry(i, j).iter().map(|v| v.norm_sqr()).sum::<f64>();
        }
        freq += sweep.mesh.weights[i] * s;
    }
    freq *= g.d_omega / (2.0 * PI);
    let time = trace.mass(f64::NEG_INFINITY, f64::INFINITY);
    if freq == 0.0 {
        return Err(Error::Degenerate("Parseval ratio undefined for zero data".into()));
    }
    Ok(time / freq)
}

/// Fraction of the trace's L² mass on (t_after, end of window).
pub fn huygens_residual(trace: &TimeTrace, t_after: f64) -> Result<f64> {
    if !(t_after < trace.t_end()) {
        return invalid(format!("t_after = {t_after} beyond the window"));
    }
    let total = trace.mass(f64::NEG_INFINITY, f64::INFINITY);
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok(trace.mass(t_after + 1e-12 * trace.dt, f64::INFINITY) / total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_sweep() -> FrequencySweep {
        let mesh = BoundaryMesh::sphere([0.0; 3], 1.0, 12);
        let g = FrequencyGrid::new(0.25, 40).unwrap();
        let mut s = FrequencySweep::zeros(&mesh, &g, 2, false);
        for i in 0..mesh.len() {
            for j in 0..=g.count {
                for c in 0..2 {
                    let w = g.omega(j);
                    let v = C64::from_polar((-0.1 * w * w).exp() * (1.0 + i as f64 * 0.1), 1.3 * w + c as f64);
                    let o = s.offset(i, j) + c;
                    s.values[o] = if j == 0 { C64::new(v.re, 0.0) } else { v };
                }
            }
        }
        s
    }

    #[test]
    fn round_trip_and_parseval() {
        let s = synthetic_sweep();
        let syn = synthesize_with(&s, s.grid.omega_max(), Cutoff::Hard, 128).unwrap();
        assert!(syn.leakage < 1e-12);
        let back = forward_transform(&syn.trace, &s.grid);
        for (a, b) in back.values.iter().zip(&s.values) {
            assert!((a - b).norm() < 1e-9 * b.norm().max(1e-3));
        }
        let r = parseval_check(&s, &syn.trace, s.grid.omega_max()).unwrap();
        assert!((r - 1.0).abs() < 1e-6);
    }

    #[test]
    fn truncated_band_bookkeeping() {
        let s = synthetic_sweep();
        let t = synthesize_with(&s, 3.1, Cutoff::Hard, 128).unwrap().trace;
        let r = parseval_check(&s, &t, 3.1).unwrap();
        assert!((r - 1.0).abs() < 1e-6);
        let full = parseval_check(&s, &t, s.grid.omega_max()).unwrap();
        assert!(full < 1.0);
    }

    #[test]
    fn zero_data() {
        let s = FrequencySweep::zeros(&BoundaryMesh::sphere([0.0; 3], 1.0, 8), &FrequencyGrid::new(0.5, 8).unwrap(), 1, false);
        let t = synthesize_time_trace(&s, 4.0).unwrap();
        assert!(t.values.iter().all(|v| *v == 0.0));
        assert!(matches!(parseval_check(&s, &t, 4.0), Err(Error::Degenerate(_))));
        assert_eq!(huygens_residual(&t, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn taper_weights() {
        let c = Cutoff::Cosine { fraction: 0.25 };
        assert_eq!(band_weight(1.0, 4.0, c), 1.0);
        assert!(band_weight(3.999, 4.0, c) < 1e-5);
        assert_eq!(band_weight(4.1, 4.0, Cutoff::Hard), 0.0);
    }
}
