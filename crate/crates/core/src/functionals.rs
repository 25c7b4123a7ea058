//! Data functionals I₀, I₁, I₂, the data norms ε, and the bounds that relate
//! them to the source and to unseen frequencies.
//!
//! With u(ω) analytically continued,
//! I₀(k) = 2∫₀ᵏ ∫_∂Ω u(ω)·u(−ω), I₁ adds the weight ω², and I₂ pairs tangential gradients.
//! The path is the straight segment ω = ks, s ∈ (0, 1).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{BoundaryMesh, Domain};
use crate::elastic::{boundary_values_elastic, ElasticParams};
use crate::error::{invalid, Error, Result};
use crate::helmholtz::boundary_values;
use crate::quadrature::{gauss_legendre_unit, regression_slope, uniform_integral};
use crate::sobolev::SourceNorms;
use crate::source::SourcePair;
use crate::sweep::{FrequencySweep, C64};

/// The analytic bounds below are stated for the kernel e^{ikr}/r; our u carries 1/(4π).
pub const SCALAR_KERNEL_SCALE: f64 = 16.0 * PI * PI;

/// Default Gauss–Legendre node count along the segment.
pub const SEGMENT_NODES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Physics {
    Scalar,
    Elastic(ElasticParams),
}

impl Physics {
    pub fn arity(&self) -> usize {
        match self {
            Physics::Scalar => 1,
            Physics::Elastic(_) => 3,
        }
    }

    /// Slowest wave speed.
    pub fn c_min(&self) -> f64 {
        match self {
            Physics::Scalar => 1.0,
            Physics::Elastic(p) => p.cs(),
        }
    }

    pub fn c_max(&self) -> f64 {
        match self {
            Physics::Scalar => 1.0,
            Physics::Elastic(p) => p.cp(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Physics::Scalar => Ok(()),
            Physics::Elastic(p) => p.validate(),
        }
    }

    /// Boundary values (arity per node) and tangential gradients (2·arity per node) at complex k.
    pub fn boundary_values(&self, src: &SourcePair, mesh: &BoundaryMesh, k: C64, gradients: bool) -> Result<(Vec<C64>, Vec<C64>)> {
        if src.arity != self.arity() {
            return Err(Error::Mismatch("source arity does not match the physics".into()));
        }
        match self {
            Physics::Scalar => Ok(boundary_values(src, mesh, k, gradients)),
            Physics::Elastic(p) => boundary_values_elastic(src, mesh, k, p, gradients),
        }
    }
}

/// Which functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Functional {
    I0,
    I1,
    I2,
}

impl Functional {
    pub const ALL: [Functional; 3] = [Functional::I0, Functional::I1, Functional::I2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(j: usize) -> Result<Self> {
        Functional::ALL.get(j).copied().ok_or_else(|| Error::InvalidParameter(format!("no functional I{j}")))
    }

    pub fn name(self) -> &'static str {
        ["I0", "I1", "I2"][self.index()]
    }
}

/// A point of the sector |arg k| < π/4.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorPoint {
    pub k: C64,
}

impl SectorPoint {
    pub fn contains(k: C64) -> bool {
        k.re > 0.0 && k.im.abs() < k.re
    }

    pub fn new(k: C64) -> Result<Self> {
        if !Self::contains(k) {
            return invalid(format!("{k} is outside the sector |arg k| < π/4"));
        }
        Ok(SectorPoint { k })
    }
}

/// `n` reproducible points with |k| ≤ k_max and |arg k| ≤ 0.95·π/4.
pub fn sample_sector(n: usize, k_max: f64, seed: u64) -> Vec<SectorPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = k_max * rng.gen_range(0.05f64..1.0);
            let a = 0.95 * PI / 4.0 * rng.gen_range(-1.0f64..1.0);
            SectorPoint { k: C64::from_polar(r, a) }
        })
        .collect()
}

fn pair_densities(mesh: &BoundaryMesh, arity: usize, up: &[C64], um: &[C64], gp: &[C64], gm: &[C64], gradients: bool) -> (C64, C64) {
    let mut v = C64::new(0.0, 0.0);
    let mut g = C64::new(0.0, 0.0);
    for i in 0..mesh.len() {
        let w = mesh.weights[i];
        for c in 0..arity {
            v += w * up[i * arity + c] * um[i * arity + c];
        }
        if gradients {
            for t in 0..2 * arity {
                g += w * gp[i * 2 * arity + t] * gm[i * 2 * arity + t];
            }
        }
    }
    (v, g)
}

/// [I₀(k), I₁(k), I₂(k)] at complex k by fresh forward evaluations on the segment.
pub fn compute_i_all(src: &SourcePair, mesh: &BoundaryMesh, physics: &Physics, k: C64, nodes: usize, gradients: bool) -> Result<[C64; 3]> {
    if !(k.re > 0.0) {
        return invalid(format!("k must have positive real part, got {k}"));
    }
    let (s, w) = gauss_legendre_unit(nodes)?;
    let mut acc = [C64::new(0.0, 0.0); 3];
    for (s, w) in s.iter().zip(&w) {
        let om = k * *s;
        let (up, gp) = physics.boundary_values(src, mesh, om, gradients)?;
        let (um, gm) = physics.boundary_values(src, mesh, -om, gradients)?;
        let (v, g) = pair_densities(mesh, physics.arity(), &up, &um, &gp, &gm, gradients);
        acc[0] += *w * v;
        acc[1] += *w * om * om * v;
        acc[2] += *w * g;
    }
    Ok(acc.map(|a| 2.0 * k * a))
}

/// Single functional at complex k; see [`compute_i_all`].
pub fn compute_i(j: Functional, src: &SourcePair, mesh: &BoundaryMesh, physics: &Physics, k: C64, nodes: usize) -> Result<C64> {
    Ok(compute_i_all(src, mesh, physics, k, nodes, j == Functional::I2)?[j.index()])
}

fn density(sweep: &FrequencySweep, j: Functional, col: usize) -> Result<f64> {
    let om = sweep.grid.omega(col);
    Ok(match j {
        Functional::I0 => sweep.l2_density(col),
        Functional::I1 => om * om * sweep.l2_density(col),
        Functional::I2 => sweep.grad_density(col)?,
    })
}

/// I_j(k) for real 0 ≤ k ≤ ω_max from stored sweep data (corrected trapezoid in ω).
pub fn compute_i_sweep(j: Functional, sweep: &FrequencySweep, k: f64) -> Result<f64> {
    if k < 0.0 || k > sweep.grid.omega_max() * (1.0 + 1e-12) {
        return invalid(format!("k = {k} outside the stored band"));
    }
    if k == 0.0 {
        return Ok(0.0);
    }
    if !sweep.has_static {
        return Err(Error::Missing("static column".into()));
    }
    let y: Vec<f64> = (0..sweep.columns()).map(|c| density(sweep, j, c)).collect::<Result<_>>()?;
    Ok(2.0 * uniform_integral(0.0, sweep.grid.d_omega, &y, 0.0, k.min(sweep.grid.omega_max()))?)
}

/// 2∫_k^{ω_max} of the chosen density: the part of the full line beyond |ω| = k.
pub fn tail_integral(sweep: &FrequencySweep, k: f64, j: Functional) -> Result<f64> {
    let wmax = sweep.grid.omega_max();
    if !(k > 0.0) || wmax < 4.0 * k * (1.0 - 1e-12) {
        return invalid(format!("tail at k = {k} needs data out to 4k, have {wmax}"));
    }
    let y: Vec<f64> = (0..sweep.columns()).map(|c| density(sweep, j, c)).collect::<Result<_>>()?;
    Ok(2.0 * uniform_integral(0.0, sweep.grid.d_omega, &y, k, wmax)?)
}

/// Log–log slope of the tail against k at `points` geometrically spaced k in [k_lo, k_hi].
pub fn tail_slope(sweep: &FrequencySweep, j: Functional, k_lo: f64, k_hi: f64, points: usize) -> Result<f64> {
    if points < 2 || !(k_lo > 0.0) || !(k_hi > k_lo) {
        return invalid("tail slope needs 0 < k_lo < k_hi and two or more points");
    }
    let mut lk = Vec::with_capacity(points);
    let mut lt = Vec::with_capacity(points);
    for i in 0..points {
        let k = k_lo * (k_hi / k_lo).powf(i as f64 / (points - 1) as f64);
        let t = tail_integral(sweep, k, j)?;
        if !(t > 0.0) {
            return invalid(format!("tail vanishes at k = {k}"));
        }
        lk.push(k.ln());
        lt.push(t.ln());
    }
    Ok(regression_slope(&lk, &lt))
}

/// ε-type data norms from the band (0, K).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataNorms {
    pub k_band: f64,
    /// ε₀² = I₀(K) (ε² for the elastic system).
    pub eps0_sq: f64,
    /// ε₁² = I₁(K) + I₂(K) (ε_e² for the elastic system).
    pub eps1_sq: Option<f64>,
    /// I₀ + I₁ + I₂: the full H¹(∂Ω) variant.
    pub eps1_full_sq: Option<f64>,
    /// E = −ln ε, only when ε < 1.
    pub e0: Option<f64>,
    pub e1: Option<f64>,
}

fn big_e(eps_sq: f64) -> Option<f64> {
    (eps_sq > 0.0 && eps_sq < 1.0).then(|| -0.5 * eps_sq.ln())
}

impl DataNorms {
    pub fn from_sweep(sweep: &FrequencySweep, k_band: f64) -> Result<Self> {
        let i0 = compute_i_sweep(Functional::I0, sweep, k_band)?;
        let (eps1, full) = if sweep.tangential.is_some() {
            let i1 = compute_i_sweep(Functional::I1, sweep, k_band)?;
            let i2 = compute_i_sweep(Functional::I2, sweep, k_band)?;
            (Some(i1 + i2), Some(i0 + i1 + i2))
        } else {
            (None, None)
        };
        Ok(DataNorms {
            k_band,
            eps0_sq: i0,
            eps1_sq: eps1,
            eps1_full_sq: full,
            e0: big_e(i0),
            e1: eps1.and_then(big_e),
        })
    }

    pub fn eps0(&self) -> f64 {
        self.eps0_sq.sqrt()
    }
}

/// Result of one bound check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub functional: Functional,
    pub k: C64,
    pub value: f64,
    pub bound: f64,
}

impl BoundCheck {
    pub fn ratio(&self) -> f64 {
        if self.bound > 0.0 {
            self.value / self.bound
        } else if self.value == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn pass(&self) -> bool {
        self.value <= self.bound
    }
}

/// Right-hand side for the scalar functionals at complex k, e.g.
/// 8π|∂Ω|D(|k|‖f₁‖₀² + |k|³‖f₀‖₀²/3)e^{2D|k₂|} for I₀.
pub fn scalar_bound(j: Functional, k: C64, norms: &SourceNorms, domain: &Domain) -> Result<f64> {
    let a = k.norm();
    let pre = 8.0 * PI * domain.area() * domain.diameter * (2.0 * domain.diameter * k.im.abs()).exp();
    let body = match j {
        Functional::I0 => a * norms.f1(0)?.powi(2) + a.powi(3) * norms.f0(0)?.powi(2) / 3.0,
        Functional::I1 => a.powi(3) * norms.f1(0)?.powi(2) / 3.0 + a.powi(5) * norms.f0(0)?.powi(2) / 5.0,
        Functional::I2 => a * norms.f1(1)?.powi(2) + a.powi(3) * norms.f0(1)?.powi(2) / 3.0,
    };
    Ok(pre * body)
}

/// The scalar check: 16π²|I_j(k)| against [`scalar_bound`].
pub fn check_scalar_bound(j: Functional, k: C64, value: C64, norms: &SourceNorms, domain: &Domain) -> Result<BoundCheck> {
    Ok(BoundCheck { functional: j, k, value: SCALAR_KERNEL_SCALE * value.norm(), bound: scalar_bound(j, k, norms, domain)? })
}

/// Elastic shape without the constant: (|k|‖f₁‖² + |k|³‖f₀‖²)e^{2D|k₂|/c_s} with H² (I₀, I₁) or H³ (I₂) norms.
pub fn elastic_shape(j: Functional, k: C64, norms: &SourceNorms, params: &ElasticParams, domain: &Domain) -> Result<f64> {
    let a = k.norm();
    let e = (2.0 * domain.diameter * k.im.abs() / params.cs()).exp();
    let body = match j {
        Functional::I0 => a * norms.f1(2)?.powi(2) + a.powi(3) * norms.f0(2)?.powi(2),
        Functional::I1 => a.powi(3) * norms.f1(2)?.powi(2) + a.powi(5) * norms.f0(2)?.powi(2),
        Functional::I2 => a * norms.f1(3)?.powi(2) + a.powi(3) * norms.f0(3)?.powi(2),
    };
    Ok(e * body)
}

pub fn elastic_bound(j: Functional, k: C64, norms: &SourceNorms, params: &ElasticParams, domain: &Domain, c: f64) -> Result<f64> {
    Ok(c * elastic_shape(j, k, norms, params, domain)?)
}

/// Safety factor applied to the largest observed ratio when calibrating a constant.
pub const CALIBRATION_MARGIN: f64 = 1.5;

/// max ratio × 1.5 over (value, shape) pairs.
pub fn calibrate_constant(pairs: &[(f64, f64)]) -> Result<f64> {
    let mut best = 0.0f64;
    for &(v, s) in pairs {
        if s > 0.0 {
            best = best.max(v / s);
        } else if v > 0.0 {
            return Err(Error::Degenerate("nonzero value against a zero shape".into()));
        }
    }
    if best == 0.0 {
        return Err(Error::Degenerate("calibration battery is all zero".into()));
    }
    Ok(best * CALIBRATION_MARGIN)
}

/// Lower bound for the harmonic measure of [0, K] at real k.
pub fn harmonic_measure_lower(k: f64, k_band: f64) -> Result<f64> {
    if !(k > 0.0) || !(k_band > 0.0) {
        return invalid("harmonic measure needs k > 0 and K > 0");
    }
    if k < 2f64.powf(0.25) * k_band {
        return Ok(0.5);
    }
    Ok(1.0 / (PI * ((k / k_band).powi(4) - 1.0).sqrt()))
}

/// Frequency level at which the band is split: K^{2/3}E^{1/4} when that exceeds K.
pub fn truncation_k(k_band: f64, e: f64) -> Result<f64> {
    if !(k_band > 1.0) || !(e > 0.0) {
        return invalid(format!("truncation rule needs K > 1 and E > 0 (K={k_band}, E={e})"));
    }
    if 2f64.powf(0.25) * k_band.cbrt() < e.powf(0.25) {
        Ok(k_band.powf(2.0 / 3.0) * e.powf(0.25))
    } else {
        Ok(k_band)
    }
}

/// C·e^{2(D+1)k}·ε^{2μ(k)}·M² at real k > K, using the lower bound for μ.
pub fn continuation_bound(eps: f64, k: f64, k_band: f64, m: f64, diameter: f64, c: f64) -> Result<f64> {
    if !(eps < 1.0) || eps < 0.0 {
        return Err(Error::InvalidParameter(format!("continuation bound needs 0 ≤ ε < 1, got {eps}")));
    }
    if !(k > k_band) {
        return invalid("continuation bound is for k > K");
    }
    let mu = harmonic_measure_lower(k, k_band)?;
    Ok(c * (2.0 * (diameter + 1.0) * k).exp() * eps.powf(2.0 * mu) * m * m)
}

/// The data norm and source aggregate each functional pairs with in the continuation bound.
pub fn continuation_inputs(j: Functional, data: &DataNorms, norms: &SourceNorms, physics: &Physics) -> Result<(f64, f64)> {
    let eps1 = || data.eps1_sq.map(f64::sqrt).ok_or_else(|| Error::Missing("ε₁ needs tangential gradients".into()));
    match (physics, j) {
        (Physics::Scalar, Functional::I0) => Ok((data.eps0(), norms.m0()?)),
        (Physics::Scalar, Functional::I1) => Ok((eps1()?, norms.m0()?)),
        (Physics::Scalar, Functional::I2) => Ok((eps1()?, norms.m1()?)),
        (Physics::Elastic(_), Functional::I0) => Ok((data.eps0(), norms.m2e()?)),
        (Physics::Elastic(_), _) => Ok((eps1()?, norms.m3()?)),
    }
}

/// Right-hand side C(ε² + M²/(1 + K^{4/3}E^{1/2})) of the stability estimate.
pub fn stability_ceiling(eps_sq: f64, m: f64, k_band: f64, e: Option<f64>, c: f64) -> f64 {
    let e = e.unwrap_or(0.0).abs();
    c * (eps_sq + m * m / (1.0 + k_band.powf(4.0 / 3.0) * e.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_lower_values() {
        assert_eq!(harmonic_measure_lower(0.5, 1.0).unwrap(), 0.5);
        assert!((harmonic_measure_lower(2.0, 1.0).unwrap() - 1.0 / (PI * 15f64.sqrt())).abs() < 1e-15);
        let mut last = 1.0;
        for t in [2.0, 4.0, 8.0, 16.0, 64.0] {
            let v = harmonic_measure_lower(t, 1.0).unwrap();
            assert!(v < last);
            last = v;
        }
        let far = harmonic_measure_lower(1e3, 1.0).unwrap();
        assert!((far * PI * 1e6 - 1.0).abs() < 1e-6);
        assert!(harmonic_measure_lower(0.0, 1.0).is_err());
    }

    #[test]
    fn truncation_rule() {
        assert!((truncation_k(4.0, 16.0).unwrap() - 4f64.powf(2.0 / 3.0) * 2.0).abs() < 1e-12);
        assert_eq!(truncation_k(4.0, 1.0).unwrap(), 4.0);
        // E^{1/4} = 2^{1/4}K^{1/3} exactly when E = 2K^{4/3}; choose K = 8
        assert_eq!(truncation_k(8.0, 32.0).unwrap(), 8.0);
        assert!(truncation_k(1.0, 2.0).is_err());
    }

    #[test]
    fn sector_membership() {
        assert!(SectorPoint::new(C64::new(1.0, 0.5)).is_ok());
        assert!(SectorPoint::new(C64::new(1.0, 1.5)).is_err());
        assert!(SectorPoint::new(C64::new(-1.0, 0.0)).is_err());
        for p in sample_sector(50, 3.0, 7) {
            assert!(SectorPoint::contains(p.k) && p.k.norm() <= 3.0);
        }
        assert_eq!(sample_sector(5, 1.0, 3), sample_sector(5, 1.0, 3));
    }

    #[test]
    fn continuation_limits() {
        let b = continuation_bound(1.0 - 1e-12, 3.0, 2.0, 2.0, 2.0, 1.0).unwrap();
        assert!((b / ((2.0 * 3.0 * 3.0f64).exp() * 4.0) - 1.0).abs() < 1e-9);
        assert!(continuation_bound(1.0, 3.0, 2.0, 1.0, 2.0, 1.0).is_err());
        // larger μ (closer to the band) gives a smaller bound at fixed ε
        let near = continuation_bound(0.1, 2.1, 2.0, 1.0, 2.0, 1.0).unwrap() / (2.0 * 3.0 * 2.1f64).exp();
        let far = continuation_bound(0.1, 6.0, 2.0, 1.0, 2.0, 1.0).unwrap() / (2.0 * 3.0 * 6.0f64).exp();
        assert!(near < far);
    }

    #[test]
    fn calibration_policy() {
        let c = calibrate_constant(&[(1.0, 2.0), (3.0, 1.0), (0.0, 5.0)]).unwrap();
        assert!((c - 4.5).abs() < 1e-15);
        assert!(calibrate_constant(&[(0.0, 1.0)]).is_err());
    }
}
