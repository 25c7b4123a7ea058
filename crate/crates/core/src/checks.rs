//! Verification routines shared by the command line and the acceptance suite.

use serde::{Deserialize, Serialize};

use crate::domain::{build_domain, build_domain_with_mesh, Domain, Shape};
use crate::elastic::{phi_matrix, phi_static, ElasticParams, THETA_SWITCH};
use crate::error::{invalid, Error, Result};
use crate::experiment::physics_sweep;
use crate::fdtd::{cfl_dt, curl_div_probe, fdtd_backward, fdtd_forward, BackwardOptions, ForwardOptions};
use crate::functionals::{compute_i_sweep, harmonic_measure_lower, tail_integral, tail_slope, Functional, Physics};
use crate::harmonic::{harmonic_measure_mc, McEstimate};
use crate::geom::{self, Vec3};
use crate::kirchhoff::kirchhoff_eval;
use crate::radial::{exact_trace, radial_sweep};
use crate::source::{rasterize_source, Bump, BumpKind, SourceDesc, SourcePair};
use crate::sweep::{FrequencyGrid, FrequencySweep, C64};
use crate::synthesis::{forward_transform, huygens_residual, parseval_check, synthesize_time_trace};

/// Weighted relative L² distance between two sweeps over columns `lo..=hi`.
pub fn sweep_distance(a: &FrequencySweep, b: &FrequencySweep, lo: usize, hi: usize) -> Result<f64> {
    if !a.same_layout(b) {
        return Err(Error::Mismatch("sweeps differ in layout".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..a.nodes() {
        let w = a.mesh.weights[i];
        for j in lo..=hi.min(a.grid.count) {
            for c in 0..a.arity {
                num += w * (a.value(i, j, c) - b.value(i, j, c)).norm_sqr();
                den += w * a.value(i, j, c).norm_sqr();
            }
        }
    }
    if den == 0.0 {
        return Err(Error::Degenerate("reference sweep vanishes on the band".into()));
    }
    Ok((num / den).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityCheck {
    pub rel_error: f64,
    pub band: (f64, f64),
    pub box_n: [usize; 3],
    pub steps: usize,
}

/// Transform of the FDTD boundary trace against the volume-integral sweep over the middle half of (0, ω_max].
pub fn duality_check(desc: &SourceDesc, domain: &Domain, physics: &Physics, omega_max: f64, d_omega: f64) -> Result<DualityCheck> {
    let src = rasterize_source(desc, domain, physics.arity())?;
    let t_rec = domain.diameter / physics.c_min() + 0.5;
    let run = fdtd_forward(&src, domain, physics, &ForwardOptions::new(t_rec))?;
    let grid = FrequencyGrid::new(d_omega, (omega_max / d_omega).round().max(1.0) as usize)?;
    let ft = forward_transform(&run.trace, &grid);
    let sw = physics_sweep(&src, domain, physics, &grid)?;
    let band = (omega_max / 4.0, 3.0 * omega_max / 4.0);
    let lo = grid.index_for(band.0).max(1);
    let hi = grid.index_for(band.1);
    Ok(DualityCheck { rel_error: sweep_distance(&sw, &ft, lo, hi)?, band, box_n: run.grid.n, steps: run.trace.n_t })
}

/// Relative L² error of the f₀ voxels against the analytic description on the reconstruction mask.
pub fn voxel_error(rec: &SourcePair, desc: &SourceDesc) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for idx in 0..rec.grid.len() {
        if !rec.mask[idx] {
            continue;
        }
        let v = desc.value(rec.grid.point(idx)).0;
        for c in 0..rec.arity {
            num += (rec.f0[idx * rec.arity + c] - v[c]).powi(2);
            den += v[c] * v[c];
        }
    }
    if den == 0.0 {
        return Err(Error::Degenerate("source vanishes on the reconstruction mask".into()));
    }
    Ok((num / den).sqrt())
}

/// Backward reconstruction from the closed-form full-band trace at spacing `h`; returns the f₀ error.
pub fn self_consistency(desc: &SourceDesc, shape: &Shape, physics: &Physics, h: f64) -> Result<f64> {
    let domain = build_domain(shape, h)?;
    let t_final = domain.diameter / physics.c_min() + 0.2;
    let dt = cfl_dt(h, physics.c_max());
    let n_t = (t_final / dt).ceil() as usize + 4;
    let trace = exact_trace(desc, &domain.mesh, physics, dt, n_t)?;
    let rec = fdtd_backward(&trace, &domain, physics, &BackwardOptions::new(t_final))?;
    voxel_error(&rec, desc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HuygensCheck {
    /// Mass fraction of the boundary trace after `t_after`.
    pub residual: f64,
    pub t_after: f64,
    /// ‖U‖ over Ω five steps after `t_after`, relative to its peak.
    pub interior: f64,
    /// Largest |U| beyond |x − a| > c_p t + D relative to the snapshot peak.
    pub outside_cone: Option<f64>,
}

/// FDTD Huygens diagnostics: t_after = D / c_min, cone check on snapshots for elastic runs.
pub fn huygens_check(desc: &SourceDesc, domain: &Domain, physics: &Physics) -> Result<HuygensCheck> {
    let src = rasterize_source(desc, domain, physics.arity())?;
    let t_after = domain.diameter / physics.c_min();
    let mut opts = ForwardOptions::new(t_after + 0.5);
    let elastic = matches!(physics, Physics::Elastic(_));
    if elastic {
        opts.snapshot_times = vec![0.15 * t_after, 0.3 * t_after];
    }
    let run = fdtd_forward(&src, domain, physics, &opts)?;
    let residual = huygens_residual(&run.trace, t_after)?;
    let peak = run.omega_norm.iter().cloned().fold(0.0, f64::max);
    let n = ((t_after / run.dt).ceil() as usize + 5).min(run.omega_norm.len() - 1);
    let interior = if peak > 0.0 { run.omega_norm[n] / peak } else { 0.0 };
    let outside_cone = if elastic {
        let (a, _) = domain.shape.enclosing_ball();
        let mut worst = 0.0f64;
        for s in &run.snapshots {
            let (mut pk, mut out) = (0.0f64, 0.0f64);
            for i in 0..s.grid.len() {
                let v = s.field[i * s.arity..(i + 1) * s.arity].iter().map(|x| x * x).sum::<f64>().sqrt();
                pk = pk.max(v);
                if geom::dist(s.grid.point(i), a) > physics.c_max() * s.t + domain.diameter {
                    out = out.max(v);
                }
            }
            if pk > 0.0 {
                worst = worst.max(out / pk);
            }
        }
        Some(worst)
    } else {
        None
    };
    Ok(HuygensCheck { residual, t_after, interior, outside_cone })
}

/// Largest relative jump of Φ across the series/direct switchover over a few radii and directions.
pub fn switchover_jump(p: &ElasticParams) -> Result<f64> {
    let mut worst = 0.0f64;
    for d in [[0.3, -0.2, 0.5], [1.0, 0.0, 0.0], [0.05, 0.02, -0.01]] {
        let r = geom::norm(d);
        for dir in [C64::new(1.0, 0.0), C64::new(0.8, 0.6), C64::new(0.6, -0.8)] {
            let k = THETA_SWITCH * p.cs() / r;
            let a = phi_matrix(d, dir * (k * (1.0 - 1e-9)), p)?;
            let b = phi_matrix(d, dir * (k * (1.0 + 1e-9)), p)?;
            let (mut num, mut den) = (0.0f64, 0.0f64);
            for j in 0..3 {
                for m in 0..3 {
                    num = num.max((a[j][m] - b[j][m]).norm());
                    den = den.max(a[j][m].norm());
                }
            }
            worst = worst.max(num / den);
        }
    }
    Ok(worst)
}

/// Largest entrywise gap between Φ at |k|r = 1e−12 and the static matrix, relative to the largest entry.
pub fn static_limit_error(p: &ElasticParams) -> Result<f64> {
    let mut worst = 0.0f64;
    for d in [[0.3, -0.4, 0.5], [1.0, 0.0, 0.0], [0.1, 0.2, -0.05]] {
        let a = phi_matrix(d, C64::new(1e-12 / geom::norm(d), 0.0), p)?;
        let s = phi_static(d, p);
        let scale = s.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
        for j in 0..3 {
            for m in 0..3 {
                worst = worst.max((a[j][m] - s[j][m]).norm() / scale);
            }
        }
    }
    Ok(worst)
}

/// Ten lattice points at radii 0.3 to 0.9 along fixed directions.
pub fn kirchhoff_probe_points() -> Vec<Vec3> {
    let dirs = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 1.0, 0.0],
        [1.0, 0.0, 1.0],
        [0.0, 1.0, 1.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 1.0],
        [1.0, -1.0, 0.0],
        [-1.0, -1.0, -1.0],
    ];
    let radii = [0.3, 0.5, 0.7, 0.9, 0.4, 0.6, 0.8, 0.35, 0.55, 0.75];
    dirs.iter().zip(radii).map(|(d, r)| geom::scale(*d, r / geom::norm(*d))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KirchhoffCheck {
    pub rel_error: f64,
    pub t: f64,
    pub points: Vec<Vec3>,
}

/// Elastic FDTD snapshot at time `t` against the integral representation at lattice points near `points`.
pub fn kirchhoff_check(desc: &SourceDesc, domain: &Domain, p: &ElasticParams, t: f64, points: &[Vec3]) -> Result<KirchhoffCheck> {
    let src = rasterize_source(desc, domain, 3)?;
    let mut opts = ForwardOptions::new(t + 0.05);
    opts.snapshot_times = vec![t];
    let run = fdtd_forward(&src, domain, &Physics::Elastic(*p), &opts)?;
    let snap = run.snapshots.first().ok_or_else(|| Error::Missing("snapshot".into()))?;
    let g = &snap.grid;
    let (mut num, mut den) = (0.0, 0.0);
    let mut used = Vec::with_capacity(points.len());
    for x in points {
        let ijk = [0, 1, 2].map(|a| ((x[a] - g.origin[a]) / g.h).round().clamp(0.0, (g.n[a] - 1) as f64) as usize);
        let idx = g.index(ijk[0], ijk[1], ijk[2]);
        let xp = g.point(idx);
        let uk = kirchhoff_eval(desc, xp, snap.t, p)?;
        for c in 0..3 {
            num += (snap.field[idx * 3 + c] - uk[c]).powi(2);
            den += uk[c] * uk[c];
        }
        used.push(xp);
    }
    if den == 0.0 {
        return Err(Error::Degenerate("field vanishes at every probe point".into()));
    }
    Ok(KirchhoffCheck { rel_error: (num / den).sqrt(), t: snap.t, points: used })
}

/// (c_p, c_s) estimated from div and curl fronts of gradient and curl bumps at the center of `domain`.
pub fn speed_check(domain: &Domain, p: &ElasticParams, sigma: f64) -> Result<(f64, f64)> {
    let (a, _) = domain.shape.enclosing_ball();
    let physics = Physics::Elastic(*p);
    let run = |kind: BumpKind, c: f64| -> Result<_> {
        let desc = SourceDesc { f0: vec![Bump::gaussian(a, 1.0, sigma).with_kind(kind)], f1: vec![] };
        let src = rasterize_source(&desc, domain, 3)?;
        let times: Vec<f64> = (0..5).map(|i| (0.7 + 0.175 * i as f64) / c).collect();
        let mut opts = ForwardOptions::new(times[4] + 0.05);
        opts.snapshot_times = times;
        opts.snapshot_half_width = Some(1.8);
        Ok(fdtd_forward(&src, domain, &physics, &opts)?.snapshots)
    };
    let div = run(BumpKind::Gradient, p.cp())?;
    let curl = run(BumpKind::Curl { axis: [0.0, 0.0, 1.0] }, p.cs())?;
    curl_div_probe(&div, &curl, a)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub label: String,
    pub functional: Functional,
    pub k_lo: f64,
    pub k_hi: f64,
    pub slope: f64,
}

/// Tail slope of I₀ for radial bumps centered at the origin of a unit sphere, from the point-source identity.
pub fn tail_check(label: &str, desc: &SourceDesc, physics: &Physics, k_lo: f64, k_hi: f64) -> Result<TailCheck> {
    let mesh = crate::domain::BoundaryMesh::sphere([0.0; 3], 1.0, 12);
    let d_omega = 0.1;
    let grid = FrequencyGrid::new(d_omega, (4.0 * k_hi / d_omega).ceil() as usize)?;
    let sw = radial_sweep(desc, &mesh, physics, &grid)?;
    let slope = tail_slope(&sw, Functional::I0, k_lo, k_hi, 11)?;
    Ok(TailCheck { label: label.into(), functional: Functional::I0, k_lo, k_hi, slope })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bookkeeping {
    /// Largest |ratio − 1| of time over frequency energy across the cuts.
    pub parseval: f64,
    /// Largest relative gap of full = I_j(k) + tail over functionals and k.
    pub decomposition: f64,
}

/// Parseval at several band cuts and the decomposition identity at several k on one sweep.
pub fn bookkeeping(sweep: &FrequencySweep) -> Result<Bookkeeping> {
    let wmax = sweep.grid.omega_max();
    let mut parseval = 0.0f64;
    for frac in [0.25, 0.5, 1.0] {
        let k = frac * wmax;
        let tr = synthesize_time_trace(sweep, k)?;
        parseval = parseval.max((parseval_check(sweep, &tr, k)? - 1.0).abs());
    }
    let mut decomposition = 0.0f64;
    for j in [Functional::I0, Functional::I1] {
        let full = compute_i_sweep(j, sweep, wmax)?;
        for frac in [0.05, 0.1, 0.2, 0.25] {
            let k = sweep.grid.omega(sweep.grid.index_for(frac * wmax).max(1));
            let split = compute_i_sweep(j, sweep, k)? + tail_integral(sweep, k, j)?;
            decomposition = decomposition.max((split - full).abs() / full);
        }
    }
    Ok(Bookkeeping { parseval, decomposition })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicPoint {
    pub k: f64,
    pub estimate: McEstimate,
    pub lower: f64,
}

impl HarmonicPoint {
    /// Margin above the lower bound in standard errors.
    pub fn z(&self) -> f64 {
        (self.estimate.value - self.lower) / self.estimate.stderr
    }

    pub fn pass(&self) -> bool {
        self.estimate.value >= self.lower - 3.0 * self.estimate.stderr
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCheck {
    pub k_band: f64,
    pub points: Vec<HarmonicPoint>,
    /// Estimate just above the middle of the slit (expect 1).
    pub slit: McEstimate,
    /// Estimate just inside the upper ray (expect 0).
    pub ray: McEstimate,
}

impl HarmonicCheck {
    pub fn pass(&self) -> bool {
        let near = |e: &McEstimate, want: f64| (e.value - want).abs() <= 3.0 * e.stderr;
        !self.points.is_empty() && self.points.iter().all(HarmonicPoint::pass) && near(&self.slit, 1.0) && near(&self.ray, 0.0)
    }
}

/// Walk-on-spheres estimates at `points` real k evenly inside (K, 4K), plus the slit and ray limits.
pub fn harmonic_check(k_band: f64, points: usize, walks: u64, seed: u64) -> Result<HarmonicCheck> {
    if points == 0 || walks == 0 {
        return invalid("harmonic check needs points and walks");
    }
    let mut out = Vec::with_capacity(points);
    for i in 0..points {
        let k = k_band * (1.0 + 3.0 * (i as f64 + 0.5) / points as f64);
        let estimate = harmonic_measure_mc(C64::new(k, 0.0), k_band, walks, seed.wrapping_add(i as u64))?;
        out.push(HarmonicPoint { k, estimate, lower: harmonic_measure_lower(k, k_band)? });
    }
    let slit = harmonic_measure_mc(C64::new(0.5 * k_band, 1e-6 * k_band), k_band, walks, seed ^ 0x51)?;
    let ray = harmonic_measure_mc(C64::from_polar(0.7 * k_band, std::f64::consts::FRAC_PI_4 - 1e-6), k_band, walks, seed ^ 0x7a)?;
    Ok(HarmonicCheck { k_band, points: out, slit, ray })
}

/// Domain for checks that pair a fine volume grid with a coarser mesh.
pub fn check_domain(shape: &Shape, h: f64, mesh_spacing: Option<f64>) -> Result<Domain> {
    match mesh_spacing {
        Some(m) if !(m > 0.0) => invalid("mesh spacing must be positive"),
        Some(m) => build_domain_with_mesh(shape, h, m),
        None => build_domain(shape, h),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::helmholtz::forward_sweep;

    #[test]
    fn kernel_switchover_and_static_limit() {
        let p = ElasticParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(switchover_jump(&p).unwrap() < 1e-6);
        let e = static_limit_error(&p).unwrap();
        assert!(e < 1e-10, "{e}");
    }

    #[test]
    fn bookkeeping_closes_on_a_small_sweep() {
        let domain = build_domain(&Shape::unit_ball(), 1.0 / 8.0).unwrap();
        let desc = SourceDesc { f0: vec![Bump::gaussian([0.0; 3], 1.0, 0.15)], f1: vec![] };
        let src = rasterize_source(&desc, &domain, 1).unwrap();
        let grid = FrequencyGrid::for_band(8.0, 8.0).unwrap();
        let b = bookkeeping(&forward_sweep(&src, &domain.mesh, &grid)).unwrap();
        assert!(b.parseval < 1e-6 && b.decomposition < 1e-6, "{b:?}");
    }

    #[test]
    fn probe_points_lie_inside_the_unit_ball() {
        let pts = kirchhoff_probe_points();
        assert_eq!(pts.len(), 10);
        assert!(pts.iter().all(|x| geom::norm(*x) < 0.95));
    }

    #[test]
    fn critical_bump_tail_slope() {
        let desc = SourceDesc { f0: vec![Bump::poly([0.0; 3], 1.0, 0.5, 0.5)], f1: vec![] };
        let t = tail_check("poly", &desc, &Physics::Scalar, 8.0, 80.0).unwrap();
        assert!((t.slope + 2.0).abs() < 0.3, "{}", t.slope);
    }

    #[test]
    fn distance_of_a_sweep_to_itself() {
        let mesh = crate::domain::BoundaryMesh::sphere([0.0; 3], 1.0, 8);
        let grid = FrequencyGrid::new(1.0, 4).unwrap();
        let desc = SourceDesc { f0: vec![Bump::gaussian([0.0; 3], 1.0, 0.2)], f1: vec![] };
        let sw = radial_sweep(&desc, &mesh, &Physics::Scalar, &grid).unwrap();
        assert_eq!(sweep_distance(&sw, &sw, 1, 4).unwrap(), 0.0);
        assert!(sweep_distance(&sw, &FrequencySweep::zeros(&mesh, &grid, 1, false), 1, 1).is_ok());
    }

    #[test]
    fn harmonic_limits_and_points() {
        let h = harmonic_check(1.0, 3, 4000, 5).unwrap();
        assert_eq!(h.points.len(), 3);
        assert!(h.points.iter().all(|p| p.k > 1.0 && p.k < 4.0));
        assert!(h.pass(), "{h:?}");
        assert!(harmonic_check(1.0, 0, 10, 1).is_err());
    }
}
