//! Analytic bump descriptions and their voxel rasterization.

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Grid3};
use crate::error::{invalid, Error, Result};
use crate::geom::{self, Vec3};

/// Radial profile φ(ρ) with unit peak.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// exp(−ρ²/2σ²), smoothly tapered to zero on [0.8, 1]·cutoff·σ.
    Gaussian {
        sigma: f64,
        #[serde(default = "default_cutoff")]
        cutoff: f64,
    },
    /// (1 − ρ²/w²)^p on ρ < w.
    Poly { width: f64, power: f64 },
}

fn default_cutoff() -> f64 {
    4.0
}

fn plateau(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        (-1.0 / u).exp()
    }
}

fn plateau_d(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        (-1.0 / u).exp() / (u * u)
    }
}

/// C^∞ step from 1 (x ≤ 0.8) to 0 (x ≥ 1), with derivative.
fn taper(x: f64) -> (f64, f64) {
    if x <= 0.8 {
        return (1.0, 0.0);
    }
    if x >= 1.0 {
        return (0.0, 0.0);
    }
    let u = (x - 0.8) / 0.2;
    let (a, b) = (plateau(u), plateau(1.0 - u));
    let (da, db) = (plateau_d(u), -plateau_d(1.0 - u));
    let s = a / (a + b);
    let ds = (da * (a + b) - a * (da + db)) / ((a + b) * (a + b));
    (1.0 - s, -ds / 0.2)
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Profile::Gaussian { sigma, cutoff } => {
                if !(sigma > 0.0) || !(cutoff > 0.0) {
                    return invalid("gaussian sigma and cutoff must be positive");
                }
            }
            Profile::Poly { width, power } => {
                if !(width > 0.0) || !(power > 0.0) {
                    return invalid("polynomial width and power must be positive");
                }
            }
        }
        Ok(())
    }

    pub fn support(&self) -> f64 {
        match *self {
            Profile::Gaussian { sigma, cutoff } => sigma * cutoff,
            Profile::Poly { width, .. } => width,
        }
    }

    /// Number of continuous derivatives (`u32::MAX` for C^∞).
    pub fn smoothness(&self) -> u32 {
        match *self {
            Profile::Gaussian { .. } => u32::MAX,
            Profile::Poly { power, .. } => {
                if power.fract() == 0.0 {
                    power as u32 - 1
                } else {
                    power.floor() as u32
                }
            }
        }
    }

    /// φ(ρ) and φ′(ρ).
    pub fn eval(&self, rho: f64) -> (f64, f64) {
        match *self {
            Profile::Gaussian { sigma, cutoff } => {
                let r = cutoff * sigma;
                if rho >= r {
                    return (0.0, 0.0);
                }
                let g = (-rho * rho / (2.0 * sigma * sigma)).exp();
                let dg = -rho / (sigma * sigma) * g;
                let (t, dt) = taper(rho / r);
                (g * t, dg * t + g * dt / r)
            }
            Profile::Poly { width, power } => {
                if rho >= width {
                    return (0.0, 0.0);
                }
                let q = 1.0 - rho * rho / (width * width);
                let v = q.powf(power);
                let dv = if power == 1.0 {
                    -2.0 * rho / (width * width)
                } else {
                    power * q.powf(power - 1.0) * (-2.0 * rho / (width * width))
                };
                (v, dv)
            }
        }
    }
}

/// How a radial profile becomes a scalar or vector field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BumpKind {
    Scalar,
    /// dir·φ
    Vector { dir: Vec3 },
    /// curl(axis·φ) = ∇φ × axis, divergence-free
    Curl { axis: Vec3 },
    /// ∇φ, curl-free
    Gradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec3,
    pub amplitude: f64,
    pub profile: Profile,
    #[serde(default = "scalar_kind")]
    pub kind: BumpKind,
}

fn scalar_kind() -> BumpKind {
    BumpKind::Scalar
}

impl Bump {
    pub fn gaussian(center: Vec3, amplitude: f64, sigma: f64) -> Self {
        Bump { center, amplitude, profile: Profile::Gaussian { sigma, cutoff: 4.0 }, kind: BumpKind::Scalar }
    }

    pub fn poly(center: Vec3, amplitude: f64, width: f64, power: f64) -> Self {
        Bump { center, amplitude, profile: Profile::Poly { width, power }, kind: BumpKind::Scalar }
    }

    pub fn with_kind(mut self, kind: BumpKind) -> Self {
        self.kind = kind;
        self
    }

    fn differentiated(&self) -> bool {
        matches!(self.kind, BumpKind::Curl { .. } | BumpKind::Gradient)
    }

    pub fn smoothness(&self) -> u32 {
        let s = self.profile.smoothness();
        if self.differentiated() {
            s.saturating_sub(1)
        } else {
            s
        }
    }

    /// Pointwise value with exact derivatives for the differentiated kinds.
    pub fn value(&self, p: Vec3) -> Vec3 {
        let d = geom::sub(p, self.center);
        let rho = geom::norm(d);
        let (v, dv) = self.profile.eval(rho);
        let a = self.amplitude;
        let grad = if rho > 0.0 { geom::scale(d, a * dv / rho) } else { [0.0; 3] };
        match self.kind {
            BumpKind::Scalar => [a * v, 0.0, 0.0],
            BumpKind::Vector { dir } => geom::scale(dir, a * v),
            BumpKind::Curl { axis } => geom::cross(grad, axis),
            BumpKind::Gradient => grad,
        }
    }
}

/// Sum of bumps for f0 and for f1.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceDesc {
    #[serde(default)]
    pub f0: Vec<Bump>,
    #[serde(default)]
    pub f1: Vec<Bump>,
}

impl SourceDesc {
    pub fn is_empty(&self) -> bool {
        self.f0.is_empty() && self.f1.is_empty()
    }

    pub fn scaled(&self, s: f64) -> SourceDesc {
        let sc = |v: &Vec<Bump>| v.iter().map(|b| Bump { amplitude: b.amplitude * s, ..*b }).collect();
        SourceDesc { f0: sc(&self.f0), f1: sc(&self.f1) }
    }

    pub fn smoothness(&self) -> u32 {
        self.f0.iter().chain(&self.f1).map(Bump::smoothness).min().unwrap_or(u32::MAX)
    }

    /// Pointwise (f0, f1) at `p`.
    pub fn value(&self, p: Vec3) -> (Vec3, Vec3) {
        let sum = |v: &Vec<Bump>| v.iter().fold([0.0; 3], |acc, b| geom::add(acc, b.value(p)));
        (sum(&self.f0), sum(&self.f1))
    }
}

/// Voxel fields (f0, f1) on the domain lattice, interleaved by component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourcePair {
    pub grid: Grid3,
    pub arity: usize,
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
    pub mask: Vec<bool>,
    /// Continuous derivatives of the generating description (`u32::MAX` for C^∞, 0 if unknown).
    pub smoothness: u32,
}

/// A supported voxel with its field values.
#[derive(Clone, Copy, Debug)]
pub struct Voxel {
    pub pos: Vec3,
    pub f0: Vec3,
    pub f1: Vec3,
}

impl SourcePair {
    pub fn zeros(grid: &Grid3, arity: usize) -> Self {
        let n = grid.len();
        SourcePair {
            grid: grid.clone(),
            arity,
            f0: vec![0.0; n * arity],
            f1: vec![0.0; n * arity],
            mask: vec![false; n],
            smoothness: u32::MAX,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.f0.iter_mut().chain(out.f1.iter_mut()).for_each(|v| *v *= s);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.f0.iter().chain(&self.f1).all(|&v| v == 0.0)
    }

    /// Masked voxels with at least one nonzero value, in lattice order.
    pub fn voxels(&self) -> Vec<Voxel> {
        let c = self.arity;
        (0..self.grid.len())
            .filter(|&i| self.mask[i])
            .filter_map(|i| {
                let mut f0 = [0.0; 3];
                let mut f1 = [0.0; 3];
                f0[..c].copy_from_slice(&self.f0[i * c..i * c + c]);
                f1[..c].copy_from_slice(&self.f1[i * c..i * c + c]);
                if f0.iter().chain(&f1).all(|&v| v == 0.0) {
                    None
                } else {
                    Some(Voxel { pos: self.grid.point(i), f0, f1 })
                }
            })
            .collect()
    }

    /// Component `c` of f0 (`which = 0`) or f1 (`which = 1`) as a scalar field.
    pub fn component(&self, which: usize, c: usize) -> Vec<f64> {
        let f = if which == 0 { &self.f0 } else { &self.f1 };
        f.iter().skip(c).step_by(self.arity).copied().collect()
    }
}

/// Rasterize a description onto the voxel lattice of `domain`.
pub fn rasterize_source(desc: &SourceDesc, domain: &Domain, arity: usize) -> Result<SourcePair> {
    if arity != 1 && arity != 3 {
        return invalid(format!("arity must be 1 or 3, got {arity}"));
    }
    let grid = &domain.grid;
    let h = grid.h;
    let mut out = SourcePair::zeros(grid, arity);
    out.smoothness = desc.smoothness();
    for (which, bumps) in [(0usize, &desc.f0), (1usize, &desc.f1)] {
        for b in bumps {
            b.profile.validate()?;
            let scalar_kind = matches!(b.kind, BumpKind::Scalar);
            if scalar_kind != (arity == 1) {
                return invalid("bump kind does not match field arity");
            }
            let extra = if b.differentiated() { h } else { 0.0 };
            let reach = b.profile.support() + extra;
            let depth = domain.shape.depth(b.center);
            if depth < reach + domain.standoff() {
                return Err(Error::Standoff(format!(
                    "bump at {:?} reaches {:.4} but only {:.4} is available",
                    b.center,
                    reach + domain.standoff(),
                    depth
                )));
            }
            let field = if which == 0 { &mut out.f0 } else { &mut out.f1 };
            let mut lo = [0usize; 3];
            let mut hi = [0usize; 3];
            for a in 0..3 {
                let s0 = ((b.center[a] - reach - grid.origin[a]) / h).floor().max(0.0) as usize;
                let s1 = (((b.center[a] + reach - grid.origin[a]) / h).ceil() as usize).min(grid.n[a] - 1);
                lo[a] = s0;
                hi[a] = s1;
            }
            let phi = |i: usize, j: usize, k: usize| {
                let p = grid.point_ijk(i, j, k);
                b.amplitude * b.profile.eval(geom::dist(p, b.center)).0
            };
            for i in lo[0]..=hi[0] {
                for j in lo[1]..=hi[1] {
                    for k in lo[2]..=hi[2] {
                        let p = grid.point_ijk(i, j, k);
                        if geom::dist(p, b.center) > reach + 1e-12 {
                            continue;
                        }
                        let idx = grid.index(i, j, k);
                        out.mask[idx] = true;
                        let v: Vec3 = match b.kind {
                            BumpKind::Scalar => [phi(i, j, k), 0.0, 0.0],
                            BumpKind::Vector { dir } => geom::scale(dir, phi(i, j, k)),
                            BumpKind::Curl { .. } | BumpKind::Gradient => {
                                let g = [
                                    (phi(i + 1, j, k) - phi(i - 1, j, k)) / (2.0 * h),
                                    (phi(i, j + 1, k) - phi(i, j - 1, k)) / (2.0 * h),
                                    (phi(i, j, k + 1) - phi(i, j, k - 1)) / (2.0 * h),
                                ];
                                match b.kind {
                                    BumpKind::Curl { axis } => geom::cross(g, axis),
                                    _ => g,
                                }
                            }
                        };
                        for c in 0..arity {
                            field[idx * arity + c] += v[c];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, Shape};

    fn dom() -> Domain {
        build_domain(&Shape::unit_ball(), 1.0 / 16.0).unwrap()
    }

    #[test]
    fn zero_description_gives_zero_pair() {
        let s = rasterize_source(&SourceDesc::default(), &dom(), 1).unwrap();
        assert!(s.is_zero());
        assert!(s.voxels().is_empty());
    }

    #[test]
    fn peak_value_matches_amplitude() {
        let d = dom();
        let c = d.grid.point(d.grid.index(16, 17, 15));
        let desc = SourceDesc { f0: vec![Bump::gaussian(c, 2.5, 0.15)], f1: vec![] };
        let s = rasterize_source(&desc, &d, 1).unwrap();
        let m = s.f0.iter().cloned().fold(0.0, f64::max);
        assert!((m - 2.5).abs() < 1e-12);
    }

    #[test]
    fn linear_in_bumps() {
        let d = dom();
        let a = Bump::gaussian([0.1, 0.0, 0.0], 1.0, 0.1);
        let b = Bump::poly([-0.2, 0.1, 0.1], 0.5, 0.3, 3.0);
        let sa = rasterize_source(&SourceDesc { f0: vec![a], f1: vec![] }, &d, 1).unwrap();
        let sb = rasterize_source(&SourceDesc { f0: vec![b], f1: vec![] }, &d, 1).unwrap();
        let sab = rasterize_source(&SourceDesc { f0: vec![a, b], f1: vec![] }, &d, 1).unwrap();
        for i in 0..sab.f0.len() {
            assert!((sab.f0[i] - sa.f0[i] - sb.f0[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn standoff_violation_rejected() {
        let d = dom();
        let desc = SourceDesc { f0: vec![Bump::gaussian([0.5, 0.0, 0.0], 1.0, 0.12)], f1: vec![] };
        assert!(matches!(rasterize_source(&desc, &d, 1), Err(Error::Standoff(_))));
    }

    #[test]
    fn support_respects_mask_and_standoff() {
        let d = dom();
        let desc = SourceDesc {
            f0: vec![Bump::gaussian([0.2, 0.0, 0.1], 1.0, 0.15)],
            f1: vec![Bump::poly([-0.1, 0.2, 0.0], 1.0, 0.5, 2.0)],
        };
        let s = rasterize_source(&desc, &d, 1).unwrap();
        for i in 0..d.grid.len() {
            if !s.mask[i] {
                assert_eq!(s.f0[i], 0.0);
                assert_eq!(s.f1[i], 0.0);
            } else {
                assert!(d.shape.depth(d.grid.point(i)) >= d.standoff());
            }
        }
    }

    #[test]
    fn taper_is_smooth_and_matches_derivative() {
        let p = Profile::Gaussian { sigma: 0.2, cutoff: 4.0 };
        for &r in &[0.1, 0.5, 0.65, 0.7, 0.75, 0.79] {
            let e = 1e-6;
            let fd = (p.eval(r + e).0 - p.eval(r - e).0) / (2.0 * e);
            assert!((fd - p.eval(r).1).abs() < 1e-6, "r={r}");
        }
        assert_eq!(p.eval(0.8).0, 0.0);
    }

    #[test]
    fn curl_kind_is_discretely_divergence_free() {
        let d = dom();
        let b = Bump::gaussian([0.0, 0.1, 0.0], 1.0, 0.15).with_kind(BumpKind::Curl { axis: [0.3, 1.0, -0.5] });
        let s = rasterize_source(&SourceDesc { f0: vec![b], f1: vec![] }, &d, 3).unwrap();
        let g = &d.grid;
        let st = g.strides();
        let mut worst: f64 = 0.0;
        let scale = s.f0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 1..g.n[0] - 1 {
            for j in 1..g.n[1] - 1 {
                for k in 1..g.n[2] - 1 {
                    let idx = g.index(i, j, k);
                    let mut div = 0.0;
                    for a in 0..3 {
                        div += (s.f0[(idx + st[a]) * 3 + a] - s.f0[(idx - st[a]) * 3 + a]) / (2.0 * g.h);
                    }
                    worst = worst.max(div.abs());
                }
            }
        }
        assert!(worst < 1e-11 * scale / g.h);
    }
}
