//! Closed-form time traces for radially symmetric initial displacements.
//!
//! With U(0) = φ(|x − c|) and U_t(0) = 0 the wave equation gives
//! Ψ(r, t) = [(r + ct)φ(r + ct) + (r − ct)φ(r − ct)] / 2r, φ extended evenly.
//! Gradient bumps evolve as ∇Ψ at c_p and curl bumps as ∇Ψ × axis at c_s.
//!
//! Outside the support of a radial source the Helmholtz field is a point source,
//! u(x, ω) = F(ω) e^{iωr}/(4πr) with F(ω) = 4π∫ φ(ρ) ρ² j₀(ωρ) dρ.

use crate::domain::BoundaryMesh;
use crate::error::{invalid, Result};
use crate::functionals::Physics;
use crate::geom::{self, Vec3};
use crate::quadrature::gauss_legendre_unit;
use crate::source::{Bump, BumpKind, Profile, SourceDesc};
use crate::sweep::{FrequencyGrid, FrequencySweep, C64};
use crate::synthesis::TimeTrace;

fn even(p: &Profile, x: f64) -> (f64, f64) {
    let (v, d) = p.eval(x.abs());
    (v, if x < 0.0 { -d } else { d })
}

/// Ψ(r, t) and ∂Ψ/∂r.
pub fn radial_solution(p: &Profile, r: f64, ct: f64) -> (f64, f64) {
    if r < 1e-12 {
        let (v, d) = p.eval(ct);
        return (v + ct * d, 0.0);
    }
    let (a, b) = (r + ct, r - ct);
    let (fa, da) = even(p, a);
    let (fb, db) = even(p, b);
    let psi = (a * fa + b * fb) / (2.0 * r);
    let dpsi = ((fa + a * da) + (fb + b * db)) / (2.0 * r) - psi / r;
    (psi, dpsi)
}

fn bump_at(b: &Bump, x: Vec3, t: f64, physics: &Physics) -> Vec3 {
    let d = geom::sub(x, b.center);
    let r = geom::norm(d);
    let (cp, cs) = match physics {
        Physics::Scalar => (1.0, 1.0),
        Physics::Elastic(p) => (p.cp(), p.cs()),
    };
    let dir = |dr: f64| if r > 0.0 { geom::scale(d, b.amplitude * dr / r) } else { [0.0; 3] };
    match b.kind {
        BumpKind::Scalar => [b.amplitude * radial_solution(&b.profile, r, t).0, 0.0, 0.0],
        BumpKind::Gradient => dir(radial_solution(&b.profile, r, cp * t).1),
        BumpKind::Curl { axis } => geom::cross(dir(radial_solution(&b.profile, r, cs * t).1), axis),
        BumpKind::Vector { .. } => unreachable!(),
    }
}

/// Exact trace on `mesh` for sources this module can evolve in closed form.
pub fn exact_trace(desc: &SourceDesc, mesh: &BoundaryMesh, physics: &Physics, dt: f64, n_t: usize) -> Result<TimeTrace> {
    if !desc.f1.is_empty() {
        return invalid("closed-form traces need f1 = 0");
    }
    for b in &desc.f0 {
        let ok = match (physics, b.kind) {
            (Physics::Scalar, BumpKind::Scalar) => true,
            (Physics::Elastic(_), BumpKind::Gradient | BumpKind::Curl { .. }) => true,
            _ => false,
        };
        if !ok {
            return invalid(format!("no closed form for {:?} bumps under this physics", b.kind));
        }
    }
    let a = physics.arity();
    let mut tr = TimeTrace::zeros(mesh, a, dt, n_t);
    for (i, &x) in mesh.nodes.iter().enumerate() {
        for n in 0..n_t {
            let t = n as f64 * dt;
            let mut v = [0.0; 3];
            for b in &desc.f0 {
                v = geom::add(v, bump_at(b, x, t, physics));
            }
            let o = tr.offset(i, n);
            tr.values[o..o + a].copy_from_slice(&v[..a]);
        }
    }
    Ok(tr)
}

const RADIAL_NODES: usize = 256;

/// 4π∫ φ(ρ) ρ² j₀(ωρ) dρ. Polynomial profiles use ρ = w sin θ to absorb the edge singularity.
pub fn radial_transform(p: &Profile, omega: f64) -> Result<f64> {
    let (x, w) = gauss_legendre_unit(RADIAL_NODES)?;
    let j0 = |z: f64| if z.abs() < 1e-8 { 1.0 - z * z / 6.0 } else { z.sin() / z };
    let sum = match *p {
        Profile::Poly { width, power } => {
            let half = std::f64::consts::FRAC_PI_2;
            x.iter().zip(&w).map(|(&u, &wu)| {
                let th = u * half;
                let (s, c) = th.sin_cos();
                let rho = width * s;
                wu * half * c.powf(2.0 * power + 1.0) * width * rho * rho * j0(omega * rho)
            }).sum::<f64>()
        }
        Profile::Gaussian { .. } => {
            let r = p.support();
            x.iter().zip(&w).map(|(&u, &wu)| {
                let rho = u * r;
                wu * r * p.eval(rho).0 * rho * rho * j0(omega * rho)
            }).sum::<f64>()
        }
    };
    Ok(4.0 * std::f64::consts::PI * sum)
}

/// Sweep of radial bumps whose supports stay off the mesh, from the point-source identity.
/// Scalar physics takes scalar bumps; elastic physics takes gradient (P) and curl (S) bumps,
/// whose fields are ∇w and ∇w × axis with w = F(ω/c) G(r, ω/c) / c².
pub fn radial_sweep(desc: &SourceDesc, mesh: &BoundaryMesh, physics: &Physics, grid: &FrequencyGrid) -> Result<FrequencySweep> {
    physics.validate()?;
    let all: Vec<(&Bump, bool)> = desc.f0.iter().map(|b| (b, true)).chain(desc.f1.iter().map(|b| (b, false))).collect();
    for (b, _) in &all {
        let ok = match (physics, b.kind) {
            (Physics::Scalar, BumpKind::Scalar) => true,
            (Physics::Elastic(_), BumpKind::Gradient | BumpKind::Curl { .. }) => true,
            _ => false,
        };
        if !ok {
            return invalid(format!("no point-source identity for {:?} bumps under this physics", b.kind));
        }
        b.profile.validate()?;
        if mesh.nodes.iter().any(|&x| geom::dist(x, b.center) <= b.profile.support()) {
            return invalid("bump support reaches the boundary mesh");
        }
    }
    let speed = |b: &Bump| match (physics, b.kind) {
        (Physics::Elastic(p), BumpKind::Gradient) => p.cp(),
        (Physics::Elastic(p), _) => p.cs(),
        _ => 1.0,
    };
    let cols = grid.count + 1;
    let mut transforms = Vec::with_capacity(all.len());
    for (b, _) in &all {
        let c = speed(b);
        let f: Vec<f64> = (0..cols).map(|j| radial_transform(&b.profile, grid.omega(j) / c)).collect::<Result<_>>()?;
        transforms.push(f);
    }
    let arity = physics.arity();
    let mut sw = FrequencySweep::zeros(mesh, grid, arity, false);
    let zero = C64::new(0.0, 0.0);
    for (i, &x) in mesh.nodes.iter().enumerate() {
        for j in 0..cols {
            let w = grid.omega(j);
            let mut u = [zero; 3];
            for ((b, is_f0), f) in all.iter().zip(&transforms) {
                let c = speed(b);
                let k = w / c;
                let d = geom::sub(x, b.center);
                let r = geom::norm(d);
                let coef = if *is_f0 { C64::new(0.0, w) } else { C64::new(1.0, 0.0) } * b.amplitude * f[j] / (c * c);
                let g = C64::new(0.0, k * r).exp() / (4.0 * std::f64::consts::PI * r);
                match b.kind {
                    BumpKind::Scalar => u[0] += coef * g,
                    kind => {
                        let dg = g * (C64::new(0.0, k) - 1.0 / r) / r;
                        let grad = [dg * d[0], dg * d[1], dg * d[2]];
                        let v = match kind {
                            BumpKind::Curl { axis } => [
                                grad[1] * axis[2] - grad[2] * axis[1],
                                grad[2] * axis[0] - grad[0] * axis[2],
                                grad[0] * axis[1] - grad[1] * axis[0],
                            ],
                            _ => grad,
                        };
                        for a in 0..3 {
                            u[a] += coef * v[a];
                        }
                    }
                }
            }
            let o = sw.offset(i, j);
            sw.values[o..o + arity].copy_from_slice(&u[..arity]);
        }
    }
    Ok(sw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn satisfies_the_radial_wave_equation() {
        let p = Profile::Gaussian { sigma: 0.2, cutoff: 4.0 };
        let (r, t, e) = (0.5, 0.3, 1e-3);
        let psi = |r: f64, t: f64| radial_solution(&p, r, t).0;
        let rpsi = |r: f64, t: f64| r * psi(r, t);
        let tt = (rpsi(r, t + e) - 2.0 * rpsi(r, t) + rpsi(r, t - e)) / (e * e);
        let rr = (rpsi(r + e, t) - 2.0 * rpsi(r, t) + rpsi(r - e, t)) / (e * e);
        assert!((tt - rr).abs() < 1e-4 * tt.abs().max(1.0));
        assert!((psi(r, 0.0) - p.eval(r).0).abs() < 1e-14);
        let e = 1e-5;
        let d = (psi(r + e, t) - psi(r - e, t)) / (2.0 * e);
        assert!((d - radial_solution(&p, r, t).1).abs() < 1e-5, "{d} {:?}", radial_solution(&p, r, t));
    }

    #[test]
    fn radial_transform_of_a_gaussian() {
        // untapered: (2π)^{3/2} σ³ e^{−σ²ω²/2}
        let sigma = 0.1;
        let p = Profile::Gaussian { sigma, cutoff: 8.0 };
        for w in [0.0, 5.0, 20.0] {
            let expect = (2.0 * std::f64::consts::PI).powf(1.5) * sigma.powi(3) * (-sigma * sigma * w * w / 2.0).exp();
            let got = radial_transform(&p, w).unwrap();
            assert!((got - expect).abs() < 1e-8 * expect.max(1e-3), "{got} {expect}");
        }
        // (1 − ρ²)^1: 4π ∫(1−ρ²)ρ² = 8π/15 at ω = 0
        let q = Profile::Poly { width: 1.0, power: 1.0 };
        assert!((radial_transform(&q, 0.0).unwrap() - 8.0 * std::f64::consts::PI / 15.0).abs() < 1e-12);
    }

    #[test]
    fn radial_sweep_matches_volume_quadrature() {
        use crate::domain::build_domain;
        use crate::source::rasterize_source;
        let domain = build_domain(&crate::domain::Shape::unit_ball(), 1.0 / 24.0).unwrap();
        let mesh = BoundaryMesh::sphere([0.0; 3], 1.0, 24);
        let desc = SourceDesc { f0: vec![Bump::gaussian([0.1, 0.0, 0.0], 1.0, 0.15)], f1: vec![Bump::gaussian([-0.1, 0.05, 0.0], 0.5, 0.15)] };
        let grid = FrequencyGrid::new(1.0, 6).unwrap();
        let exact = radial_sweep(&desc, &mesh, &Physics::Scalar, &grid).unwrap();
        let src = rasterize_source(&desc, &domain, 1).unwrap();
        let quad = crate::helmholtz::forward_sweep(&src, &mesh, &grid);
        assert!(rel(&exact, &quad) < 1e-3, "{}", rel(&exact, &quad));
    }

    fn rel(a: &FrequencySweep, b: &FrequencySweep) -> f64 {
        let num: f64 = a.values.iter().zip(&b.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = a.values.iter().map(|a| a.norm_sqr()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn elastic_radial_sweep_matches_volume_quadrature() {
        use crate::domain::build_domain;
        use crate::elastic::{forward_sweep_elastic, ElasticParams};
        use crate::source::rasterize_source;
        let p = ElasticParams::new(1.0, 1.0, 1.0).unwrap();
        let domain = build_domain(&crate::domain::Shape::unit_ball(), 1.0 / 20.0).unwrap();
        let mesh = BoundaryMesh::sphere([0.0; 3], 1.0, 12);
        let desc = SourceDesc {
            f0: vec![Bump::gaussian([0.05, 0.0, 0.0], 1.0, 0.18).with_kind(BumpKind::Gradient)],
            f1: vec![Bump::gaussian([0.0, -0.05, 0.0], 1.0, 0.18).with_kind(BumpKind::Curl { axis: [0.0, 0.0, 1.0] })],
        };
        let grid = FrequencyGrid::new(1.5, 3).unwrap();
        let exact = radial_sweep(&desc, &mesh, &Physics::Elastic(p), &grid).unwrap();
        let src = rasterize_source(&desc, &domain, 3).unwrap();
        let quad = forward_sweep_elastic(&src, &mesh, &grid, &p).unwrap();
        assert!(rel(&exact, &quad) < 1e-2, "{}", rel(&exact, &quad));
    }

    #[test]
    fn rejects_unsupported_sources() {
        let mesh = BoundaryMesh::sphere([0.0; 3], 1.0, 8);
        let desc = SourceDesc { f0: vec![Bump::gaussian([0.0; 3], 1.0, 0.2).with_kind(BumpKind::Gradient)], f1: vec![] };
        assert!(exact_trace(&desc, &mesh, &Physics::Scalar, 0.1, 3).is_err());
    }
}
