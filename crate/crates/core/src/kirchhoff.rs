//! Pointwise elastodynamic solution from the retarded volume potential
//!
//! V(F)(x,t) = (c_p² − c_s²)⁻¹ [ (c_p − c_s)/c_s ∫_{|x−y|<c_s t} F + ∫_{c_s t<|x−y|<c_p t} (c_p t − |x−y|)/|x−y| F ].
//!
//! With LF = −c_p²ΔF + (c_p² − c_s²)∇div F and U(0) = f₀, U_t(0) = −f₁,
//! U = (4πc_p)⁻¹ [ −V(Lf₁) − ∂ₜ²V(f₁) + ∂ₜV(Lf₀) + ∂ₜ³V(f₀) ].

use crate::elastic::ElasticParams;
use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::quadrature::gauss_legendre_unit;
use crate::source::{Bump, SourceDesc};

#[derive(Clone, Copy, Debug)]
pub struct KirchhoffQuad {
    /// Gauss points per radial piece.
    pub radial: usize,
    /// Gauss points in cos θ over the spherical cap.
    pub polar: usize,
    /// Trapezoid points in azimuth.
    pub azimuth: usize,
    /// Time step of the centered differences in t.
    pub dt: f64,
    /// Spatial step of the differences for L, relative to the bump support.
    pub dx_rel: f64,
}

impl Default for KirchhoffQuad {
    fn default() -> Self {
        KirchhoffQuad { radial: 40, polar: 24, azimuth: 32, dt: 5e-3, dx_rel: 2.5e-4 }
    }
}

struct Rules {
    radial: (Vec<f64>, Vec<f64>),
    polar: (Vec<f64>, Vec<f64>),
}

fn rules(q: &KirchhoffQuad) -> Result<Rules> {
    Ok(Rules { radial: gauss_legendre_unit(q.radial)?, polar: gauss_legendre_unit(q.polar)? })
}

/// L applied to one bump by centered differences of its pointwise value.
fn l_bump(b: &Bump, y: Vec3, e: f64, p: &ElasticParams) -> Vec3 {
    let f = |d: Vec3| b.value(geom::add(y, d));
    let f0 = f([0.0; 3]);
    let unit = |a: usize, s: f64| {
        let mut v = [0.0; 3];
        v[a] = s;
        v
    };
    // hess[a][i][j] = ∂_i∂_j F_a
    let mut hess = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        let (fp, fm) = (f(unit(i, e)), f(unit(i, -e)));
        for a in 0..3 {
            hess[a][i][i] = (fp[a] - 2.0 * f0[a] + fm[a]) / (e * e);
        }
        for j in i + 1..3 {
            let pp = f(geom::add(unit(i, e), unit(j, e)));
            let pm = f(geom::add(unit(i, e), unit(j, -e)));
            let mp = f(geom::add(unit(i, -e), unit(j, e)));
            let mm = f(geom::add(unit(i, -e), unit(j, -e)));
            for a in 0..3 {
                let v = (pp[a] - pm[a] - mp[a] + mm[a]) / (4.0 * e * e);
                hess[a][i][j] = v;
                hess[a][j][i] = v;
            }
        }
    }
    let (cp2, g) = (p.cp().powi(2), p.cp().powi(2) - p.cs().powi(2));
    let mut out = [0.0; 3];
    for (a, o) in out.iter_mut().enumerate() {
        let lap = hess[a][0][0] + hess[a][1][1] + hess[a][2][2];
        let grad_div = (0..3).map(|c| hess[c][a][c]).sum::<f64>();
        *o = -cp2 * lap + g * grad_div;
    }
    out
}

/// V applied to one bump (or to L of it).
fn v_bump(b: &Bump, apply_l: bool, x: Vec3, t: f64, p: &ElasticParams, q: &KirchhoffQuad, r: &Rules) -> Vec3 {
    if t <= 0.0 {
        return [0.0; 3];
    }
    let (cp, cs) = (p.cp(), p.cs());
    let support = b.profile.support();
    let e = q.dx_rel * support;
    let reach = support + if apply_l { 2.0 * e } else { 0.0 };
    let to_c = geom::sub(b.center, x);
    let d = geom::norm(to_c);
    let lo = (d - reach).max(0.0);
    let hi = (d + reach).min(cp * t);
    if hi <= lo {
        return [0.0; 3];
    }
    let pole = if d > 1e-12 { geom::scale(to_c, 1.0 / d) } else { [0.0, 0.0, 1.0] };
    let [t1, t2] = geom::tangent_frame(pole);
    let weight = |rho: f64| if rho < cs * t { (cp - cs) / cs } else { (cp * t - rho) / rho };
    let mut pieces = vec![lo];
    if cs * t > lo && cs * t < hi {
        pieces.push(cs * t);
    }
    pieces.push(hi);
    let value = |y: Vec3| if apply_l { l_bump(b, y, e, p) } else { b.value(y) };
    let mut acc = [0.0; 3];
    let nphi = q.azimuth;
    let (cphi, sphi): (Vec<f64>, Vec<f64>) = (0..nphi).map(|k| (std::f64::consts::TAU * k as f64 / nphi as f64).sin_cos()).map(|(s, c)| (c, s)).unzip();
    for w in pieces.windows(2) {
        let (a, bnd) = (w[0], w[1]);
        for (&u, &wu) in r.radial.0.iter().zip(&r.radial.1) {
            let rho = a + (bnd - a) * u;
            if rho <= 0.0 {
                continue;
            }
            let mu_min = if d > 1e-12 { ((rho * rho + d * d - reach * reach) / (2.0 * rho * d)).clamp(-1.0, 1.0) } else { -1.0 };
            if mu_min >= 1.0 {
                continue;
            }
            let mut shell = [0.0; 3];
            for (&v, &wv) in r.polar.0.iter().zip(&r.polar.1) {
                let mu = mu_min + (1.0 - mu_min) * v;
                let s = (1.0 - mu * mu).max(0.0).sqrt();
                let mut ring = [0.0; 3];
                for k in 0..nphi {
                    let dir = geom::add(geom::scale(pole, mu), geom::add(geom::scale(t1, s * cphi[k]), geom::scale(t2, s * sphi[k])));
                    ring = geom::add(ring, value(geom::add(x, geom::scale(dir, rho))));
                }
                shell = geom::add(shell, geom::scale(ring, wv * (1.0 - mu_min) * std::f64::consts::TAU / nphi as f64));
            }
            acc = geom::add(acc, geom::scale(shell, wu * (bnd - a) * rho * rho * weight(rho)));
        }
    }
    geom::scale(acc, 1.0 / (cp * cp - cs * cs))
}

/// V(F)(x, t) for F a sum of bumps (optionally with L applied first).
pub fn kirchhoff_v(bumps: &[Bump], apply_l: bool, x: Vec3, t: f64, p: &ElasticParams, q: &KirchhoffQuad) -> Result<Vec3> {
    p.validate()?;
    let r = rules(q)?;
    Ok(bumps.iter().fold([0.0; 3], |s, b| geom::add(s, v_bump(b, apply_l, x, t, p, q, &r))))
}

/// U(x, t) assembled from V with centered differences in t.
pub fn kirchhoff_eval(desc: &SourceDesc, x: Vec3, t: f64, p: &ElasticParams) -> Result<Vec3> {
    kirchhoff_eval_with(desc, x, t, p, &KirchhoffQuad::default())
}

pub fn kirchhoff_eval_with(desc: &SourceDesc, x: Vec3, t: f64, p: &ElasticParams, q: &KirchhoffQuad) -> Result<Vec3> {
    p.validate()?;
    if desc.smoothness() < 3 {
        return Err(Error::NotSmooth("the integral representation needs three continuous derivatives".into()));
    }
    if t < 0.0 {
        return Ok([0.0; 3]);
    }
    let r = rules(q)?;
    let v = |bumps: &[Bump], l: bool, s: f64| bumps.iter().fold([0.0; 3], |acc, b| geom::add(acc, v_bump(b, l, x, s, p, q, &r)));
    let h = q.dt;
    let mut u = [0.0; 3];
    let mut add = |w: f64, f: Vec3| u = geom::add(u, geom::scale(f, w));
    if !desc.f0.is_empty() {
        let f = |s: f64| v(&desc.f0, false, t + s * h);
        let (p2, p1, m1, m2) = (f(2.0), f(1.0), f(-1.0), f(-2.0));
        let d3 = geom::scale(geom::add(geom::sub(p2, geom::scale(p1, 2.0)), geom::sub(geom::scale(m1, 2.0), m2)), 0.5 / (h * h * h));
        add(1.0, d3);
        let l = |s: f64| v(&desc.f0, true, t + s * h);
        add(1.0, geom::scale(geom::sub(l(1.0), l(-1.0)), 0.5 / h));
    }
    if !desc.f1.is_empty() {
        let f = |s: f64| v(&desc.f1, false, t + s * h);
        let d2 = geom::scale(geom::add(geom::sub(f(1.0), geom::scale(f(0.0), 2.0)), f(-1.0)), 1.0 / (h * h));
        add(-1.0, d2);
        add(-1.0, v(&desc.f1, true, t));
    }
    Ok(geom::scale(u, 1.0 / (4.0 * std::f64::consts::PI * p.cp())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::BumpKind;

    fn params() -> ElasticParams {
        ElasticParams::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn vanishes_at_time_zero_and_for_zero_data() {
        let b = Bump::gaussian([0.0; 3], 1.0, 0.2).with_kind(BumpKind::Vector { dir: [1.0, 0.0, 0.0] });
        let q = KirchhoffQuad::default();
        assert_eq!(kirchhoff_v(&[b], false, [0.1, 0.0, 0.0], 0.0, &params(), &q).unwrap(), [0.0; 3]);
        let z = SourceDesc::default();
        assert_eq!(kirchhoff_eval(&z, [0.3, 0.0, 0.0], 0.5, &params()).unwrap(), [0.0; 3]);
    }

    #[test]
    fn small_time_cubic_growth() {
        // V(F)(x, t) ≈ 4πc_p t³ F(x) / 6 for small t
        let b = Bump::gaussian([0.0; 3], 1.0, 0.3).with_kind(BumpKind::Vector { dir: [0.0, 1.0, 0.0] });
        let p = params();
        let t = 2e-3;
        let x = [0.05, 0.0, 0.0];
        let v = kirchhoff_v(&[b], false, x, t, &p, &KirchhoffQuad::default()).unwrap();
        let expect = 4.0 * std::f64::consts::PI * p.cp() * t.powi(3) / 6.0 * b.value(x)[1];
        assert!((v[1] - expect).abs() < 1e-3 * expect.abs(), "{} {}", v[1], expect);
    }

    #[test]
    fn initial_value_is_recovered() {
        let desc = SourceDesc { f0: vec![Bump::gaussian([0.0; 3], 1.0, 0.25).with_kind(BumpKind::Vector { dir: [1.0, 0.0, 0.0] })], f1: vec![] };
        let x = [0.1, 0.05, 0.0];
        let u = kirchhoff_eval(&desc, x, 0.02, &params()).unwrap();
        let f = desc.value(x).0;
        assert!(geom::dist(u, f) < 2e-2 * geom::norm(f), "{u:?} {f:?}");
    }

    #[test]
    fn outside_the_cone_is_zero() {
        let desc = SourceDesc { f0: vec![Bump::gaussian([0.0; 3], 1.0, 0.2).with_kind(BumpKind::Gradient)], f1: vec![] };
        let u = kirchhoff_eval(&desc, [2.0, 0.0, 0.0], 0.4, &params()).unwrap();
        assert_eq!(u, [0.0; 3]);
    }

    #[test]
    fn rejects_rough_sources() {
        let desc = SourceDesc { f0: vec![Bump::poly([0.0; 3], 1.0, 0.5, 2.0)], f1: vec![] };
        assert!(kirchhoff_eval(&desc, [0.0; 3], 0.1, &params()).is_err());
    }
}
