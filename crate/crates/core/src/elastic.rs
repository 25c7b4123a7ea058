//! Radiating Lamé field through the fundamental matrix
//! Φ = e^{iκ_s r}/(4πc_s² r)·I + ∇∇g, with g = [e^{iκ_s r} − e^{iκ_p r} − ik(c_s⁻¹ − c_p⁻¹)r]/(4πk²r)
//! and κ = k/c. The regularized form is entire in k; small |k|r uses its power series.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::BoundaryMesh;
use crate::error::{invalid, Error, Result};
use crate::geom::{self, Vec3};
use crate::source::SourcePair;
use crate::sweep::{FrequencyGrid, FrequencySweep, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// |k|r/c_s below which the series branch is used.
pub const THETA_SWITCH: f64 = 1e-2;
const SERIES_TOL: f64 = 1e-18;
const SERIES_MAX: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
}

impl ElasticParams {
    pub fn new(lambda: f64, mu: f64, rho: f64) -> Result<Self> {
        let p = ElasticParams { lambda, mu, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.lambda + self.mu > 0.0 && self.rho > 0.0) {
            return invalid(format!(
                "Lamé parameters need μ > 0, λ + μ > 0, ρ > 0 (got λ={}, μ={}, ρ={})",
                self.lambda, self.mu, self.rho
            ));
        }
        Ok(())
    }

    pub fn cp(&self) -> f64 {
        ((self.lambda + 2.0 * self.mu) / self.rho).sqrt()
    }

    pub fn cs(&self) -> f64 {
        (self.mu / self.rho).sqrt()
    }

    fn speeds(&self) -> Speeds {
        Speeds { cs: self.cs(), cp: self.cp() }
    }
}

/// Wave speeds only; lets the bracket be probed with arbitrary (even equal) speeds.
#[derive(Clone, Copy, Debug)]
pub struct Speeds {
    pub cs: f64,
    pub cp: f64,
}

impl Speeds {
    fn a(&self, m: i32) -> f64 {
        self.cs.powi(-m) - self.cp.powi(-m)
    }
}

/// [e^{ikr/c_s} − e^{ikr/c_p} − ik(c_s⁻¹ − c_p⁻¹)r] / k².
pub fn phi_regularized_bracket(r: f64, k: C64, sp: Speeds) -> Result<C64> {
    if !(r > 0.0) {
        return invalid(format!("bracket needs r > 0, got {r}"));
    }
    if k.norm() * r / sp.cs < THETA_SWITCH {
        // Σ_{m≥2} i^m k^{m−2} a_m r^m / m!
        let mut sum = ZERO;
        let mut pow = C64::new(-r * r / 2.0, 0.0); // i² r² / 2!
        for m in 2..SERIES_MAX as i32 {
            let term = pow * sp.a(m);
            sum += term;
            if term.norm() <= SERIES_TOL * sum.norm() {
                break;
            }
            pow *= I * k * r / (m + 1) as f64;
        }
        return Ok(sum);
    }
    let es = (I * k * r / sp.cs).exp();
    let ep = (I * k * r / sp.cp).exp();
    Ok((es - ep - I * k * sp.a(1) * r) / (k * k))
}

/// n-th r-derivative of e^{iκr}/(4πr) for n = 0..=3 given the phase e^{iκr}.
fn spherical_derivs(r: f64, kappa: C64, phase: C64) -> [C64; 4] {
    let ik = I * kappa;
    let inv = 1.0 / r;
    let base = phase / (4.0 * PI);
    // d^n/dr^n [e^{iκr} r⁻¹] = e^{iκr} Σ_j C(n,j)(iκ)^{n−j}(−1)^j j!/r^{j+1}
    let p1 = inv;
    let p2 = inv * inv;
    let p3 = p2 * inv;
    let p4 = p3 * inv;
    [
        base * p1,
        base * (ik * p1 - p2),
        base * (ik * ik * p1 - 2.0 * ik * p2 + 2.0 * p3),
        base * (ik * ik * ik * p1 - 3.0 * ik * ik * p2 + 6.0 * ik * p3 - 6.0 * p4),
    ]
}

/// g, g′, g″, g‴ of the scalar potential g(r) = bracket/(4πr).
pub fn radial_derivs(r: f64, k: C64, sp: Speeds) -> [C64; 4] {
    if k.norm() * r / sp.cs < THETA_SWITCH {
        return series_derivs(r, k, sp);
    }
    let es = (I * k * r / sp.cs).exp();
    let ep = (I * k * r / sp.cp).exp();
    direct_derivs(r, k, sp, es, ep)
}

fn direct_derivs(r: f64, k: C64, sp: Speeds, es: C64, ep: C64) -> [C64; 4] {
    let s = spherical_derivs(r, k / sp.cs, es);
    let p = spherical_derivs(r, k / sp.cp, ep);
    let k2 = k * k;
    [
        (s[0] - p[0]) / k2 - I * sp.a(1) / (4.0 * PI * k),
        (s[1] - p[1]) / k2,
        (s[2] - p[2]) / k2,
        (s[3] - p[3]) / k2,
    ]
}

fn series_derivs(r: f64, k: C64, sp: Speeds) -> [C64; 4] {
    // g = (1/4π) Σ_{m≥2} c_m r^{m−1}, c_m = i^m k^{m−2} a_m / m!
    let mut out = [ZERO; 4];
    let mut c = C64::new(-0.5, 0.0); // i²/2!
    for m in 2..SERIES_MAX {
        let cm = c * sp.a(m as i32);
        let p = (m - 1) as i32;
        let mut fall = 1.0;
        let mut largest = 0.0f64;
        for (n, o) in out.iter_mut().enumerate() {
            if n as i32 > p {
                break;
            }
            let t = cm * fall * r.powi(p - n as i32);
            *o += t;
            largest = largest.max(t.norm() / o.norm().max(f64::MIN_POSITIVE));
            fall *= (p - n as i32) as f64;
        }
        if m > 4 && largest <= SERIES_TOL {
            break;
        }
        c *= I * k / (m + 1) as f64;
    }
    out.map(|v| v / (4.0 * PI))
}

type Mat3 = [[C64; 3]; 3];

/// Φ and optionally ∂_lΦ (indexed `[l][j][m]`) from radial data.
fn kernel_parts(d: Vec3, r: f64, k: C64, sp: Speeds, g: [C64; 4], gs: [C64; 2], want_grad: bool) -> (Mat3, Option<[Mat3; 3]>) {
    let xh = geom::scale(d, 1.0 / r);
    let cs2 = sp.cs * sp.cs;
    let a = g[2] - g[1] / r;
    let b = g[1] / r;
    let diag = gs[0] / cs2 + b;
    let mut phi = [[ZERO; 3]; 3];
    for j in 0..3 {
        for m in 0..3 {
            phi[j][m] = a * (xh[j] * xh[m]);
            if j == m {
                phi[j][m] += diag;
            }
        }
    }
    if !want_grad {
        return (phi, None);
    }
    let _ = k;
    let ap = g[3] - g[2] / r + g[1] / (r * r);
    let c3 = ap - 2.0 * a / r;
    let ar = a / r;
    let gsp = gs[1] / cs2;
    let mut grad = [[[ZERO; 3]; 3]; 3];
    for l in 0..3 {
        for j in 0..3 {
            for m in 0..3 {
                let mut v = c3 * (xh[l] * xh[j] * xh[m]);
                let mut w = 0.0;
                if l == j {
                    w += xh[m];
                }
                if l == m {
                    w += xh[j];
                }
                if j == m {
                    w += xh[l];
                    v += gsp * xh[l];
                }
                grad[l][j][m] = v + ar * w;
            }
        }
    }
    (phi, Some(grad))
}

fn shear_green(r: f64, k: C64, cs: f64) -> [C64; 2] {
    let kap = k / cs;
    let e = (I * kap * r).exp() / (4.0 * PI * r);
    [e, e * (I * kap - 1.0 / r)]
}

/// The 3×3 fundamental matrix Φ(x − y; k).
pub fn phi_matrix(d: Vec3, k: C64, p: &ElasticParams) -> Result<Mat3> {
    let r = geom::norm(d);
    if !(r > 0.0) {
        return invalid("Φ needs x ≠ y");
    }
    let sp = p.speeds();
    Ok(kernel_parts(d, r, k, sp, radial_derivs(r, k, sp), shear_green(r, k, sp.cs), false).0)
}

/// ∂_l Φ_jm(x − y; k) as `[l][j][m]`.
pub fn phi_gradient(d: Vec3, k: C64, p: &ElasticParams) -> Result<[Mat3; 3]> {
    let r = geom::norm(d);
    if !(r > 0.0) {
        return invalid("Φ needs x ≠ y");
    }
    let sp = p.speeds();
    Ok(kernel_parts(d, r, k, sp, radial_derivs(r, k, sp), shear_green(r, k, sp.cs), true).1.unwrap())
}

/// k → 0 limit of Φ: I/(4πc_s² r) − (c_s⁻² − c_p⁻²)/(8π)·(δ/r − x xᵀ/r³).
pub fn phi_static(d: Vec3, p: &ElasticParams) -> Mat3 {
    let r = geom::norm(d);
    let sp = p.speeds();
    let a2 = sp.a(2);
    let mut m = [[ZERO; 3]; 3];
    for j in 0..3 {
        for l in 0..3 {
            let delta = if j == l { 1.0 } else { 0.0 };
            let v = -a2 / (8.0 * PI) * (delta / r - d[j] * d[l] / (r * r * r)) + delta / (4.0 * PI * sp.cs * sp.cs * r);
            m[j][l] = C64::new(v, 0.0);
        }
    }
    m
}

fn check_arity(src: &SourcePair) -> Result<()> {
    if src.arity != 3 {
        return Err(Error::Mismatch(format!("elastic source needs 3 components, got {}", src.arity)));
    }
    Ok(())
}

/// u(x, k) = ∫ Φ(x − y; k)(f₁ + ik f₀) dy and, optionally, its gradient `[l][j]`.
pub fn field_and_gradient_elastic(
    src: &SourcePair,
    x: Vec3,
    k: C64,
    p: &ElasticParams,
    want_grad: bool,
) -> Result<([C64; 3], Option<[[C64; 3]; 3]>)> {
    check_arity(src)?;
    let sp = p.speeds();
    let vol = src.grid.cell_volume();
    let mut u = [ZERO; 3];
    let mut gu = [[ZERO; 3]; 3];
    for v in src.voxels() {
        let d = geom::sub(x, v.pos);
        let r = geom::norm(d);
        if !(r > 0.0) {
            return Err(Error::Standoff("evaluation point on a source voxel".into()));
        }
        let q: [C64; 3] = std::array::from_fn(|m| (C64::new(v.f1[m], 0.0) + I * k * v.f0[m]) * vol);
        let (phi, grad) = kernel_parts(d, r, k, sp, radial_derivs(r, k, sp), shear_green(r, k, sp.cs), want_grad);
        for j in 0..3 {
            for m in 0..3 {
                u[j] += phi[j][m] * q[m];
            }
        }
        if let Some(g) = grad {
            for l in 0..3 {
                for j in 0..3 {
                    for m in 0..3 {
                        gu[l][j] += g[l][j][m] * q[m];
                    }
                }
            }
        }
    }
    Ok((u, if want_grad { Some(gu) } else { None }))
}

pub fn forward_field_elastic(src: &SourcePair, x: Vec3, k: C64, p: &ElasticParams) -> Result<[C64; 3]> {
    Ok(field_and_gradient_elastic(src, x, k, p, false)?.0)
}

/// ∇div of an interleaved 3-vector field by fourth-order centered differences.
pub fn grad_div(grid: &crate::domain::Grid3, f: &[f64]) -> Vec<f64> {
    let st = grid.strides();
    let n = grid.n;
    let h = grid.h;
    let at = |idx: usize, ijk: [usize; 3], a: usize, o: i64, c: usize| -> f64 {
        let t = ijk[a] as i64 + o;
        if t < 0 || t >= n[a] as i64 {
            return 0.0;
        }
        f[((idx as i64 + o * st[a] as i64) as usize) * 3 + c]
    };
    let d1 = |idx: usize, ijk: [usize; 3], a: usize, c: usize| -> f64 {
        (8.0 * (at(idx, ijk, a, 1, c) - at(idx, ijk, a, -1, c)) - (at(idx, ijk, a, 2, c) - at(idx, ijk, a, -2, c))) / (12.0 * h)
    };
    // first derivatives ∂_a f_c
    let mut der = vec![0.0; grid.len() * 9];
    for idx in 0..grid.len() {
        let ijk = grid.ijk(idx);
        for a in 0..3 {
            for c in 0..3 {
                der[idx * 9 + a * 3 + c] = d1(idx, ijk, a, c);
            }
        }
    }
    let mut out = vec![0.0; grid.len() * 3];
    for idx in 0..grid.len() {
        let ijk = grid.ijk(idx);
        for b in 0..3 {
            let mut s = 0.0;
            for c in 0..3 {
                if c == b {
                    // pure second derivative with the compact five-point rule
                    let v = |o| at(idx, ijk, b, o, b);
                    s += (-v(2) + 16.0 * v(1) - 30.0 * v(0) + 16.0 * v(-1) - v(-2)) / (12.0 * h * h);
                } else {
                    let dv = |o: i64| {
                        let t = ijk[b] as i64 + o;
                        if t < 0 || t >= n[b] as i64 {
                            0.0
                        } else {
                            der[((idx as i64 + o * st[b] as i64) as usize) * 9 + c * 3 + c]
                        }
                    };
                    s += (8.0 * (dv(1) - dv(-1)) - (dv(2) - dv(-2))) / (12.0 * h);
                }
            }
            out[idx * 3 + b] = s;
        }
    }
    out
}

/// u(x, k) = ∫ G_s/c_s²·v dy + ∫ g(|x − y|)∇div v dy with v = f₁ + ik f₀ (integration by parts form).
pub fn forward_field_elastic_ibp(src: &SourcePair, x: Vec3, k: C64, p: &ElasticParams) -> Result<[C64; 3]> {
    check_arity(src)?;
    if src.smoothness < 2 {
        return Err(Error::NotSmooth(format!("needs two derivatives, source has {}", src.smoothness)));
    }
    let sp = p.speeds();
    let cs2 = sp.cs * sp.cs;
    let gd0 = grad_div(&src.grid, &src.f0);
    let gd1 = grad_div(&src.grid, &src.f1);
    let vol = src.grid.cell_volume();
    let mut u = [ZERO; 3];
    for idx in 0..src.grid.len() {
        let f0 = &src.f0[idx * 3..idx * 3 + 3];
        let f1 = &src.f1[idx * 3..idx * 3 + 3];
        let g0 = &gd0[idx * 3..idx * 3 + 3];
        let g1 = &gd1[idx * 3..idx * 3 + 3];
        if f0.iter().chain(f1).chain(g0).chain(g1).all(|v| *v == 0.0) {
            continue;
        }
        let d = geom::sub(x, src.grid.point(idx));
        let r = geom::norm(d);
        if !(r > 0.0) {
            return Err(Error::Standoff("evaluation point on a source voxel".into()));
        }
        let gs = shear_green(r, k, sp.cs)[0] / cs2 * vol;
        let g = radial_derivs(r, k, sp)[0] * vol;
        for c in 0..3 {
            u[c] += gs * (C64::new(f1[c], 0.0) + I * k * f0[c]) + g * (C64::new(g1[c], 0.0) + I * k * g0[c]);
        }
    }
    Ok(u)
}

/// Elastic sweep with 3-vector entries, optional tangential gradients.
pub fn forward_sweep_elastic(src: &SourcePair, mesh: &BoundaryMesh, grid: &FrequencyGrid, p: &ElasticParams) -> Result<FrequencySweep> {
    forward_sweep_elastic_with(src, mesh, grid, p, false)
}

pub fn forward_sweep_elastic_with(
    src: &SourcePair,
    mesh: &BoundaryMesh,
    grid: &FrequencyGrid,
    p: &ElasticParams,
    gradients: bool,
) -> Result<FrequencySweep> {
    check_arity(src)?;
    p.validate()?;
    let sp = p.speeds();
    let voxels = src.voxels();
    let vol = src.grid.cell_volume();
    let cols = grid.count + 1;
    let dw = grid.d_omega;
    let per_node: Vec<Result<(Vec<C64>, Vec<C64>)>> = (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            let x = mesh.nodes[i];
            let tans = mesh.tangents[i];
            let mut u = vec![ZERO; cols * 3];
            let mut tg = if gradients { vec![ZERO; cols * 6] } else { Vec::new() };
            for v in &voxels {
                let d = geom::sub(x, v.pos);
                let r = geom::norm(d);
                if !(r > 0.0) {
                    return Err(Error::Standoff("mesh node on a source voxel".into()));
                }
                let step_s = C64::from_polar(1.0, dw * r / sp.cs);
                let step_p = C64::from_polar(1.0, dw * r / sp.cp);
                let (mut es, mut ep) = (C64::new(1.0, 0.0), C64::new(1.0, 0.0));
                for j in 0..cols {
                    let om = grid.omega(j);
                    if j > 0 {
                        if j % 32 == 0 {
                            es = C64::from_polar(1.0, om * r / sp.cs);
                            ep = C64::from_polar(1.0, om * r / sp.cp);
                        } else {
                            es *= step_s;
                            ep *= step_p;
                        }
                    }
                    let k = C64::new(om, 0.0);
                    let (phi, grad) = if j == 0 {
                        let phi = phi_static(d, p);
                        let grad = if gradients {
                            let sd = series_derivs(r, ZERO, sp);
                            kernel_parts(d, r, ZERO, sp, sd, shear_green(r, ZERO, sp.cs), true).1
                        } else {
                            None
                        };
                        (phi, grad)
                    } else {
                        let g = if om * r / sp.cs < THETA_SWITCH { series_derivs(r, k, sp) } else { direct_derivs(r, k, sp, es, ep) };
                        let e = es / (4.0 * PI * r);
                        let gs = [e, e * C64::new(-1.0 / r, om / sp.cs)];
                        kernel_parts(d, r, k, sp, g, gs, gradients)
                    };
                    let q: [C64; 3] = std::array::from_fn(|m| C64::new(v.f1[m] * vol, om * v.f0[m] * vol));
                    for a in 0..3 {
                        let mut s = ZERO;
                        for m in 0..3 {
                            s += phi[a][m] * q[m];
                        }
                        u[j * 3 + a] += s;
                    }
                    if let Some(g) = grad {
                        for a in 0..3 {
                            for (t, tv) in tans.iter().enumerate() {
                                let mut s = ZERO;
                                for l in 0..3 {
                                    for m in 0..3 {
                                        s += g[l][a][m] * q[m] * tv[l];
                                    }
                                }
                                tg[(j * 3 + a) * 2 + t] += s;
                            }
                        }
                    }
                }
            }
            Ok((u, tg))
        })
        .collect();
    let mut out = FrequencySweep::zeros(mesh, grid, 3, gradients);
    for (i, res) in per_node.into_iter().enumerate() {
        let (u, tg) = res?;
        let o = out.offset(i, 0);
        out.values[o..o + 3 * cols].copy_from_slice(&u);
        if let Some(t) = &mut out.tangential {
            t[2 * o..2 * o + 6 * cols].copy_from_slice(&tg);
        }
    }
    Ok(out)
}

/// Values (3 per node) and tangential gradients (6 per node) at one complex k.
pub fn boundary_values_elastic(
    src: &SourcePair,
    mesh: &BoundaryMesh,
    k: C64,
    p: &ElasticParams,
    gradients: bool,
) -> Result<(Vec<C64>, Vec<C64>)> {
    let res: Vec<Result<([C64; 3], [C64; 6])>> = (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            let (u, g) = field_and_gradient_elastic(src, mesh.nodes[i], k, p, gradients)?;
            let mut tg = [ZERO; 6];
            if let Some(g) = g {
                for a in 0..3 {
                    for (t, tv) in mesh.tangents[i].iter().enumerate() {
                        tg[a * 2 + t] = (0..3).map(|l| g[l][a] * tv[l]).sum();
                    }
                }
            }
            Ok((u, tg))
        })
        .collect();
    let mut vals = Vec::with_capacity(mesh.len() * 3);
    let mut grads = Vec::new();
    for r in res {
        let (u, tg) = r?;
        vals.extend_from_slice(&u);
        if gradients {
            grads.extend_from_slice(&tg);
        }
    }
    Ok((vals, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ElasticParams {
        ElasticParams::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn speeds_and_validation() {
        let p = params();
        assert!((p.cp() - 3f64.sqrt()).abs() < 1e-15 && (p.cs() - 1.0).abs() < 1e-15);
        assert!(ElasticParams::new(1.0, 0.0, 1.0).is_err());
        assert!(ElasticParams::new(-2.0, 1.0, 1.0).is_err());
        assert!(ElasticParams::new(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn bracket_limits() {
        let sp = params().speeds();
        let r = 0.8;
        let b = phi_regularized_bracket(r, C64::new(1e-6, 0.0), sp).unwrap();
        let lim = -r * r * sp.a(2) / 2.0;
        assert!((b.re - lim).abs() < 1e-10 * lim.abs());
        let same = Speeds { cs: 1.3, cp: 1.3 };
        for k in [C64::new(0.001, 0.0), C64::new(2.0, -0.5)] {
            assert!(phi_regularized_bracket(r, k, same).unwrap().norm() < 1e-15);
        }
        assert!(phi_regularized_bracket(0.0, C64::new(1.0, 0.0), sp).is_err());
    }

    #[test]
    fn series_and_direct_agree_at_switch() {
        let sp = params().speeds();
        let r = 1.0;
        for dir in [C64::new(1.0, 0.0), C64::new(0.8, 0.6), C64::new(0.6, -0.8)] {
            let k_lo = dir * (THETA_SWITCH * (1.0 - 1e-9));
            let k_hi = dir * (THETA_SWITCH * (1.0 + 1e-9));
            let a = phi_regularized_bracket(r, k_lo, sp).unwrap();
            let b = phi_regularized_bracket(r, k_hi, sp).unwrap();
            assert!((a - b).norm() < 1e-6 * a.norm());
            let ga = series_derivs(r, k_lo, sp);
            let gb = {
                let es = (I * k_hi * r / sp.cs).exp();
                let ep = (I * k_hi * r / sp.cp).exp();
                direct_derivs(r, k_hi, sp, es, ep)
            };
            for n in 0..4 {
                assert!((ga[n] - gb[n]).norm() < 1e-6 * ga[n].norm(), "n={n} {} {}", ga[n], gb[n]);
            }
        }
    }

    #[test]
    fn radial_derivatives_match_differences() {
        let sp = params().speeds();
        let k = C64::new(2.3, 0.4);
        let r = 0.7;
        let e = 1e-4;
        let g = radial_derivs(r, k, sp);
        for n in 0..3 {
            let fd = (radial_derivs(r + e, k, sp)[n] - radial_derivs(r - e, k, sp)[n]) / (2.0 * e);
            assert!((fd - g[n + 1]).norm() < 1e-6 * g[n + 1].norm().max(1e-3), "n={n}");
        }
    }

    #[test]
    fn static_limit() {
        let p = params();
        let d = [0.3, -0.4, 0.5];
        let a = phi_matrix(d, C64::new(1e-5 / geom::norm(d), 0.0), &p).unwrap();
        let s = phi_static(d, &p);
        for j in 0..3 {
            for m in 0..3 {
                assert!((a[j][m].re - s[j][m].re).abs() < 1e-10, "{j}{m}");
            }
        }
    }

    #[test]
    fn symmetry() {
        let p = params();
        let d = [0.2, 0.7, -0.3];
        let k = C64::new(3.1, -0.7);
        let a = phi_matrix(d, k, &p).unwrap();
        let b = phi_matrix(geom::scale(d, -1.0), k, &p).unwrap();
        for j in 0..3 {
            for m in 0..3 {
                assert!((a[j][m] - a[m][j]).norm() < 1e-13 * a[j][j].norm());
                assert!((a[j][m] - b[j][m]).norm() < 1e-13 * a[j][j].norm());
            }
        }
    }

    #[test]
    fn gradient_matches_differences() {
        let p = params();
        let d = [0.4, -0.2, 0.5];
        let k = C64::new(1.7, 0.3);
        let g = phi_gradient(d, k, &p).unwrap();
        let e = 1e-5;
        for l in 0..3 {
            let mut dp = d;
            let mut dm = d;
            dp[l] += e;
            dm[l] -= e;
            let a = phi_matrix(dp, k, &p).unwrap();
            let b = phi_matrix(dm, k, &p).unwrap();
            for j in 0..3 {
                for m in 0..3 {
                    let fd = (a[j][m] - b[j][m]) / (2.0 * e);
                    assert!((fd - g[l][j][m]).norm() < 1e-6, "{l}{j}{m} {fd} {}", g[l][j][m]);
                }
            }
        }
    }

    #[test]
    fn matrix_solves_lame_system() {
        // c_s²ΔΦe + (c_p² − c_s²)∇div Φe + k²Φe = 0 away from the origin
        let p = ElasticParams::new(2.0, 1.0, 1.3).unwrap();
        let (cs2, cp2) = (p.cs().powi(2), p.cp().powi(2));
        let k = C64::new(1.9, 0.2);
        let x0 = [0.5, 0.3, -0.4];
        let e = 2e-3;
        let col = |x: Vec3, m: usize| -> [C64; 3] {
            let f = phi_matrix(x, k, &p).unwrap();
            [f[0][m], f[1][m], f[2][m]]
        };
        for m in 0..3 {
            let c0 = col(x0, m);
            let mut lap = [ZERO; 3];
            let mut gd = [ZERO; 3];
            for a in 0..3 {
                let mut xp = x0;
                let mut xm = x0;
                xp[a] += e;
                xm[a] -= e;
                let (cp_, cm_) = (col(xp, m), col(xm, m));
                for c in 0..3 {
                    lap[c] += (cp_[c] - 2.0 * c0[c] + cm_[c]) / (e * e);
                }
                for b in 0..3 {
                    // ∂_b ∂_a u_a
                    let mut pp = x0;
                    let mut pm = x0;
                    let mut mp = x0;
                    let mut mm = x0;
                    pp[a] += e;
                    pp[b] += e;
                    pm[a] += e;
                    pm[b] -= e;
                    mp[a] -= e;
                    mp[b] += e;
                    mm[a] -= e;
                    mm[b] -= e;
                    let v = (col(pp, m)[a] - col(pm, m)[a] - col(mp, m)[a] + col(mm, m)[a]) / (4.0 * e * e);
                    gd[b] += v;
                }
            }
            let scale = (k * k).norm() * c0.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for c in 0..3 {
                let res = cs2 * lap[c] + (cp2 - cs2) * gd[c] + k * k * c0[c];
                assert!(res.norm() < 1e-4 * scale, "m={m} c={c} {res}");
            }
        }
    }

    #[test]
    fn entire_in_k_near_switch() {
        // derivative along real and imaginary directions agrees (Cauchy–Riemann)
        let sp = params().speeds();
        let r = 1.0;
        let k0 = C64::new(THETA_SWITCH, 0.0);
        let d = 3e-3;
        let f = |k: C64| phi_regularized_bracket(r, k, sp).unwrap();
        let dr = (-f(k0 + 2.0 * d) + 8.0 * f(k0 + d) - 8.0 * f(k0 - d) + f(k0 - 2.0 * d)) / (12.0 * d);
        let di = d * I;
        let dimag = (-f(k0 + 2.0 * di) + 8.0 * f(k0 + di) - 8.0 * f(k0 - di) + f(k0 - 2.0 * di)) / (12.0 * di);
        assert!((dr - dimag).norm() < 1e-8 * dr.norm().max(1e-3), "{dr} {dimag}");
    }
}
