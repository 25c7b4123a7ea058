//! Radiating Helmholtz field of a source pair through the volume integral
//! u(x,k) = (1/4π) ∫ (f₁ + ik f₀) e^{ik|x−y|}/|x−y| dy.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::domain::BoundaryMesh;
use crate::error::{invalid, Result};
use crate::geom::{self, Vec3};
use crate::source::SourcePair;
use crate::sweep::{FrequencyGrid, FrequencySweep, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// e^{ikr}/(4πr).
pub fn green_helmholtz(r: f64, k: C64) -> Result<C64> {
    if !(r > 0.0) {
        return invalid(format!("kernel needs r > 0, got {r}"));
    }
    Ok((I * k * r).exp() / (4.0 * PI * r))
}

/// Midpoint-rule value of u(x, k).
pub fn forward_field(src: &SourcePair, x: Vec3, k: C64) -> C64 {
    field_and_gradient(src, x, k).0
}

/// u(x, k) and its Cartesian gradient in x.
pub fn field_and_gradient(src: &SourcePair, x: Vec3, k: C64) -> (C64, [C64; 3]) {
    let vol = src.grid.cell_volume();
    let mut u = C64::new(0.0, 0.0);
    let mut g = [C64::new(0.0, 0.0); 3];
    for v in src.voxels() {
        let d = geom::sub(x, v.pos);
        let r = geom::norm(d);
        let ker = (I * k * r).exp() / (4.0 * PI * r) * vol;
        let q = (C64::new(v.f1[0], 0.0) + I * k * v.f0[0]) * ker;
        u += q;
        let radial = q * (I * k - 1.0 / r) / r;
        for a in 0..3 {
            g[a] += radial * d[a];
        }
    }
    (u, g)
}

/// Dense sweep over mesh nodes and the frequency grid, including the static column.
pub fn forward_sweep(src: &SourcePair, mesh: &BoundaryMesh, grid: &FrequencyGrid) -> FrequencySweep {
    forward_sweep_with(src, mesh, grid, false)
}

/// As [`forward_sweep`], optionally storing tangential gradients for I₂.
pub fn forward_sweep_with(src: &SourcePair, mesh: &BoundaryMesh, grid: &FrequencyGrid, gradients: bool) -> FrequencySweep {
    let voxels = src.voxels();
    let vol = src.grid.cell_volume();
    let cols = grid.count + 1;
    let dw = grid.d_omega;
    let per_node: Vec<(Vec<C64>, Vec<C64>)> = (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            let x = mesh.nodes[i];
            let [t1, t2] = mesh.tangents[i];
            let mut u = vec![C64::new(0.0, 0.0); cols];
            let mut tg = if gradients { vec![C64::new(0.0, 0.0); 2 * cols] } else { Vec::new() };
            for v in &voxels {
                let d = geom::sub(x, v.pos);
                let r = geom::norm(d);
                let w = vol / (4.0 * PI * r);
                let (a, b) = (v.f1[0] * w, v.f0[0] * w);
                let (p1, p2) = (geom::dot(d, t1) / r, geom::dot(d, t2) / r);
                u[0] += a;
                if gradients {
                    tg[0] += -a / r * p1;
                    tg[1] += -a / r * p2;
                }
                let step = C64::from_polar(1.0, dw * r);
                let mut ph = C64::new(1.0, 0.0);
                for j in 1..cols {
                    let om = j as f64 * dw;
                    ph = if j % 32 == 0 { C64::from_polar(1.0, om * r) } else { ph * step };
                    let q = ph * C64::new(a, om * b);
                    u[j] += q;
                    if gradients {
                        let rad = q * C64::new(-1.0 / r, om);
                        tg[2 * j] += rad * p1;
                        tg[2 * j + 1] += rad * p2;
                    }
                }
            }
            (u, tg)
        })
        .collect();
    let mut out = FrequencySweep::zeros(mesh, grid, 1, gradients);
    for (i, (u, tg)) in per_node.into_iter().enumerate() {
        let o = out.offset(i, 0);
        out.values[o..o + cols].copy_from_slice(&u);
        if let Some(t) = &mut out.tangential {
            t[2 * o..2 * o + 2 * cols].copy_from_slice(&tg);
        }
    }
    out
}

/// Values and tangential gradients on every mesh node at one complex wave number.
pub fn boundary_values(src: &SourcePair, mesh: &BoundaryMesh, k: C64, gradients: bool) -> (Vec<C64>, Vec<C64>) {
    let res: Vec<(C64, [C64; 2])> = (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            let (u, g) = field_and_gradient(src, mesh.nodes[i], k);
            if !gradients {
                return (u, [C64::new(0.0, 0.0); 2]);
            }
            let [t1, t2] = mesh.tangents[i];
            let proj = |t: Vec3| g[0] * t[0] + g[1] * t[1] + g[2] * t[2];
            (u, [proj(t1), proj(t2)])
        })
        .collect();
    let vals = res.iter().map(|r| r.0).collect();
    let grads = if gradients { res.iter().flat_map(|r| r.1).collect() } else { Vec::new() };
    (vals, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, Shape};
    use crate::source::{rasterize_source, Bump, SourceDesc};

    #[test]
    fn kernel_values() {
        let g0 = green_helmholtz(1.0, C64::new(0.0, 0.0)).unwrap();
        assert!((g0.re - 0.0795774715459477).abs() < 1e-15 && g0.im == 0.0);
        let gp = green_helmholtz(1.0, C64::new(PI, 0.0)).unwrap();
        assert!((gp.re + 1.0 / (4.0 * PI)).abs() < 1e-15 && gp.im.abs() < 1e-15);
        assert!(green_helmholtz(0.0, C64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn single_voxel_source() {
        let d = build_domain(&Shape::unit_ball(), 0.1).unwrap();
        let mut s = SourcePair::zeros(&d.grid, 1);
        let idx = d.grid.index(10, 11, 9);
        s.f1[idx] = 2.0;
        s.mask[idx] = true;
        let y0 = d.grid.point(idx);
        let x = [1.0, 0.0, 0.0];
        let k = C64::new(3.0, 0.0);
        let r = geom::dist(x, y0);
        let want = 2.0 * d.grid.cell_volume() * (I * k * r).exp() / (4.0 * PI * r);
        assert!((forward_field(&s, x, k) - want).norm() < 1e-15);
    }

    #[test]
    fn sweep_matches_pointwise_and_is_linear() {
        let d = build_domain(&Shape::unit_ball(), 0.1).unwrap();
        let desc = SourceDesc {
            f0: vec![Bump::gaussian([0.1, 0.0, -0.1], 1.0, 0.15)],
            f1: vec![Bump::gaussian([-0.1, 0.1, 0.0], 0.7, 0.12)],
        };
        let s = rasterize_source(&desc, &d, 1).unwrap();
        let mesh = BoundaryMesh::sphere([0.0; 3], 1.0, 30);
        let g = FrequencyGrid::new(0.37, 100).unwrap();
        let sw = forward_sweep_with(&s, &mesh, &g, true);
        for i in [0, 7, 29] {
            for j in [0, 1, 31, 64, 100] {
                let (u, gr) = field_and_gradient(&s, mesh.nodes[i], C64::new(g.omega(j), 0.0));
                assert!((sw.value(i, j, 0) - u).norm() < 1e-9 * u.norm().max(1e-300), "{i} {j} {} {u}", sw.value(i, j, 0));
                let t = mesh.tangents[i][1];
                let gt = gr[0] * t[0] + gr[1] * t[1] + gr[2] * t[2];
                let scale = gr.iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt();
                let stored = sw.tangential.as_ref().unwrap()[2 * sw.offset(i, j) + 1];
                assert!((stored - gt).norm() < 1e-9 * scale, "{stored} {gt}");
            }
        }
        let sw2 = forward_sweep(&s.scaled(2.0), &mesh, &g);
        for (a, b) in sw2.values.iter().zip(&sw.values) {
            assert!((a - 2.0 * b).norm() <= 1e-12 * a.norm());
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let d = build_domain(&Shape::unit_ball(), 0.1).unwrap();
        let desc = SourceDesc { f0: vec![Bump::gaussian([0.0; 3], 1.0, 0.15)], f1: vec![Bump::gaussian([0.1; 3], 1.0, 0.1)] };
        let s = rasterize_source(&desc, &d, 1).unwrap();
        for w in [0.3, 2.0, 7.5] {
            let a = forward_field(&s, [0.0, 0.0, 1.0], C64::new(w, 0.0));
            let b = forward_field(&s, [0.0, 0.0, 1.0], C64::new(-w, 0.0));
            assert!((a.conj() - b).norm() < 1e-12 * a.norm());
        }
    }
}
