//! Leapfrog solvers for U_tt = A U with A = Δ (scalar) or
//! c_s²Δ + (c_p² − c_s²)∇div (elastic, ρ-normalized), on lattices aligned with the domain voxels.
//!
//! Free-space runs use an enlarged box with frozen zero edges. Backward runs live on Ω and take
//! Dirichlet data from a boundary trace through ghost values on every stencil edge that leaves Ω.

use std::collections::HashMap;

use log::warn;
use nalgebra::{SMatrix, SVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{BoundaryMesh, Domain, Grid3, Shape};
use crate::error::{invalid, Error, Result};
use crate::functionals::Physics;
use crate::geom::{self, Vec3};
use crate::quadrature::regression_slope;
use crate::quadrature::lagrange;
use crate::source::SourcePair;
use crate::synthesis::TimeTrace;

pub const CFL_FACTOR: f64 = 0.9;

/// Largest stable step: CFL_FACTOR·h/(√3·c_max).
pub fn cfl_dt(h: f64, c_max: f64) -> f64 {
    CFL_FACTOR * h / (3f64.sqrt() * c_max)
}

/// One term of the stencil: `w·u_inp(x + off·h)` contributes to component `out`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tap {
    pub off: [i64; 3],
    pub out: usize,
    pub inp: usize,
    pub w: f64,
}

#[derive(Clone, Debug)]
pub struct Stencil {
    pub arity: usize,
    pub halo: usize,
    pub taps: Vec<Tap>,
}

impl Stencil {
    /// Compact 7-point Laplacian; for elasticity plus wide centered D_bD_a for ∇div.
    pub fn for_physics(physics: &Physics, h: f64) -> Stencil {
        let h2 = h * h;
        let mut taps = Vec::new();
        let (arity, cs2, g) = match physics {
            Physics::Scalar => (1, 1.0, 0.0),
            Physics::Elastic(p) => (3, p.cs().powi(2), p.cp().powi(2) - p.cs().powi(2)),
        };
        let unit = |a: usize, s: i64| {
            let mut o = [0i64; 3];
            o[a] = s;
            o
        };
        for b in 0..arity {
            taps.push(Tap { off: [0; 3], out: b, inp: b, w: -6.0 * cs2 / h2 });
            for a in 0..3 {
                for s in [-1, 1] {
                    taps.push(Tap { off: unit(a, s), out: b, inp: b, w: cs2 / h2 });
                }
            }
            if g == 0.0 {
                continue;
            }
            for a in 0..3 {
                let w = g / (4.0 * h2);
                if a == b {
                    taps.push(Tap { off: unit(a, 2), out: b, inp: a, w });
                    taps.push(Tap { off: unit(a, -2), out: b, inp: a, w });
                    taps.push(Tap { off: [0; 3], out: b, inp: a, w: -2.0 * w });
                } else {
                    for s in [-1i64, 1] {
                        for t in [-1i64, 1] {
                            let mut o = [0i64; 3];
                            o[b] = s;
                            o[a] = t;
                            taps.push(Tap { off: o, out: b, inp: a, w: (s * t) as f64 * w });
                        }
                    }
                }
            }
        }
        // merge repeated (off, out, inp)
        let mut merged: Vec<Tap> = Vec::new();
        for t in taps {
            if let Some(m) = merged.iter_mut().find(|m| m.off == t.off && m.out == t.out && m.inp == t.inp) {
                m.w += t.w;
            } else {
                merged.push(t);
            }
        }
        let halo = if g == 0.0 { 1 } else { 2 };
        Stencil { arity, halo, taps: merged }
    }

    fn offsets(&self) -> Vec<[i64; 3]> {
        let mut v: Vec<[i64; 3]> = Vec::new();
        for t in &self.taps {
            if t.off != [0; 3] && !v.contains(&t.off) {
                v.push(t.off);
            }
        }
        v
    }

    /// Taps grouped by output component with flat offsets into an interleaved array.
    fn flat(&self, grid: &Grid3) -> Vec<Vec<(isize, f64)>> {
        let st = grid.strides();
        let mut out = vec![Vec::new(); self.arity];
        for t in &self.taps {
            let node = t.off[0] * st[0] as i64 + t.off[1] * st[1] as i64 + t.off[2] * st[2] as i64;
            out[t.out].push(((node * self.arity as i64 + t.inp as i64) as isize, t.w));
        }
        out
    }
}

#[inline]
fn apply_flat(flat: &[(isize, f64)], u: &[f64], base: usize) -> f64 {
    let mut acc = 0.0;
    for &(o, w) in flat {
        acc += w * u[(base as isize + o) as usize];
    }
    acc
}

/// A · u on every node at least `halo` away from the box edge; zero elsewhere.
pub fn apply_operator(st: &Stencil, grid: &Grid3, u: &[f64]) -> Vec<f64> {
    let flat = st.flat(grid);
    let a = st.arity;
    let [n0, n1, n2] = grid.n;
    let hl = st.halo;
    let mut out = vec![0.0; u.len()];
    out.par_chunks_mut(n1 * n2 * a).enumerate().for_each(|(i, chunk)| {
        if i < hl || i + hl >= n0 {
            return;
        }
        for j in hl..n1 - hl {
            for k in hl..n2 - hl {
                let idx = grid.index(i, j, k);
                for (b, f) in flat.iter().enumerate() {
                    chunk[(j * n2 + k) * a + b] = apply_flat(f, u, idx * a + b - b);
                }
            }
        }
    });
    out
}

/// prev ← 2cur − prev + dt²·A·cur on the free-space interior; returns (Σ(new−cur)², −Σ new·A cur).
fn step_free(flat: &[Vec<(isize, f64)>], grid: &Grid3, halo: usize, cur: &[f64], prev: &mut [f64], dt2: f64) -> (f64, f64) {
    let a = flat.len();
    let [n0, n1, n2] = grid.n;
    let parts: Vec<(f64, f64)> = prev
        .par_chunks_mut(n1 * n2 * a)
        .enumerate()
        .map(|(i, chunk)| {
            let (mut ek, mut ep) = (0.0, 0.0);
            if i < halo || i + halo >= n0 {
                return (ek, ep);
            }
            for j in halo..n1 - halo {
                for k in halo..n2 - halo {
                    let base = grid.index(i, j, k) * a;
                    for (b, f) in flat.iter().enumerate() {
                        let au = apply_flat(f, cur, base);
                        let c = cur[base + b];
                        let slot = &mut chunk[(j * n2 + k) * a + b];
                        let new = 2.0 * c - *slot + dt2 * au;
                        *slot = new;
                        ek += (new - c) * (new - c);
                        ep -= new * au;
                    }
                }
            }
            (ek, ep)
        })
        .collect();
    parts.iter().fold((0.0, 0.0), |s, p| (s.0 + p.0, s.1 + p.1))
}

/// Free-space lattice aligned with the domain voxels, wide enough that nothing reflected
/// off the box edge returns to Ω within `t_record`.
pub fn free_space_grid(domain: &Domain, c_max: f64, t_record: f64, halo: usize) -> Grid3 {
    let h = domain.h;
    let (c, r) = domain.shape.enclosing_ball();
    let w = r + 0.5 * c_max * t_record + (2 + halo) as f64 * h;
    free_grid_around(&domain.grid, c, w)
}

fn free_grid_around(lattice: &Grid3, c: Vec3, w: f64) -> Grid3 {
    let h = lattice.h;
    let mut origin = [0.0; 3];
    let mut n = [0usize; 3];
    for a in 0..3 {
        let lo = ((c[a] - w - lattice.origin[a]) / h).floor();
        let hi = ((c[a] + w - lattice.origin[a]) / h).ceil();
        origin[a] = lattice.origin[a] + lo * h;
        n[a] = (hi - lo) as usize + 1;
    }
    Grid3 { origin, h, n }
}

fn embed(src: &SourcePair, grid: &Grid3, field: &[f64]) -> Result<Vec<f64>> {
    let off = grid.lattice_offset(&src.grid).ok_or_else(|| Error::Mismatch("source lattice not aligned with solver grid".into()))?;
    let a = src.arity;
    let mut out = vec![0.0; grid.len() * a];
    for idx in 0..src.grid.len() {
        if !src.mask[idx] {
            continue;
        }
        let [i, j, k] = src.grid.ijk(idx);
        let t = [i as i64 + off[0], j as i64 + off[1], k as i64 + off[2]];
        if (0..3).any(|d| t[d] < 0 || t[d] >= grid.n[d] as i64) {
            return Err(Error::Mismatch("source outside solver grid".into()));
        }
        let g = grid.index(t[0] as usize, t[1] as usize, t[2] as usize);
        out[g * a..g * a + a].copy_from_slice(&field[idx * a..idx * a + a]);
    }
    Ok(out)
}

/// Full field copy (optionally cropped to a cube around `center`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub grid: Grid3,
    pub arity: usize,
    pub field: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct ForwardOptions {
    pub t_record: f64,
    /// Solver step; defaults to the CFL step.
    pub dt: Option<f64>,
    pub snapshot_times: Vec<f64>,
    /// Crop snapshots to a cube of this half-width around the enclosing-ball center.
    pub snapshot_half_width: Option<f64>,
    /// Extra box half-width beyond the reflection rule.
    pub extra_width: f64,
}

impl ForwardOptions {
    pub fn new(t_record: f64) -> Self {
        ForwardOptions { t_record, ..Default::default() }
    }
}

pub struct ForwardRun {
    pub trace: TimeTrace,
    pub grid: Grid3,
    pub dt: f64,
    pub snapshots: Vec<Snapshot>,
    /// Leapfrog energy at half steps n + 1/2.
    pub energy: Vec<f64>,
    /// ‖U(·, tₙ)‖ over the voxels of Ω.
    pub omega_norm: Vec<f64>,
}

struct Probe {
    idx: [usize; 8],
    w: [f64; 8],
}

fn trilinear_probe(grid: &Grid3, p: Vec3) -> Probe {
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let s = ((p[a] - grid.origin[a]) / grid.h).clamp(0.0, (grid.n[a] - 1) as f64 - 1e-12);
        let i = (s.floor() as usize).min(grid.n[a] - 2);
        base[a] = i;
        frac[a] = s - i as f64;
    }
    let mut idx = [0usize; 8];
    let mut w = [0.0; 8];
    for c in 0..8 {
        let d = [c >> 2 & 1, c >> 1 & 1, c & 1];
        idx[c] = grid.index(base[0] + d[0], base[1] + d[1], base[2] + d[2]);
        w[c] = (0..3).map(|a| if d[a] == 1 { frac[a] } else { 1.0 - frac[a] }).product();
    }
    Probe { idx, w }
}

fn record(trace: &mut TimeTrace, probes: &[Probe], u: &[f64], n: usize) {
    let a = trace.arity;
    for (i, p) in probes.iter().enumerate() {
        let o = trace.offset(i, n);
        for c in 0..a {
            trace.values[o + c] = p.idx.iter().zip(&p.w).map(|(&g, &w)| w * u[g * a + c]).sum();
        }
    }
}

fn crop(grid: &Grid3, a: usize, u: &[f64], c: Vec3, w: f64) -> (Grid3, Vec<f64>) {
    let sub = free_grid_around(grid, c, w);
    let off = grid.lattice_offset(&sub).expect("aligned crop");
    let mut out = vec![0.0; sub.len() * a];
    for i in 0..sub.n[0] {
        for j in 0..sub.n[1] {
            for k in 0..sub.n[2] {
                let t = [i as i64 + off[0], j as i64 + off[1], k as i64 + off[2]];
                if (0..3).any(|d| t[d] < 0 || t[d] >= grid.n[d] as i64) {
                    continue;
                }
                let g = grid.index(t[0] as usize, t[1] as usize, t[2] as usize);
                let s = sub.index(i, j, k);
                out[s * a..s * a + a].copy_from_slice(&u[g * a..g * a + a]);
            }
        }
    }
    (sub, out)
}

/// Free-space leapfrog from U(0) = f₀, U_t(0) = −f₁, recording the trace on the domain mesh.
pub fn fdtd_forward(src: &SourcePair, domain: &Domain, physics: &Physics, opts: &ForwardOptions) -> Result<ForwardRun> {
    physics.validate()?;
    if src.arity != physics.arity() {
        return Err(Error::Mismatch("source arity does not match the physics".into()));
    }
    if !(opts.t_record > 0.0) {
        return invalid("recording time must be positive");
    }
    let h = domain.h;
    let st = Stencil::for_physics(physics, h);
    let max_dt = cfl_dt(h, physics.c_max());
    let dt = opts.dt.unwrap_or(max_dt);
    if !(dt > 0.0) || dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::Cfl(format!("dt = {dt} exceeds the stable step {max_dt}")));
    }
    let mut grid = free_space_grid(domain, physics.c_max(), opts.t_record, st.halo);
    if opts.extra_width > 0.0 {
        let (c, r) = domain.shape.enclosing_ball();
        grid = free_grid_around(&domain.grid, c, r + 0.5 * physics.c_max() * opts.t_record + (2 + st.halo) as f64 * h + opts.extra_width);
    }
    let a = st.arity;
    let flat = st.flat(&grid);
    let f0 = embed(src, &grid, &src.f0)?;
    let f1 = embed(src, &grid, &src.f1)?;
    let steps = (opts.t_record / dt - 1e-9).ceil() as usize;
    let probes: Vec<Probe> = domain.mesh.nodes.iter().map(|p| trilinear_probe(&grid, *p)).collect();
    let mut trace = TimeTrace::zeros(&domain.mesh, a, dt, steps + 1);

    let inside: Vec<usize> = {
        let off = grid.lattice_offset(&domain.grid).ok_or_else(|| Error::Mismatch("domain lattice".into()))?;
        (0..domain.grid.len())
            .filter(|&i| domain.inside[i])
            .map(|i| {
                let [x, y, z] = domain.grid.ijk(i);
                grid.index((x as i64 + off[0]) as usize, (y as i64 + off[1]) as usize, (z as i64 + off[2]) as usize)
            })
            .collect()
    };
    let vol = grid.cell_volume();
    let omega_l2 = |u: &[f64]| (inside.iter().map(|&g| (0..a).map(|c| u[g * a + c].powi(2)).sum::<f64>()).sum::<f64>() * vol).sqrt();

    // U¹ = f₀ − dt f₁ + dt²/2 A f₀ − dt³/6 A f₁
    let af0 = apply_operator(&st, &grid, &f0);
    let af1 = apply_operator(&st, &grid, &f1);
    let mut prev = f0;
    let mut cur: Vec<f64> = (0..prev.len())
        .map(|i| prev[i] - dt * f1[i] + 0.5 * dt * dt * af0[i] - dt * dt * dt / 6.0 * af1[i])
        .collect();
    drop((af0, af1));
    let mut snaps = Vec::new();
    let snap_steps: Vec<(usize, f64)> = opts.snapshot_times.iter().map(|&t| ((t / dt).round() as usize, t)).collect();
    let center = domain.shape.enclosing_ball().0;
    let take = |u: &[f64], n: usize, snaps: &mut Vec<Snapshot>| {
        for &(s, _) in &snap_steps {
            if s == n {
                let (g, f) = match opts.snapshot_half_width {
                    Some(w) => crop(&grid, a, u, center, w),
                    None => (grid.clone(), u.to_vec()),
                };
                snaps.push(Snapshot { t: n as f64 * dt, grid: g, arity: a, field: f });
            }
        }
    };
    record(&mut trace, &probes, &prev, 0);
    take(&prev, 0, &mut snaps);
    let mut omega_norm = vec![omega_l2(&prev)];
    if steps >= 1 {
        record(&mut trace, &probes, &cur, 1);
        take(&cur, 1, &mut snaps);
        omega_norm.push(omega_l2(&cur));
    }
    let mut energy = Vec::with_capacity(steps);
    {
        let ac = apply_operator(&st, &grid, &prev);
        let ek: f64 = cur.iter().zip(&prev).map(|(x, y)| (x - y) * (x - y)).sum();
        let ep: f64 = -cur.iter().zip(&ac).map(|(x, y)| x * y).sum::<f64>();
        energy.push(vol * (ek / (dt * dt) + ep));
    }
    let dt2 = dt * dt;
    for n in 1..steps {
        let (ek, ep) = step_free(&flat, &grid, st.halo, &cur, &mut prev, dt2);
        std::mem::swap(&mut prev, &mut cur);
        energy.push(vol * (ek / dt2 + ep));
        record(&mut trace, &probes, &cur, n + 1);
        take(&cur, n + 1, &mut snaps);
        omega_norm.push(omega_l2(&cur));
    }
    Ok(ForwardRun { trace, grid, dt, snapshots: snaps, energy, omega_norm })
}

pub fn fdtd_scalar_forward(src: &SourcePair, domain: &Domain, t_total: f64) -> Result<ForwardRun> {
    fdtd_forward(src, domain, &Physics::Scalar, &ForwardOptions::new(t_total))
}

pub fn fdtd_elastic_forward(src: &SourcePair, domain: &Domain, params: &crate::elastic::ElasticParams, t_total: f64) -> Result<ForwardRun> {
    fdtd_forward(src, domain, &Physics::Elastic(*params), &ForwardOptions::new(t_total))
}

/// Run `steps` leapfrog steps forward, then the same number backward, and return the
/// relative deviation of the recovered initial pair (U⁰, U¹).
pub fn reversibility_error(src: &SourcePair, domain: &Domain, physics: &Physics, steps: usize) -> Result<f64> {
    let h = domain.h;
    let st = Stencil::for_physics(physics, h);
    let dt = cfl_dt(h, physics.c_max());
    let grid = free_space_grid(domain, physics.c_max(), 2.0 * steps as f64 * dt, st.halo);
    let flat = st.flat(&grid);
    let f0 = embed(src, &grid, &src.f0)?;
    let f1 = embed(src, &grid, &src.f1)?;
    let af0 = apply_operator(&st, &grid, &f0);
    let u0 = f0.clone();
    let u1: Vec<f64> = (0..f0.len()).map(|i| f0[i] - dt * f1[i] + 0.5 * dt * dt * af0[i]).collect();
    let (mut prev, mut cur) = (u0.clone(), u1.clone());
    let dt2 = dt * dt;
    for _ in 0..steps {
        step_free(&flat, &grid, st.halo, &cur, &mut prev, dt2);
        std::mem::swap(&mut prev, &mut cur);
    }
    // reverse: (cur, prev) = (U^{N+1}, U^N) → step with roles exchanged
    let (mut next, mut now) = (cur, prev);
    for _ in 0..steps {
        step_free(&flat, &grid, st.halo, &now, &mut next, dt2);
        std::mem::swap(&mut next, &mut now);
    }
    // now = U⁰, next = U¹
    let num: f64 = now.iter().zip(&u0).chain(next.iter().zip(&u1)).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = u0.iter().chain(&u1).map(|x| x * x).sum();
    if den == 0.0 {
        return Ok(num.sqrt());
    }
    Ok((num / den).sqrt())
}

/// How boundary data enter the backward solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCoupling {
    /// Linear ghost extrapolation through the exact crossing on each stencil edge.
    Ghost,
    /// Overwrite the layer of interior nodes nearest ∂Ω with the data.
    Injection,
}

#[derive(Clone, Debug)]
pub struct BackwardOptions {
    pub t_final: f64,
    pub coupling: BoundaryCoupling,
    /// Solver substeps per trace step; chosen from the CFL limit when `None`.
    pub substeps: Option<usize>,
}

impl BackwardOptions {
    pub fn new(t_final: f64) -> Self {
        BackwardOptions { t_final, coupling: BoundaryCoupling::Ghost, substeps: None }
    }
}

/// Moving-least-squares weights for the value at `p` from nearby mesh nodes
/// (quadratic in the tangent plane).
struct MeshIndex {
    cell: f64,
    lo: Vec3,
    dims: [usize; 3],
    buckets: Vec<Vec<usize>>,
}

impl MeshIndex {
    fn new(mesh: &BoundaryMesh) -> Self {
        let spacing = (mesh.area() / mesh.len().max(1) as f64).sqrt();
        let cell = 2.0 * spacing;
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &mesh.nodes {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let dims = [0, 1, 2].map(|a| ((hi[a] - lo[a]) / cell).floor() as usize + 1);
        let mut buckets = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        let mut idx = MeshIndex { cell, lo, dims, buckets: Vec::new() };
        for (i, p) in mesh.nodes.iter().enumerate() {
            let b = idx.bucket(*p);
            buckets[b].push(i);
        }
        idx.buckets = buckets;
        idx
    }

    fn coord(&self, p: Vec3) -> [i64; 3] {
        [0, 1, 2].map(|a| (((p[a] - self.lo[a]) / self.cell).floor() as i64).clamp(0, self.dims[a] as i64 - 1))
    }

    fn bucket(&self, p: Vec3) -> usize {
        let c = self.coord(p);
        (c[0] as usize * self.dims[1] + c[1] as usize) * self.dims[2] + c[2] as usize
    }

    fn nearest(&self, mesh: &BoundaryMesh, p: Vec3, k: usize) -> Vec<usize> {
        let c = self.coord(p);
        let mut ring = 1i64;
        loop {
            let mut cand = Vec::new();
            for i in c[0] - ring..=c[0] + ring {
                for j in c[1] - ring..=c[1] + ring {
                    for l in c[2] - ring..=c[2] + ring {
                        if i < 0 || j < 0 || l < 0 || i >= self.dims[0] as i64 || j >= self.dims[1] as i64 || l >= self.dims[2] as i64 {
                            continue;
                        }
                        cand.extend_from_slice(&self.buckets[(i as usize * self.dims[1] + j as usize) * self.dims[2] + l as usize]);
                    }
                }
            }
            let covered = ring as usize >= self.dims.iter().copied().max().unwrap_or(1);
            if cand.len() >= 2 * k || covered {
                cand.sort_by(|&x, &y| geom::dist(mesh.nodes[x], p).total_cmp(&geom::dist(mesh.nodes[y], p)).then(x.cmp(&y)));
                cand.truncate(k);
                return cand;
            }
            ring += 1;
        }
    }
}

const MLS_NEIGHBORS: usize = 16;

fn mls_weights(mesh: &BoundaryMesh, index: &MeshIndex, shape: &Shape, p: Vec3) -> Vec<(usize, f64)> {
    let nb = index.nearest(mesh, p, MLS_NEIGHBORS);
    let n = shape.normal_at(p);
    let [t1, t2] = geom::tangent_frame(n);
    let scale = nb.iter().map(|&i| geom::dist(mesh.nodes[i], p)).fold(0.0, f64::max).max(1e-12);
    if nb.len() < 6 {
        // too few nodes for a quadratic: nearest node
        return vec![(nb[0], 1.0)];
    }
    let mut m = SMatrix::<f64, 6, 6>::zeros();
    let mut rows = Vec::with_capacity(nb.len());
    for &i in &nb {
        let d = geom::sub(mesh.nodes[i], p);
        let (s, t) = (geom::dot(d, t1) / scale, geom::dot(d, t2) / scale);
        let v = SVector::<f64, 6>::from([1.0, s, t, s * s, s * t, t * t]);
        let w = (-(geom::norm(d) / (0.6 * scale)).powi(2)).exp();
        m += w * v * v.transpose();
        rows.push((i, v, w));
    }
    match m.try_inverse() {
        Some(inv) => {
            let e0 = inv.row(0).transpose();
            rows.iter().map(|(i, v, w)| (*i, w * e0.dot(v))).collect()
        }
        None => vec![(nb[0], 1.0)],
    }
}

/// Trace values at time t for every mesh node, Lagrange-interpolated in time.
fn trace_at(trace: &TimeTrace, t: f64, out: &mut [f64]) {
    let a = trace.arity;
    let s = t / trace.dt;
    let j = s.floor() as i64;
    out.iter_mut().for_each(|v| *v = 0.0);
    if (s - s.round()).abs() < 1e-9 {
        let n = s.round() as i64;
        if n < 0 || n >= trace.n_t as i64 {
            return;
        }
        for i in 0..trace.nodes() {
            let o = trace.offset(i, n as usize);
            out[i * a..i * a + a].copy_from_slice(&trace.values[o..o + a]);
        }
        return;
    }
    let xs: Vec<f64> = (j - 1..=j + 2).map(|n| n as f64).collect();
    let lw: Vec<f64> = (0..4)
        .map(|q| {
            let mut ys = [0.0; 4];
            ys[q] = 1.0;
            lagrange(&xs, &ys, s)
        })
        .collect();
    for (q, n) in (j - 1..=j + 2).enumerate() {
        if n < 0 || n >= trace.n_t as i64 {
            continue;
        }
        for i in 0..trace.nodes() {
            let o = trace.offset(i, n as usize);
            for c in 0..a {
                out[i * a + c] += lw[q] * trace.values[o + c];
            }
        }
    }
}

struct BoundaryRow {
    node: usize,
    /// per output component: (flat index into u, weight)
    interior: Vec<Vec<(usize, f64)>>,
    /// per output component: (boundary value index, weight)
    boundary: Vec<Vec<(usize, f64)>>,
}

const EXTERIOR: u32 = u32::MAX;
const BULK: u32 = u32::MAX - 1;

/// Backward solve on Ω from the zero state at `t_final` with Dirichlet data `trace`;
/// returns (f₀, f₁) = (U(0), −U_t(0)) on the standoff interior.
pub fn fdtd_backward(trace: &TimeTrace, domain: &Domain, physics: &Physics, opts: &BackwardOptions) -> Result<SourcePair> {
    physics.validate()?;
    if trace.arity != physics.arity() {
        return Err(Error::Mismatch("trace arity does not match the physics".into()));
    }
    if trace.nodes() != domain.mesh.len() {
        return Err(Error::Mismatch("trace and domain mesh differ".into()));
    }
    let need = domain.diameter / physics.c_min();
    if opts.t_final < need {
        warn!("backward start {:.4} is before D/c_min = {:.4}; expect bias", opts.t_final, need);
    }
    let h = domain.h;
    let grid = &domain.grid;
    let a = physics.arity();
    let st = Stencil::for_physics(physics, h);
    let max_dt = cfl_dt(h, physics.c_max());
    let m = opts.substeps.unwrap_or_else(|| (trace.dt / max_dt - 1e-9).ceil().max(1.0) as usize);
    let dt = trace.dt / m as f64;
    if dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::Cfl(format!("dt = {dt} exceeds the stable step {max_dt}")));
    }
    let n = grid.n;
    let at = |ijk: [usize; 3], o: [i64; 3]| -> Option<usize> {
        let t = [ijk[0] as i64 + o[0], ijk[1] as i64 + o[1], ijk[2] as i64 + o[2]];
        if (0..3).any(|d| t[d] < 0 || t[d] >= n[d] as i64) {
            return None;
        }
        Some(grid.index(t[0] as usize, t[1] as usize, t[2] as usize))
    };
    let inside = |i: Option<usize>| i.map(|i| domain.inside[i]).unwrap_or(false);
    let offsets = st.offsets();

    let mut kind = vec![EXTERIOR; grid.len()];
    let mut rows: Vec<BoundaryRow> = Vec::new();
    let mut crossings: Vec<Vec3> = Vec::new();
    let mut cross_id: HashMap<(usize, [i64; 3]), usize> = HashMap::new();
    for idx in 0..grid.len() {
        if !domain.inside[idx] {
            continue;
        }
        let ijk = grid.ijk(idx);
        if offsets.iter().all(|&o| inside(at(ijk, o))) {
            kind[idx] = BULK;
            continue;
        }
        kind[idx] = rows.len() as u32;
        let mut row = BoundaryRow { node: idx, interior: vec![Vec::new(); a], boundary: vec![Vec::new(); a] };
        if opts.coupling == BoundaryCoupling::Injection {
            let cid = crossings.len();
            crossings.push(grid.point(idx));
            for c in 0..a {
                row.boundary[c].push((cid * a + c, 1.0));
            }
            rows.push(row);
            continue;
        }
        let p0 = grid.point(idx);
        for t in &st.taps {
            let nb = at(ijk, t.off);
            if t.off == [0; 3] || inside(nb) {
                row.interior[t.out].push((nb.unwrap() * a + t.inp, t.w));
                continue;
            }
            let q = geom::add(p0, geom::scale([t.off[0] as f64, t.off[1] as f64, t.off[2] as f64], h));
            let cid = *cross_id.entry((idx, t.off)).or_insert_with(|| {
                let s = domain.shape.exit_param(p0, q);
                crossings.push(geom::add(p0, geom::scale(geom::sub(q, p0), s)));
                crossings.len() - 1
            });
            let len = geom::dist(p0, q);
            let d = geom::dist(p0, crossings[cid]).max(1e-3 * len);
            let mirror = at(ijk, [-t.off[0], -t.off[1], -t.off[2]]);
            if inside(mirror) {
                let alpha = (len - d) / (len + d);
                row.boundary[t.out].push((cid * a + t.inp, t.w * (1.0 + alpha)));
                row.interior[t.out].push((mirror.unwrap() * a + t.inp, -t.w * alpha));
            } else {
                row.boundary[t.out].push((cid * a + t.inp, t.w));
            }
        }
        rows.push(row);
    }
    let mindex = MeshIndex::new(&domain.mesh);
    let cross_w: Vec<Vec<(usize, f64)>> = crossings.par_iter().map(|p| mls_weights(&domain.mesh, &mindex, &domain.shape, *p)).collect();

    let flat = st.flat(grid);
    let n_f = (opts.t_final / dt - 1e-9).ceil() as usize;
    let mut next = vec![0.0; grid.len() * a];
    let mut cur = vec![0.0; grid.len() * a];
    let mut mesh_vals = vec![0.0; trace.nodes() * a];
    let mut gvals = vec![0.0; crossings.len() * a];
    let boundary_at = |t: f64, mesh_vals: &mut Vec<f64>, gvals: &mut Vec<f64>| {
        trace_at(trace, t, mesh_vals);
        for (cid, ws) in cross_w.iter().enumerate() {
            for c in 0..a {
                gvals[cid * a + c] = ws.iter().map(|&(i, w)| w * mesh_vals[i * a + c]).sum();
            }
        }
    };
    let dt2 = dt * dt;
    let slab = n[1] * n[2] * a;
    let mut u1 = Vec::new();
    let injection = opts.coupling == BoundaryCoupling::Injection;
    for step in (0..=n_f).rev() {
        // cur = U^step, next = U^{step+1}
        if step == 1 {
            u1 = cur.clone();
        }
        let t = step as f64 * dt;
        boundary_at(t, &mut mesh_vals, &mut gvals);
        let gv = &gvals;
        let curr = &cur;
        next.par_chunks_mut(slab).enumerate().for_each(|(i, chunk)| {
            for j in 0..n[1] {
                for k in 0..n[2] {
                    let idx = grid.index(i, j, k);
                    let kd = kind[idx];
                    if kd == EXTERIOR {
                        continue;
                    }
                    let base = idx * a;
                    for b in 0..a {
                        let au = if kd == BULK {
                            apply_flat(&flat[b], curr, base)
                        } else if injection {
                            continue;
                        } else {
                            let r = &rows[kd as usize];
                            r.interior[b].iter().map(|&(f, w)| w * curr[f]).sum::<f64>() + r.boundary[b].iter().map(|&(f, w)| w * gv[f]).sum::<f64>()
                        };
                        let slot = &mut chunk[(j * n[2] + k) * a + b];
                        *slot = 2.0 * curr[base + b] - *slot + dt2 * au;
                    }
                }
            }
        });
        std::mem::swap(&mut next, &mut cur);
        if injection {
            let tn = t - dt;
            boundary_at(tn, &mut mesh_vals, &mut gvals);
            for r in &rows {
                for b in 0..a {
                    cur[r.node * a + b] = r.boundary[b].iter().map(|&(f, w)| w * gvals[f]).sum();
                }
            }
        }
    }
    // cur = U^{-1}, next = U^0
    let mut out = SourcePair::zeros(grid, a);
    out.smoothness = 0;
    let keep = domain.standoff();
    for idx in 0..grid.len() {
        if !domain.inside[idx] || domain.shape.depth(grid.point(idx)) < keep {
            continue;
        }
        out.mask[idx] = true;
        for c in 0..a {
            let f = idx * a + c;
            out.f0[f] = next[f];
            out.f1[f] = -(u1.get(f).copied().unwrap_or(0.0) - cur[f]) / (2.0 * dt);
        }
    }
    Ok(out)
}

pub fn fdtd_scalar_backward(trace: &TimeTrace, domain: &Domain, t_final: f64) -> Result<SourcePair> {
    fdtd_backward(trace, domain, &Physics::Scalar, &BackwardOptions::new(t_final))
}

pub fn fdtd_elastic_backward(trace: &TimeTrace, domain: &Domain, params: &crate::elastic::ElasticParams, t_final: f64) -> Result<SourcePair> {
    fdtd_backward(trace, domain, &Physics::Elastic(*params), &BackwardOptions::new(t_final))
}

/// Wide centered divergence and curl of an interleaved 3-vector field (zero at the edge layer).
pub fn div_curl(grid: &Grid3, u: &[f64]) -> (Vec<f64>, Vec<[f64; 3]>) {
    let st = grid.strides();
    let h2 = 2.0 * grid.h;
    let mut div = vec![0.0; grid.len()];
    let mut curl = vec![[0.0; 3]; grid.len()];
    for i in 1..grid.n[0] - 1 {
        for j in 1..grid.n[1] - 1 {
            for k in 1..grid.n[2] - 1 {
                let idx = grid.index(i, j, k);
                let d = |a: usize, c: usize| (u[(idx + st[a]) * 3 + c] - u[(idx - st[a]) * 3 + c]) / h2;
                div[idx] = d(0, 0) + d(1, 1) + d(2, 2);
                curl[idx] = [d(1, 2) - d(2, 1), d(2, 0) - d(0, 2), d(0, 1) - d(1, 0)];
            }
        }
    }
    (div, curl)
}

/// Peak of r²·⟨|q|²⟩ over spherical shells around `center`.
fn radial_peak(grid: &Grid3, q: &[f64], center: Vec3, r_max: f64) -> f64 {
    let bw = 0.5 * grid.h;
    let nb = (r_max / bw) as usize + 1;
    let mut sum = vec![0.0; nb];
    let mut cnt = vec![0usize; nb];
    for idx in 0..grid.len() {
        let r = geom::dist(grid.point(idx), center);
        let b = (r / bw) as usize;
        if b < nb {
            sum[b] += q[idx];
            cnt[b] += 1;
        }
    }
    let prof: Vec<f64> = (0..nb).map(|b| if cnt[b] > 0 { sum[b] / cnt[b] as f64 * ((b as f64 + 0.5) * bw).powi(2) } else { 0.0 }).collect();
    let (bm, _) = prof.iter().enumerate().fold((0, f64::NEG_INFINITY), |m, (i, v)| if *v > m.1 { (i, *v) } else { m });
    let r = |b: usize| (b as f64 + 0.5) * bw;
    if bm == 0 || bm + 1 >= nb {
        return r(bm);
    }
    let (y0, y1, y2) = (prof[bm - 1], prof[bm], prof[bm + 1]);
    let den = y0 - 2.0 * y1 + y2;
    let shift = if den != 0.0 { 0.5 * (y0 - y2) / den } else { 0.0 };
    r(bm) + shift.clamp(-0.5, 0.5) * bw
}

/// Front speeds of ‖div U‖ and ‖curl U‖ from snapshots, by regressing the radial peak on time.
pub fn curl_div_probe(div_snaps: &[Snapshot], curl_snaps: &[Snapshot], center: Vec3) -> Result<(f64, f64)> {
    if div_snaps.len() < 3 || curl_snaps.len() < 3 {
        return invalid("curl/div probe needs at least three snapshots of each kind");
    }
    let fit = |snaps: &[Snapshot], use_div: bool| -> Result<f64> {
        let mut ts = Vec::new();
        let mut rs = Vec::new();
        for s in snaps {
            if s.arity != 3 {
                return Err(Error::Mismatch("probe needs vector snapshots".into()));
            }
            let (d, c) = div_curl(&s.grid, &s.field);
            let q: Vec<f64> = if use_div { d.iter().map(|v| v * v).collect() } else { c.iter().map(|v| v.iter().map(|x| x * x).sum()).collect() };
            let r_max = (0..3).map(|a| (s.grid.n[a] as f64 - 1.0) * s.grid.h * 0.5).fold(f64::INFINITY, f64::min) - 2.0 * s.grid.h;
            ts.push(s.t);
            rs.push(radial_peak(&s.grid, &q, center, r_max));
        }
        Ok(regression_slope(&ts, &rs))
    };
    Ok((fit(div_snaps, true)?, fit(curl_snaps, false)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_domain;
    use crate::elastic::ElasticParams;
    use crate::source::{rasterize_source, Bump, BumpKind, SourceDesc};

    #[test]
    fn stencil_is_symmetric_and_annihilates_constants() {
        let p = Physics::Elastic(ElasticParams::new(1.0, 1.0, 1.0).unwrap());
        let st = Stencil::for_physics(&p, 0.1);
        for b in 0..3 {
            let s: f64 = st.taps.iter().filter(|t| t.out == b && t.inp == b).map(|t| t.w).sum();
            assert!(s.abs() < 1e-9);
        }
        for t in &st.taps {
            let mirror = st.taps.iter().find(|m| m.off == t.off.map(|x| -x) && m.out == t.inp && m.inp == t.out).unwrap();
            assert!((mirror.w - t.w).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_source_gives_zero_trace() {
        let d = build_domain(&Shape::unit_ball(), 0.2).unwrap();
        let s = SourcePair::zeros(&d.grid, 1);
        let run = fdtd_scalar_forward(&s, &d, 0.5).unwrap();
        assert!(run.trace.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn scalar_energy_is_conserved() {
        let d = build_domain(&Shape::unit_ball(), 1.0 / 10.0).unwrap();
        let desc = SourceDesc { f0: vec![Bump::gaussian([0.0; 3], 1.0, 0.15)], f1: vec![Bump::gaussian([0.1, 0.0, 0.0], 0.5, 0.15)] };
        let s = rasterize_source(&desc, &d, 1).unwrap();
        let run = fdtd_scalar_forward(&s, &d, 0.6).unwrap();
        let e0 = run.energy[0];
        for e in &run.energy {
            assert!((e - e0).abs() < 1e-9 * e0, "{e} vs {e0}");
        }
    }

    #[test]
    fn elastic_energy_and_reversibility() {
        let d = build_domain(&Shape::unit_ball(), 1.0 / 8.0).unwrap();
        let desc = SourceDesc {
            f0: vec![Bump::gaussian([0.0; 3], 1.0, 0.15).with_kind(BumpKind::Vector { dir: [1.0, 0.5, 0.0] })],
            f1: vec![],
        };
        let s = rasterize_source(&desc, &d, 3).unwrap();
        let p = Physics::Elastic(ElasticParams::new(1.0, 1.0, 1.0).unwrap());
        let run = fdtd_forward(&s, &d, &p, &ForwardOptions::new(0.4)).unwrap();
        let e0 = run.energy[0];
        assert!(run.energy.iter().all(|e| (e - e0).abs() < 1e-9 * e0));
        assert!(reversibility_error(&s, &d, &p, 20).unwrap() < 1e-10);
    }

    #[test]
    fn mls_reproduces_quadratics() {
        let shape = Shape::unit_ball();
        let mesh = BoundaryMesh::build(&shape, 0.1);
        let idx = MeshIndex::new(&mesh);
        let f = |p: Vec3| 1.0 + 0.3 * p[0] - 0.2 * p[1] * p[2];
        let p = geom::normalize([0.3, -0.5, 0.8]);
        let w = mls_weights(&mesh, &idx, &shape, p);
        let v: f64 = w.iter().map(|&(i, w)| w * f(mesh.nodes[i])).sum();
        assert!((v - f(p)).abs() < 2e-3, "{v} {}", f(p));
    }

    #[test]
    fn lagrange_time_interpolation() {
        let mesh = BoundaryMesh::sphere([0.0; 3], 1.0, 4);
        let mut tr = TimeTrace::zeros(&mesh, 1, 0.1, 20);
        for i in 0..4 {
            for n in 0..20 {
                let t = n as f64 * 0.1;
                let o = tr.offset(i, n);
                tr.values[o] = t * t * t - t;
            }
        }
        let mut out = vec![0.0; 4];
        trace_at(&tr, 0.537, &mut out);
        assert!((out[2] - (0.537f64.powi(3) - 0.537)).abs() < 1e-12);
    }
}
