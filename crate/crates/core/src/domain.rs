//! Geometry of Ω, its voxel grid and the boundary quadrature mesh.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geom::{self, Vec3};

/// Admissible domain shapes. All have connected complements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Ball { center: Vec3, radius: f64 },
    #[serde(rename = "box")]
    Cuboid { center: Vec3, half: Vec3 },
    /// Union of overlapping balls.
    BallUnion { centers: Vec<Vec3>, radii: Vec<f64> },
}

impl Shape {
    pub fn unit_ball() -> Self {
        Shape::Ball { center: [0.0; 3], radius: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Degenerate(m.to_string()));
        match self {
            Shape::Ball { radius, .. } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return bad("ball radius must be positive");
                }
            }
            Shape::Cuboid { half, .. } => {
                if half.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
                    return bad("box half-widths must be positive");
                }
            }
            Shape::BallUnion { centers, radii } => {
                if centers.is_empty() || centers.len() != radii.len() {
                    return bad("ball union needs matching, nonempty centers and radii");
                }
                if radii.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
                    return bad("ball union radii must be positive");
                }
                // connectivity through pairwise overlaps
                let n = centers.len();
                let mut seen = vec![false; n];
                let mut stack = vec![0];
                seen[0] = true;
                while let Some(i) = stack.pop() {
                    for j in 0..n {
                        if !seen[j] && geom::dist(centers[i], centers[j]) < radii[i] + radii[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
                if seen.iter().any(|s| !s) {
                    return bad("ball union must be connected");
                }
            }
        }
        Ok(())
    }

    /// Distance to the boundary for interior points (a lower bound for unions),
    /// negative outside.
    pub fn depth(&self, p: Vec3) -> f64 {
        match self {
            Shape::Ball { center, radius } => radius - geom::dist(p, *center),
            Shape::Cuboid { center, half } => {
                let d = geom::sub(p, *center);
                (0..3).map(|a| half[a] - d[a].abs()).fold(f64::INFINITY, f64::min)
            }
            Shape::BallUnion { centers, radii } => centers
                .iter()
                .zip(radii)
                .map(|(c, r)| r - geom::dist(p, *c))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.depth(p) > 0.0
    }

    pub fn bbox(&self) -> (Vec3, Vec3) {
        match self {
            Shape::Ball { center, radius } => (
                geom::sub(*center, [*radius; 3]),
                geom::add(*center, [*radius; 3]),
            ),
            Shape::Cuboid { center, half } => (geom::sub(*center, *half), geom::add(*center, *half)),
            Shape::BallUnion { centers, radii } => {
                let mut lo = [f64::INFINITY; 3];
                let mut hi = [f64::NEG_INFINITY; 3];
                for (c, r) in centers.iter().zip(radii) {
                    for a in 0..3 {
                        lo[a] = lo[a].min(c[a] - r);
                        hi[a] = hi[a].max(c[a] + r);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// sup |x − y| over Ω, from the closed-form geometry.
    pub fn diameter(&self) -> f64 {
        match self {
            Shape::Ball { radius, .. } => 2.0 * radius,
            Shape::Cuboid { half, .. } => 2.0 * geom::norm(*half),
            Shape::BallUnion { centers, radii } => {
                let mut d: f64 = 0.0;
                for i in 0..centers.len() {
                    for j in i..centers.len() {
                        d = d.max(geom::dist(centers[i], centers[j]) + radii[i] + radii[j]);
                    }
                }
                d
            }
        }
    }

    /// Exact surface area where it is known in closed form.
    pub fn exact_area(&self) -> Option<f64> {
        match self {
            Shape::Ball { radius, .. } => Some(4.0 * std::f64::consts::PI * radius * radius),
            Shape::Cuboid { half, .. } => {
                let [a, b, c] = half.map(|x| 2.0 * x);
                Some(2.0 * (a * b + b * c + a * c))
            }
            Shape::BallUnion { .. } => None,
        }
    }

    /// Center and radius of a ball enclosing Ω.
    pub fn enclosing_ball(&self) -> (Vec3, f64) {
        match self {
            Shape::Ball { center, radius } => (*center, *radius),
            Shape::Cuboid { center, half } => (*center, geom::norm(*half)),
            Shape::BallUnion { centers, radii } => {
                let (lo, hi) = self.bbox();
                let c = geom::scale(geom::add(lo, hi), 0.5);
                let r = centers
                    .iter()
                    .zip(radii)
                    .map(|(ci, ri)| geom::dist(c, *ci) + ri)
                    .fold(0.0, f64::max);
                (c, r)
            }
        }
    }

    /// Parameter s ∈ (0, 1] where the segment a + s(b − a) first leaves Ω,
    /// for `a` inside and `b` outside.
    pub fn exit_param(&self, a: Vec3, b: Vec3) -> f64 {
        if let Shape::Ball { center, radius } = self {
            let d = geom::sub(b, a);
            let f = geom::sub(a, *center);
            let qa = geom::dot(d, d);
            let qb = 2.0 * geom::dot(f, d);
            let qc = geom::dot(f, f) - radius * radius;
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
            let s = (-qb + disc.sqrt()) / (2.0 * qa);
            return s.clamp(0.0, 1.0);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            let p = geom::add(a, geom::scale(geom::sub(b, a), mid));
            if self.contains(p) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Outward unit normal at (or near) a boundary point.
    pub fn normal_at(&self, p: Vec3) -> Vec3 {
        match self {
            Shape::Ball { center, .. } => geom::normalize(geom::sub(p, *center)),
            Shape::Cuboid { center, half } => {
                let d = geom::sub(p, *center);
                let mut best = 0;
                let mut gap = f64::INFINITY;
                for a in 0..3 {
                    let g = (half[a] - d[a].abs()).abs();
                    if g < gap {
                        gap = g;
                        best = a;
                    }
                }
                let mut n = [0.0; 3];
                n[best] = d[best].signum();
                n
            }
            Shape::BallUnion { centers, radii } => {
                let i = (0..centers.len())
                    .min_by(|&i, &j| {
                        let gi = (geom::dist(p, centers[i]) - radii[i]).abs();
                        let gj = (geom::dist(p, centers[j]) - radii[j]).abs();
                        gi.total_cmp(&gj)
                    })
                    .unwrap_or(0);
                geom::normalize(geom::sub(p, centers[i]))
            }
        }
    }
}

/// Uniform node lattice, x-major with z fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    pub origin: Vec3,
    pub h: f64,
    pub n: [usize; 3],
}

impl Grid3 {
    /// Lattice centered on `center` covering `extent` with `margin` extra nodes per side.
    pub fn centered(center: Vec3, extent: Vec3, h: f64, margin: usize) -> Self {
        let mut n = [0usize; 3];
        let mut origin = [0.0; 3];
        for a in 0..3 {
            n[a] = (extent[a] / h - 1e-9).ceil().max(1.0) as usize + 2 * margin;
            origin[a] = center[a] - 0.5 * (n[a] as f64 - 1.0) * h;
        }
        Grid3 { origin, h, n }
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n[1] + j) * self.n[2] + k
    }

    #[inline]
    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.n[2];
        let r = idx / self.n[2];
        [r / self.n[1], r % self.n[1], k]
    }

    #[inline]
    pub fn point_ijk(&self, i: usize, j: usize, k: usize) -> Vec3 {
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
            self.origin[2] + k as f64 * self.h,
        ]
    }

    #[inline]
    pub fn point(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.ijk(idx);
        self.point_ijk(i, j, k)
    }

    #[inline]
    pub fn strides(&self) -> [usize; 3] {
        [self.n[1] * self.n[2], self.n[2], 1]
    }

    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }

    /// Integer offset of `other`'s origin in this lattice, if both share spacing and alignment.
    pub fn lattice_offset(&self, other: &Grid3) -> Option<[i64; 3]> {
        if (self.h - other.h).abs() > 1e-12 * self.h {
            return None;
        }
        let mut off = [0i64; 3];
        for a in 0..3 {
            let s = (other.origin[a] - self.origin[a]) / self.h;
            if (s - s.round()).abs() > 1e-6 {
                return None;
            }
            off[a] = s.round() as i64;
        }
        Some(off)
    }

    /// Trilinear interpolation of component `c` of an interleaved field with `arity` components.
    pub fn trilinear(&self, field: &[f64], arity: usize, c: usize, p: Vec3) -> f64 {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let s = ((p[a] - self.origin[a]) / self.h).clamp(0.0, (self.n[a] - 1) as f64 - 1e-12);
            let i = (s.floor() as usize).min(self.n[a].saturating_sub(2));
            base[a] = i;
            frac[a] = s - i as f64;
        }
        let mut v = 0.0;
        for di in 0..2 {
            for dj in 0..2 {
                for dk in 0..2 {
                    let w = (if di == 1 { frac[0] } else { 1.0 - frac[0] })
                        * (if dj == 1 { frac[1] } else { 1.0 - frac[1] })
                        * (if dk == 1 { frac[2] } else { 1.0 - frac[2] });
                    if w != 0.0 {
                        let idx = self.index(base[0] + di, base[1] + dj, base[2] + dk);
                        v += w * field[idx * arity + c];
                    }
                }
            }
        }
        v
    }
}

/// Surface quadrature on ∂Ω.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMesh {
    pub nodes: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub tangents: Vec<[Vec3; 2]>,
}

impl BoundaryMesh {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn from_parts(nodes: Vec<Vec3>, normals: Vec<Vec3>, weights: Vec<f64>) -> Self {
        let tangents = normals.iter().map(|n| geom::tangent_frame(*n)).collect();
        BoundaryMesh { nodes, normals, weights, tangents }
    }

    /// Fibonacci point set on a sphere; equal weights.
    pub fn sphere(center: Vec3, radius: f64, count: usize) -> Self {
        let pts = fibonacci_sphere(count.max(4));
        let w = 4.0 * std::f64::consts::PI * radius * radius / pts.len() as f64;
        let nodes = pts.iter().map(|d| geom::add(center, geom::scale(*d, radius))).collect();
        BoundaryMesh::from_parts(nodes, pts.clone(), vec![w; pts.len()])
    }

    pub fn build(shape: &Shape, spacing: f64) -> Self {
        match shape {
            Shape::Ball { center, radius } => {
                let n = (4.0 * std::f64::consts::PI * radius * radius / (spacing * spacing)).round() as usize;
                BoundaryMesh::sphere(*center, *radius, n)
            }
            Shape::Cuboid { center, half } => {
                let mut nodes = Vec::new();
                let mut normals = Vec::new();
                let mut weights = Vec::new();
                for a in 0..3 {
                    let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                    let nb = ((2.0 * half[b] / spacing).round() as usize).max(1);
                    let nc = ((2.0 * half[c] / spacing).round() as usize).max(1);
                    let (db, dc) = (2.0 * half[b] / nb as f64, 2.0 * half[c] / nc as f64);
                    for side in [-1.0, 1.0] {
                        for ib in 0..nb {
                            for ic in 0..nc {
                                let mut p = *center;
                                p[a] += side * half[a];
                                p[b] += -half[b] + (ib as f64 + 0.5) * db;
                                p[c] += -half[c] + (ic as f64 + 0.5) * dc;
                                let mut n = [0.0; 3];
                                n[a] = side;
                                nodes.push(p);
                                normals.push(n);
                                weights.push(db * dc);
                            }
                        }
                    }
                }
                BoundaryMesh::from_parts(nodes, normals, weights)
            }
            Shape::BallUnion { centers, radii } => {
                let mut nodes = Vec::new();
                let mut normals = Vec::new();
                let mut weights = Vec::new();
                for (i, (c, r)) in centers.iter().zip(radii).enumerate() {
                    let n = (4.0 * std::f64::consts::PI * r * r / (spacing * spacing)).round() as usize;
                    let s = BoundaryMesh::sphere(*c, *r, n);
                    for m in 0..s.len() {
                        let p = s.nodes[m];
                        let covered = centers
                            .iter()
                            .zip(radii)
                            .enumerate()
                            .any(|(j, (cj, rj))| j != i && geom::dist(p, *cj) < rj - 1e-12);
                        if !covered {
                            nodes.push(p);
                            normals.push(s.normals[m]);
                            weights.push(s.weights[m]);
                        }
                    }
                }
                BoundaryMesh::from_parts(nodes, normals, weights)
            }
        }
    }
}

fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            [rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

/// Ω together with its voxelization and boundary mesh.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Domain {
    pub shape: Shape,
    pub h: f64,
    pub grid: Grid3,
    /// Nodes strictly inside Ω.
    pub inside: Vec<bool>,
    pub diameter: f64,
    pub mesh: BoundaryMesh,
}

/// Voxelize `shape` at spacing `h` with a boundary mesh of spacing `2h`.
pub fn build_domain(shape: &Shape, h: f64) -> Result<Domain> {
    build_domain_with_mesh(shape, h, 2.0 * h)
}

pub fn build_domain_with_mesh(shape: &Shape, h: f64, mesh_spacing: f64) -> Result<Domain> {
    if !(h > 0.0) || !h.is_finite() {
        return invalid(format!("voxel spacing must be positive, got {h}"));
    }
    if !(mesh_spacing > 0.0) {
        return invalid("mesh spacing must be positive");
    }
    shape.validate()?;
    let (lo, hi) = shape.bbox();
    let center = geom::scale(geom::add(lo, hi), 0.5);
    let grid = Grid3::centered(center, geom::sub(hi, lo), h, 1);
    let inside: Vec<bool> = (0..grid.len()).map(|i| shape.contains(grid.point(i))).collect();
    if !inside.iter().any(|&b| b) {
        return Err(Error::Degenerate("no voxel inside the domain".into()));
    }
    let mesh = BoundaryMesh::build(shape, mesh_spacing);
    Ok(Domain { shape: shape.clone(), h, grid, inside, diameter: shape.diameter(), mesh })
}

impl Domain {
    /// Required distance between the source support and ∂Ω.
    pub fn standoff(&self) -> f64 {
        2.0 * self.h
    }

    /// |∂Ω|: exact when known, otherwise the mesh quadrature.
    pub fn area(&self) -> f64 {
        self.shape.exact_area().unwrap_or_else(|| self.mesh.area())
    }

    /// Side lengths of the periodic box used for discrete Sobolev norms.
    pub fn embedding_box(&self) -> Vec3 {
        let pad = crate::sobolev::padded_dims(self.grid.n);
        [0, 1, 2].map(|a| pad[a] as f64 * self.h)
    }

    /// Same domain re-voxelized at another spacing, keeping the mesh.
    pub fn with_spacing(&self, h: f64) -> Result<Domain> {
        let mut d = build_domain_with_mesh(&self.shape, h, h)?;
        d.mesh = self.mesh.clone();
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_diameter_and_area() {
        let d = build_domain(&Shape::unit_ball(), 1.0 / 16.0).unwrap();
        assert!((d.diameter - 2.0).abs() <= 2.0 * d.h);
        let area = d.mesh.area();
        assert!((area - 4.0 * std::f64::consts::PI).abs() / (4.0 * std::f64::consts::PI) < 0.01);
    }

    #[test]
    fn cube_diameter() {
        let s = Shape::Cuboid { center: [0.0; 3], half: [0.5; 3] };
        let d = build_domain(&s, 1.0 / 16.0).unwrap();
        assert!((d.diameter - 3f64.sqrt()).abs() <= 2.0 * d.h);
        assert!((d.mesh.area() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_spacing_and_shape() {
        assert!(build_domain(&Shape::unit_ball(), 0.0).is_err());
        assert!(build_domain(&Shape::unit_ball(), -1.0).is_err());
        assert!(build_domain(&Shape::Ball { center: [0.0; 3], radius: 0.0 }, 0.1).is_err());
        let apart = Shape::BallUnion { centers: vec![[0.0; 3], [5.0, 0.0, 0.0]], radii: vec![1.0, 1.0] };
        assert!(build_domain(&apart, 0.1).is_err());
    }

    #[test]
    fn normals_unit_and_outward() {
        for s in [
            Shape::unit_ball(),
            Shape::Cuboid { center: [0.1, 0.0, 0.0], half: [0.5, 0.7, 0.4] },
            Shape::BallUnion { centers: vec![[0.0; 3], [0.8, 0.0, 0.0]], radii: vec![0.6, 0.5] },
        ] {
            let m = BoundaryMesh::build(&s, 0.1);
            for (x, n) in m.nodes.iter().zip(&m.normals) {
                assert!((geom::norm(*n) - 1.0).abs() < 1e-12);
                assert!(!s.contains(geom::add(*x, geom::scale(*n, 1e-6))));
            }
            for (n, t) in m.normals.iter().zip(&m.tangents) {
                assert!(geom::dot(*n, t[0]).abs() < 1e-12 && geom::dot(*n, t[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn brute_force_diameter_of_union() {
        let s = Shape::BallUnion { centers: vec![[0.0; 3], [0.7, 0.2, 0.0]], radii: vec![0.6, 0.4] };
        let m = BoundaryMesh::build(&s, 0.02);
        let mut d: f64 = 0.0;
        for a in &m.nodes {
            for b in m.nodes.iter().step_by(7) {
                d = d.max(geom::dist(*a, *b));
            }
        }
        assert!((d - s.diameter()).abs() < 0.02);
    }

    #[test]
    fn exit_param_matches_bisection() {
        let s = Shape::unit_ball();
        let a = [0.2, 0.3, 0.1];
        let b = [1.3, 0.9, -0.2];
        let t = s.exit_param(a, b);
        let p = geom::add(a, geom::scale(geom::sub(b, a), t));
        assert!((geom::norm(p) - 1.0).abs() < 1e-12);
        let u = Shape::BallUnion { centers: vec![[0.0; 3]], radii: vec![1.0] };
        assert!((u.exit_param(a, b) - t).abs() < 1e-12);
    }

    #[test]
    fn grid_index_round_trip() {
        let g = Grid3 { origin: [0.0; 3], h: 0.5, n: [3, 4, 5] };
        for idx in 0..g.len() {
            let [i, j, k] = g.ijk(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
    }
}
