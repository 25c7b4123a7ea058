//! Discrete H^s norms through the Fourier symbol (1 + |ξ|²)^s on a
//! zero-padded periodic box.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::domain::Grid3;
use crate::error::{invalid, Error, Result};
use crate::source::SourcePair;

/// Orders for which [`SourceNorms`] stores values.
pub const ORDERS: [i32; 5] = [-1, 0, 1, 2, 3];

/// Periodic box dimensions: twice the lattice in every direction.
pub fn padded_dims(n: [usize; 3]) -> [usize; 3] {
    n.map(|m| 2 * m)
}

fn fft_axis(data: &mut [Complex64], dims: [usize; 3], axis: usize, planner: &mut FftPlanner<f64>) {
    let fft = planner.plan_fft_forward(dims[axis]);
    let stride = match axis {
        0 => dims[1] * dims[2],
        1 => dims[2],
        _ => 1,
    };
    if stride == 1 {
        for line in data.chunks_mut(dims[2]) {
            fft.process(line);
        }
        return;
    }
    let len = dims[axis];
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let outer = data.len() / (len * stride);
    for o in 0..outer {
        for s in 0..stride {
            let base = o * len * stride + s;
            for (t, b) in buf.iter_mut().enumerate() {
                *b = data[base + t * stride];
            }
            fft.process(&mut buf);
            for (t, b) in buf.iter().enumerate() {
                data[base + t * stride] = *b;
            }
        }
    }
}

/// Squared symbol norms of a scalar field given on a whole periodic box.
pub(crate) fn box_norms_sq(dims: [usize; 3], h: f64, mut data: Vec<Complex64>, orders: &[f64]) -> Vec<f64> {
    let total = dims[0] * dims[1] * dims[2];
    let mut planner = FftPlanner::new();
    for axis in 0..3 {
        fft_axis(&mut data, dims, axis, &mut planner);
    }
    let xi2: Vec<Vec<f64>> = (0..3)
        .map(|a| {
            (0..dims[a])
                .map(|m| {
                    let mm = if m <= dims[a] / 2 { m as f64 } else { m as f64 - dims[a] as f64 };
                    let xi = 2.0 * std::f64::consts::PI * mm / (dims[a] as f64 * h);
                    xi * xi
                })
                .collect()
        })
        .collect();
    let norm = h * h * h / total as f64;
    let mut acc = vec![0.0; orders.len()];
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            let base = xi2[0][i] + xi2[1][j];
            for k in 0..dims[2] {
                let p = data[(i * dims[1] + j) * dims[2] + k].norm_sqr() * norm;
                if p == 0.0 {
                    continue;
                }
                let sym = 1.0 + base + xi2[2][k];
                for (a, &s) in acc.iter_mut().zip(orders) {
                    *a += if s == 0.0 { p } else { sym.powf(s) * p };
                }
            }
        }
    }
    acc
}

/// Squared norms Σ (1+|ξ|²)^s |ĝ(ξ)|² of a multi-component field for each order in `orders`.
///
/// `field` is interleaved with `arity` components on `grid`; the transform is normalized
/// so that s = 0 reproduces Σ h³ |g|².
pub fn sobolev_norms_sq(grid: &Grid3, field: &[f64], arity: usize, orders: &[f64]) -> Vec<f64> {
    let dims = padded_dims(grid.n);
    let total = dims[0] * dims[1] * dims[2];
    let mut acc = vec![0.0; orders.len()];
    for c in 0..arity {
        if field.iter().skip(c).step_by(arity).all(|&v| v == 0.0) {
            continue;
        }
        let mut data = vec![Complex64::new(0.0, 0.0); total];
        for i in 0..grid.n[0] {
            for j in 0..grid.n[1] {
                for k in 0..grid.n[2] {
                    let v = field[grid.index(i, j, k) * arity + c];
                    data[(i * dims[1] + j) * dims[2] + k] = Complex64::new(v, 0.0);
                }
            }
        }
        for (a, v) in acc.iter_mut().zip(box_norms_sq(dims, grid.h, data, orders)) {
            *a += v;
        }
    }
    acc
}

/// Discrete ‖g‖₍ₛ₎ for s ∈ [−1, 3].
pub fn sobolev_norm(grid: &Grid3, field: &[f64], arity: usize, s: f64) -> Result<f64> {
    if !(-1.0..=3.0).contains(&s) {
        return invalid(format!("order {s} outside [-1, 3]"));
    }
    if field.len() != grid.len() * arity {
        return Err(Error::Mismatch("field length does not match grid".into()));
    }
    Ok(sobolev_norms_sq(grid, field, arity, &[s])[0].sqrt())
}

/// ‖f0‖₍ₛ₎ and ‖f1‖₍ₛ₎ for s ∈ {−1, 0, 1, 2, 3} where available.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceNorms {
    pub f0: [Option<f64>; 5],
    pub f1: [Option<f64>; 5],
}

fn slot(s: i32) -> Result<usize> {
    ORDERS
        .iter()
        .position(|&o| o == s)
        .ok_or_else(|| Error::InvalidParameter(format!("order {s} not tracked")))
}

impl SourceNorms {
    pub fn compute(src: &SourcePair) -> Self {
        Self::compute_orders(src, &ORDERS)
    }

    pub fn compute_orders(src: &SourcePair, orders: &[i32]) -> Self {
        let ords: Vec<f64> = orders.iter().map(|&s| s as f64).collect();
        let n0 = sobolev_norms_sq(&src.grid, &src.f0, src.arity, &ords);
        let n1 = sobolev_norms_sq(&src.grid, &src.f1, src.arity, &ords);
        let mut out = SourceNorms { f0: [None; 5], f1: [None; 5] };
        for (i, &s) in orders.iter().enumerate() {
            if let Ok(k) = slot(s) {
                out.f0[k] = Some(n0[i].sqrt());
                out.f1[k] = Some(n1[i].sqrt());
            }
        }
        out
    }

    pub fn f0(&self, s: i32) -> Result<f64> {
        self.f0[slot(s)?].ok_or_else(|| Error::Missing(format!("‖f0‖ of order {s}")))
    }

    pub fn f1(&self, s: i32) -> Result<f64> {
        self.f1[slot(s)?].ok_or_else(|| Error::Missing(format!("‖f1‖ of order {s}")))
    }

    pub fn scaled(&self, a: f64) -> Self {
        let m = |v: [Option<f64>; 5]| v.map(|x| x.map(|y| y * a.abs()));
        SourceNorms { f0: m(self.f0), f1: m(self.f1) }
    }

    /// ‖f0‖₀ + ‖f1‖₀
    pub fn m0(&self) -> Result<f64> {
        Ok(self.f0(0)? + self.f1(0)?)
    }

    /// ‖f0‖₁ + ‖f1‖₀
    pub fn m1(&self) -> Result<f64> {
        Ok(self.f0(1)? + self.f1(0)?)
    }

    /// ‖f0‖₂ + ‖f1‖₁
    pub fn m2(&self) -> Result<f64> {
        Ok(self.f0(2)? + self.f1(1)?)
    }

    /// ‖f0‖₂ + ‖f1‖₂
    pub fn m2e(&self) -> Result<f64> {
        Ok(self.f0(2)? + self.f1(2)?)
    }

    /// ‖f0‖₃ + ‖f1‖₃
    pub fn m3(&self) -> Result<f64> {
        Ok(self.f0(3)? + self.f1(3)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, Shape};
    use crate::source::{rasterize_source, Bump, SourceDesc};

    fn small_grid() -> Grid3 {
        Grid3 { origin: [0.0; 3], h: 0.1, n: [6, 5, 7] }
    }

    #[test]
    fn order_zero_is_voxel_l2() {
        let g = small_grid();
        let f: Vec<f64> = (0..g.len()).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.3).collect();
        let direct = (f.iter().map(|v| v * v).sum::<f64>() * g.cell_volume()).sqrt();
        let s = sobolev_norm(&g, &f, 1, 0.0).unwrap();
        assert!((s - direct).abs() < 1e-10 * direct);
    }

    #[test]
    fn single_mode_order_one() {
        let dims = [8, 6, 10];
        let h = 0.3;
        let xi0 = 2.0 * std::f64::consts::PI * 2.0 / (dims[0] as f64 * h);
        let a = 1.7;
        let mut data = Vec::new();
        for i in 0..dims[0] {
            for _ in 0..dims[1] * dims[2] {
                data.push(Complex64::new(a * (xi0 * i as f64 * h).cos(), 0.0));
            }
        }
        let vol = (dims[0] * dims[1] * dims[2]) as f64 * h * h * h;
        // ‖a cos‖₀² = a² vol / 2
        let r = box_norms_sq(dims, h, data, &[0.0, 1.0]);
        assert!((r[0] - a * a * vol / 2.0).abs() < 1e-10 * r[0]);
        assert!((r[1].sqrt() - (a * a * vol / 2.0).sqrt() * (1.0 + xi0 * xi0).sqrt()).abs() < 1e-10 * r[1].sqrt());
    }

    #[test]
    fn monotone_in_order_and_homogeneous() {
        let d = build_domain(&Shape::unit_ball(), 1.0 / 8.0).unwrap();
        let desc = SourceDesc { f0: vec![Bump::gaussian([0.0; 3], 1.0, 0.15)], f1: vec![] };
        let s = rasterize_source(&desc, &d, 1).unwrap();
        let norms = sobolev_norms_sq(&d.grid, &s.f0, 1, &[-1.0, 0.0, 1.0, 2.0, 3.0]);
        for w in norms.windows(2) {
            assert!(w[0] <= w[1]);
        }
        let twice: Vec<f64> = s.f0.iter().map(|v| -3.0 * v).collect();
        let a = sobolev_norm(&d.grid, &s.f0, 1, 1.5).unwrap();
        let b = sobolev_norm(&d.grid, &twice, 1, 1.5).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn order_one_matches_gradient_oracle() {
        let d = build_domain(&Shape::unit_ball(), 1.0 / 24.0).unwrap();
        let desc = SourceDesc { f0: vec![Bump::gaussian([0.0; 3], 1.0, 0.2)], f1: vec![] };
        let s = rasterize_source(&desc, &d, 1).unwrap();
        let g = &d.grid;
        let st = g.strides();
        let mut grad_sq = 0.0;
        for i in 1..g.n[0] - 1 {
            for j in 1..g.n[1] - 1 {
                for k in 1..g.n[2] - 1 {
                    let idx = g.index(i, j, k);
                    for a in 0..3 {
                        let d = (s.f0[idx + st[a]] - s.f0[idx - st[a]]) / (2.0 * g.h);
                        grad_sq += d * d * g.cell_volume();
                    }
                }
            }
        }
        let l2 = sobolev_norm(g, &s.f0, 1, 0.0).unwrap();
        let oracle = (l2 * l2 + grad_sq).sqrt();
        let h1 = sobolev_norm(g, &s.f0, 1, 1.0).unwrap();
        assert!((h1 - oracle).abs() / oracle < 0.05, "{h1} vs {oracle}");
    }

    #[test]
    fn missing_order_is_reported() {
        let d = build_domain(&Shape::unit_ball(), 1.0 / 8.0).unwrap();
        let s = SourcePair::zeros(&d.grid, 1);
        let n = SourceNorms::compute_orders(&s, &[0]);
        assert!(n.f0(0).is_ok());
        assert!(matches!(n.f0(2), Err(Error::Missing(_))));
        assert!(sobolev_norm(&d.grid, &s.f0, 1, 4.0).is_err());
    }
}
