//! Frequency grids and boundary sweeps u(xᵢ, ωⱼ).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::BoundaryMesh;
use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

/// ωⱼ = j·Δω for j = 1..=count; index 0 denotes the static limit ω → 0⁺.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub d_omega: f64,
    pub count: usize,
}

impl FrequencyGrid {
    pub fn new(d_omega: f64, count: usize) -> Result<Self> {
        if !(d_omega > 0.0) || !d_omega.is_finite() {
            return invalid("frequency spacing must be positive");
        }
        if count == 0 {
            return invalid("frequency grid needs at least one positive frequency");
        }
        Ok(FrequencyGrid { d_omega, count })
    }

    /// Δω = π / T_total with enough points to reach `omega_max`.
    pub fn for_band(omega_max: f64, t_total: f64) -> Result<Self> {
        if !(t_total > 0.0) || !(omega_max > 0.0) {
            return invalid("band and window must be positive");
        }
        let d = std::f64::consts::PI / t_total;
        FrequencyGrid::new(d, (omega_max / d - 1e-9).ceil().max(1.0) as usize)
    }

    #[inline]
    pub fn omega(&self, j: usize) -> f64 {
        j as f64 * self.d_omega
    }

    pub fn omega_max(&self) -> f64 {
        self.omega(self.count)
    }

    /// Time window matched to the spacing: Δω = π / T_total.
    pub fn t_total(&self) -> f64 {
        std::f64::consts::PI / self.d_omega
    }

    /// Largest j with ωⱼ ≤ k.
    pub fn index_for(&self, k: f64) -> usize {
        ((k / self.d_omega + 1e-9).floor().max(0.0) as usize).min(self.count)
    }
}

/// Boundary traces on a mesh × frequency grid, `arity` complex values per entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencySweep {
    pub mesh: BoundaryMesh,
    pub grid: FrequencyGrid,
    pub arity: usize,
    /// `[(node·(count+1) + j)·arity + c]`, j = 0 is the static column.
    pub values: Vec<C64>,
    pub has_static: bool,
    /// Tangential gradients, `[((node·(count+1) + j)·arity + c)·2 + t]`.
    pub tangential: Option<Vec<C64>>,
}

impl FrequencySweep {
    pub fn zeros(mesh: &BoundaryMesh, grid: &FrequencyGrid, arity: usize, gradients: bool) -> Self {
        let n = mesh.len() * (grid.count + 1) * arity;
        FrequencySweep {
            mesh: mesh.clone(),
            grid: grid.clone(),
            arity,
            values: vec![C64::new(0.0, 0.0); n],
            has_static: true,
            tangential: if gradients { Some(vec![C64::new(0.0, 0.0); 2 * n]) } else { None },
        }
    }

    pub fn nodes(&self) -> usize {
        self.mesh.len()
    }

    pub fn columns(&self) -> usize {
        self.grid.count + 1
    }

    #[inline]
    pub fn offset(&self, node: usize, j: usize) -> usize {
        (node * self.columns() + j) * self.arity
    }

    #[inline]
    pub fn value(&self, node: usize, j: usize, c: usize) -> C64 {
        self.values[self.offset(node, j) + c]
    }

    pub fn entry(&self, node: usize, j: usize) -> &[C64] {
        let o = self.offset(node, j);
        &self.values[o..o + self.arity]
    }

    /// Σᵢ wᵢ |u(xᵢ, ωⱼ)|².
    pub fn l2_density(&self, j: usize) -> f64 {
        (0..self.nodes())
            .map(|i| self.mesh.weights[i] * self.entry(i, j).iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// Σᵢ wᵢ |∇_τ u(xᵢ, ωⱼ)|².
    pub fn grad_density(&self, j: usize) -> Result<f64> {
        let t = self.tangential.as_ref().ok_or_else(|| Error::Missing("tangential gradients".into()))?;
        let a = self.arity;
        Ok((0..self.nodes())
            .map(|i| {
                let o = 2 * self.offset(i, j);
                self.mesh.weights[i] * t[o..o + 2 * a].iter().map(|v| v.norm_sqr()).sum::<f64>()
            })
            .sum())
    }

    /// Keep frequencies ωⱼ ≤ k.
    pub fn truncated(&self, k: f64) -> Result<Self> {
        let jmax = self.grid.index_for(k);
        if jmax == 0 {
            return invalid(format!("cutoff {k} below the first frequency"));
        }
        let grid = FrequencyGrid { d_omega: self.grid.d_omega, count: jmax };
        let mut out = FrequencySweep::zeros(&self.mesh, &grid, self.arity, self.tangential.is_some());
        out.has_static = self.has_static;
        for i in 0..self.nodes() {
            for j in 0..=jmax {
                let (src, dst) = (self.offset(i, j), out.offset(i, j));
                out.values[dst..dst + self.arity].copy_from_slice(&self.values[src..src + self.arity]);
                if let (Some(t), Some(to)) = (&self.tangential, &mut out.tangential) {
                    to[2 * dst..2 * dst + 2 * self.arity].copy_from_slice(&t[2 * src..2 * src + 2 * self.arity]);
                }
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        if let Some(t) = &mut out.tangential {
            t.iter_mut().for_each(|v| *v *= s);
        }
        out
    }

    pub fn same_layout(&self, other: &FrequencySweep) -> bool {
        self.grid == other.grid && self.arity == other.arity && self.nodes() == other.nodes()
    }

    pub fn sum(&self, other: &FrequencySweep) -> Result<Self> {
        if !self.same_layout(other) {
            return Err(Error::Mismatch("sweeps differ in layout".into()));
        }
        let mut out = self.clone();
        out.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += b);
        match (&mut out.tangential, &other.tangential) {
            (Some(a), Some(b)) => a.iter_mut().zip(b).for_each(|(a, b)| *a += b),
            _ => out.tangential = None,
        }
        Ok(out)
    }

    /// Static column, or the even extrapolation (4u₁ − u₂)/3 when it was not computed.
    pub fn static_entry(&self, node: usize, c: usize) -> C64 {
        if self.has_static || self.grid.count < 2 {
            return self.value(node, 0, c);
        }
        let v = (4.0 * self.value(node, 1, c) - self.value(node, 2, c)) / 3.0;
        C64::new(v.re, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_indexing() {
        let g = FrequencyGrid::for_band(10.0, 8.0).unwrap();
        assert!((g.d_omega - std::f64::consts::PI / 8.0).abs() < 1e-15);
        assert!(g.omega_max() >= 10.0);
        assert_eq!(g.index_for(g.omega(7)), 7);
        assert_eq!(g.index_for(g.omega(7) - 1e-3), 6);
        assert!(FrequencyGrid::new(0.0, 3).is_err());
    }

    #[test]
    fn truncation_keeps_prefix() {
        let mesh = BoundaryMesh::sphere([0.0; 3], 1.0, 10);
        let g = FrequencyGrid::new(0.5, 8).unwrap();
        let mut s = FrequencySweep::zeros(&mesh, &g, 1, false);
        for (n, v) in s.values.iter_mut().enumerate() {
            *v = C64::new(n as f64, -(n as f64));
        }
        let t = s.truncated(2.2).unwrap();
        assert_eq!(t.grid.count, 4);
        for i in 0..mesh.len() {
            for j in 0..=4 {
                assert_eq!(t.value(i, j, 0), s.value(i, j, 0));
            }
        }
    }
}
