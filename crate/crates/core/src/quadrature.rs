//! Quadrature rules: Gauss–Legendre on [0, 1] and endpoint-corrected trapezoids.
//!
//! The trapezoid correction −dx²/12·(f′(b) − f′(a)) uses centered differences at interior
//! samples, so integrals over adjacent grid-aligned pieces add up exactly.

use gauss_quad::legendre::GaussLegendre;

use crate::error::{invalid, Result};

/// Gauss–Legendre nodes and weights mapped to [0, 1].
pub fn gauss_legendre_unit(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let rule = GaussLegendre::new(n).map_err(|e| crate::Error::InvalidParameter(e.to_string()))?;
    let mut pairs: Vec<(f64, f64)> = rule.iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

/// Lagrange interpolation through the given points.
pub fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..xs.len() {
        let mut l = 1.0;
        for j in 0..xs.len() {
            if i != j {
                l *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        s += l * ys[i];
    }
    s
}

/// ∫ over [a, b] of samples `y` on the uniform grid x_j = x0 + j·dx, a and b inside the grid.
pub fn uniform_integral(x0: f64, dx: f64, y: &[f64], a: f64, b: f64) -> Result<f64> {
    let n = y.len();
    if n < 4 {
        return invalid("need at least four samples");
    }
    let last = x0 + (n - 1) as f64 * dx;
    if a < x0 - 1e-12 * dx || b > last + 1e-12 * dx || a > b {
        return invalid("integration limits outside sample range");
    }
    let eps = 1e-9;
    let ja = ((a - x0) / dx - eps).ceil().max(0.0) as usize;
    let jb = (((b - x0) / dx + eps).floor() as usize).min(n - 1);
    if jb <= ja {
        // a and b share one cell
        let j = ja.saturating_sub(1).min(n - 4);
        let xs = [0, 1, 2, 3].map(|t| x0 + (j + t) as f64 * dx);
        let ys = [0, 1, 2, 3].map(|t| y[j + t]);
        return Ok(gl3(&xs, &ys, a, b));
    }
    let inner = &y[ja..=jb];
    let mut s = (inner.iter().sum::<f64>() - 0.5 * (inner[0] + inner[inner.len() - 1])) * dx;
    s += dx * dx / 12.0 * (slope(y, ja, dx) - slope(y, jb, dx));
    let xa = x0 + ja as f64 * dx;
    if xa - a > eps * dx {
        let j = ja.saturating_sub(1).min(n - 4);
        let xs = [0, 1, 2, 3].map(|t| x0 + (j + t) as f64 * dx);
        let ys = [0, 1, 2, 3].map(|t| y[j + t]);
        s += gl3(&xs, &ys, a, xa);
    }
    let xb = x0 + jb as f64 * dx;
    if b - xb > eps * dx {
        let j = jb.saturating_sub(2).min(n - 4);
        let xs = [0, 1, 2, 3].map(|t| x0 + (j + t) as f64 * dx);
        let ys = [0, 1, 2, 3].map(|t| y[j + t]);
        s += gl3(&xs, &ys, xb, b);
    }
    Ok(s)
}

/// f′ at sample j: centered inside, second-order one-sided at the ends.
fn slope(y: &[f64], j: usize, dx: f64) -> f64 {
    let n = y.len();
    if j == 0 {
        (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * dx)
    } else if j == n - 1 {
        (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * dx)
    } else {
        (y[j + 1] - y[j - 1]) / (2.0 * dx)
    }
}

fn gl3(xs: &[f64; 4], ys: &[f64; 4], a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let nodes = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
    let weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    nodes.iter().zip(weights).map(|(t, w)| w * lagrange(xs, ys, mid + half * t)).sum::<f64>() * half
}

/// Least-squares slope of y against x.
pub fn regression_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre_unit(8).unwrap();
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(9)).sum();
        assert!((s - 0.1).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn corrected_trapezoid_is_fourth_order() {
        let f = |x: f64| (1.3 * x).sin() + x * x * x;
        let exact = (1.0 - (1.3f64 * 2.0).cos()) / 1.3 + 4.0;
        let mut errs = Vec::new();
        for n in [17, 33, 65] {
            let dx = 2.0 / (n - 1) as f64;
            let y: Vec<f64> = (0..n).map(|j| f(j as f64 * dx)).collect();
            errs.push((uniform_integral(0.0, dx, &y, 0.0, 2.0).unwrap() - exact).abs());
        }
        assert!(errs[0] / errs[1] > 12.0 && errs[1] / errs[2] > 12.0, "{errs:?}");
    }

    #[test]
    fn aligned_pieces_add_up() {
        let dx = 0.1;
        let y: Vec<f64> = (0..40).map(|j| (-(j as f64 * dx - 1.0).powi(2)).exp()).collect();
        let whole = uniform_integral(0.0, dx, &y, 0.0, 3.9).unwrap();
        let a = uniform_integral(0.0, dx, &y, 0.0, 1.3).unwrap();
        let b = uniform_integral(0.0, dx, &y, 1.3, 3.9).unwrap();
        assert!((a + b - whole).abs() < 1e-14);
    }

    #[test]
    fn off_grid_limits() {
        let dx = 0.05;
        let y: Vec<f64> = (0..60).map(|j| (j as f64 * dx).cos()).collect();
        let v = uniform_integral(0.0, dx, &y, 0.123, 2.71).unwrap();
        let exact = 2.71f64.sin() - 0.123f64.sin();
        assert!((v - exact).abs() < 1e-7);
        let v = uniform_integral(0.0, dx, &y, 1.01, 1.04).unwrap();
        assert!((v - (1.04f64.sin() - 1.01f64.sin())).abs() < 1e-8);
    }
}
