use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureReport {
    pub value: f64,
    pub err_est: f64,
    pub refinements: u32,
}

/// Radial weight multiplying the integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    One,
    R,
    /// r^(d-1)
    Radial(u32),
}

impl Weight {
    pub fn exponent(&self) -> f64 {
        match self {
            Weight::One => 0.0,
            Weight::R => 1.0,
            Weight::Radial(d) => *d as f64 - 1.0,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::R => r,
            Weight::Radial(d) => r.powi(*d as i32 - 1),
        }
    }
}

/// F(r) = int_0^r f(s) w(s) ds at every node. Below the first node f is extended
/// as a power law with exponent `startup_exponent`.
pub fn cumulative_integral(
    f: &[f64],
    grid: &RadialGrid,
    weight: Weight,
    startup_exponent: f64,
) -> Result<(Vec<f64>, QuadratureReport)> {
    let g: Vec<f64> = f.iter().zip(&grid.nodes).map(|(v, &r)| v * weight.eval(r)).collect();
    cumulative(&g, grid, startup_exponent + weight.exponent())
}

/// G(r) = int_0^r g(s) ds with a power-law startup of exponent `exponent` below the first node.
pub fn cumulative(g: &[f64], grid: &RadialGrid, exponent: f64) -> Result<(Vec<f64>, QuadratureReport)> {
    kernel_impl(g, grid, None, Some(exponent))
}

/// int_{r_0}^r g(s) ds, with no contribution from below the first node.
pub fn cumulative_from_first(g: &[f64], grid: &RadialGrid) -> Result<(Vec<f64>, QuadratureReport)> {
    kernel_impl(g, grid, None, None)
}

/// K(r) = int_0^r g(s) exp(S(s) - S(r)) ds, accumulated without forming exp(S) itself.
pub fn cumulative_kernel(g: &[f64], grid: &RadialGrid, shift: &[f64], exponent: f64) -> Result<(Vec<f64>, QuadratureReport)> {
    if shift.len() != grid.len() {
        return Err(Error::InvalidArgument("shift length must match the grid".into()));
    }
    kernel_impl(g, grid, Some(shift), Some(exponent))
}

fn kernel_impl(g: &[f64], grid: &RadialGrid, shift: Option<&[f64]>, exponent: Option<f64>) -> Result<(Vec<f64>, QuadratureReport)> {
    let n = grid.len();
    if g.len() != n {
        return Err(Error::InvalidArgument("integrand length must match the grid".into()));
    }
    if n < 3 {
        return Err(Error::InvalidArgument("cumulative integration needs at least 3 nodes".into()));
    }
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: format!("integrand at r = {}", grid.nodes[i]) });
    }
    let r0 = grid.nodes[0];
    let start = match exponent {
        None => 0.0,
        Some(_) if g[0] == 0.0 => 0.0,
        Some(e) if e <= -1.0 => return Err(Error::StartupDivergence { exponent: e }),
        Some(e) => g[0] * r0 / (e + 1.0),
    };
    let t = grid.coords();
    let h: Vec<f64> = g.iter().zip(grid.jacobian()).map(|(a, j)| a * j).collect();
    let decay = |a: usize, b: usize| match shift {
        Some(s) => (s[a] - s[b]).exp(),
        None => 1.0,
    };
    let step = |k: f64, a: usize, b: usize| {
        let e = decay(a, b);
        k * e + 0.5 * (t[b] - t[a]) * (h[a] * e + h[b])
    };

    // The odd chain starts at node 1, reached through a polynomial through the first nodes.
    let quad1 = {
        let (a, b) = (t[1] - t[0], t[2] - t[1]);
        let uniform = n >= 4 && (b - a).abs() <= 1e-9 * a && (t[3] - t[2] - a).abs() <= 1e-9 * a;
        let (w, m) = if uniform {
            ([9.0 * a / 24.0, 19.0 * a / 24.0, -5.0 * a / 24.0, a / 24.0], 4)
        } else {
            let w0 = a * (a / 3.0 + b / 2.0) / (a + b);
            let w1 = a * (a + 3.0 * b) / (6.0 * b);
            let w2 = -a * a * a / (6.0 * b * (a + b));
            ([w0, w1, w2, 0.0], 3)
        };
        start * decay(0, 1) + (0..m).map(|j| w[j] * h[j] * decay(j, 1)).sum::<f64>()
    };
    let mut fine = vec![0.0; n];
    fine[0] = start;
    for i in 1..n {
        fine[i] = step(fine[i - 1], i - 1, i);
    }
    // Each chain advances over pairs of intervals. The pair integral is the two-step trapezoid value
    // corrected by its difference from the one-step value, weighted for unequal sub-intervals.
    let mut out = vec![0.0; n];
    out[0] = start;
    out[1] = quad1;
    for i in 2..n {
        let (a, b) = (t[i - 1] - t[i - 2], t[i] - t[i - 1]);
        let rho = (a.powi(3) + b.powi(3)) / (a + b).powi(3);
        let two = step(step(0.0, i - 2, i - 1), i - 1, i);
        let one = step(0.0, i - 2, i);
        out[i] = out[i - 2] * decay(i - 2, i) + two + rho / (1.0 - rho) * (two - one);
    }
    let err_est = out.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: format!("cumulative integral at r = {}", grid.nodes[i]) });
    }
    let value = out[n - 1];
    Ok((out, QuadratureReport { value, err_est, refinements: 1 }))
}

/// Second-order finite differences on the nonuniform grid, one-sided at both ends.
pub fn differentiate(f: &[f64], grid: &RadialGrid) -> Vec<f64> {
    let x = &grid.nodes;
    let n = x.len();
    assert!(n >= 3 && f.len() == n, "differentiate needs at least 3 matching nodes");
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let h1 = x[i] - x[i - 1];
        let h2 = x[i + 1] - x[i];
        out[i] = -h2 / (h1 * (h1 + h2)) * f[i - 1] + (h2 - h1) / (h1 * h2) * f[i] + h1 / (h2 * (h1 + h2)) * f[i + 1];
    }
    let (h1, h2) = (x[1] - x[0], x[2] - x[1]);
    out[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * f[0] + (h1 + h2) / (h1 * h2) * f[1] - h1 / (h2 * (h1 + h2)) * f[2];
    let (h1, h2) = (x[n - 2] - x[n - 3], x[n - 1] - x[n - 2]);
    out[n - 1] = (2.0 * h2 + h1) / (h2 * (h1 + h2)) * f[n - 1] - (h1 + h2) / (h1 * h2) * f[n - 2] + h2 / (h1 * (h1 + h2)) * f[n - 3];
    out
}

/// Total of int g over [r_i, r_j] for two nodes, from a cumulative array.
pub fn between(cum: &[f64], i: usize, j: usize) -> f64 {
    cum[j] - cum[i]
}
