//! Gauss–Legendre rules on the unit interval and the unit square.

use crate::error::{Error, Result};
use crate::mesh::Point;

/// Default points per axis for assembly (exact to degree 7 per axis).
pub const DEFAULT_ORDER: usize = 4;
/// Points per axis for error norms.
pub const NORM_ORDER: usize = 5;

/// One-dimensional rule on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussRule1d {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule1d {
    pub fn new(n: usize) -> Result<Self> {
        if !(1..=10).contains(&n) {
            return Err(Error::QuadratureOrder(n));
        }
        let (points, weights) = gauss_legendre_unit(n);
        Ok(Self { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Tensor-product rule on `[0, 1]²`; weights sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub per_axis: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Tensor Gauss rule with `n` points per axis, `1 <= n <= 10`.
/// Points are ordered with x varying fastest.
pub fn gauss_rule(n: usize) -> Result<QuadratureRule> {
    let g = GaussRule1d::new(n)?;
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            points.push([g.points[i], g.points[j]]);
            weights.push(g.weights[i] * g.weights[j]);
        }
    }
    Ok(QuadratureRule { points, weights, per_axis: n })
}

/// Nodes and weights on `[0, 1]` by Newton iteration on the Legendre
/// polynomial, for any `n >= 1`.
pub(crate) fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess for the k-th largest root on [-1, 1]
        let mut z = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wk = 2.0 / ((1.0 - z * z) * dp * dp);
        // map [-1, 1] -> [0, 1], ascending order
        x[k] = 0.5 * (1.0 - z);
        x[n - 1 - k] = 0.5 * (1.0 + z);
        w[k] = 0.5 * wk;
        w[n - 1 - k] = 0.5 * wk;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.5;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}
