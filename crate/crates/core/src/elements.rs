//! Reference-cell shape functions.
//!
//! [`c1_eval`] gives the 16 Bogner–Fox–Schmit bicubic Hermite functions of a
//! rectangle. The local dof ordering is node-major, `4 * node + kind`, with
//! nodes counterclockwise from lower-left and kinds `value, ∂x, ∂y, ∂xy`.
//! Derivative dofs are the physical derivatives, so the shapes carry the
//! cell sizes `hx`, `hy`, and every returned derivative is physical.
//!
//! [`LagrangeBasis`] is the tensor Lagrange family of degree `k` on the
//! equispaced `(k+1)²` lattice, ordered lexicographically (x fastest).

use crate::error::{Error, Result};
use crate::mesh::Point;

/// Number of BFS shape functions per cell.
pub const C1_LOCAL_DOFS: usize = 16;
/// Hermite dofs per node.
pub const C1_NODE_DOFS: usize = 4;

/// Local node positions of a cell, counterclockwise from lower-left.
pub const CORNERS: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

/// Hermite dof kinds as `(x-derivative order, y-derivative order)`.
pub const DOF_KINDS: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

/// Value, gradient and Hessian `[xx, xy, yy]` of one shape function.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct C1Shape {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [f64; 3],
}

impl C1Shape {
    pub fn laplacian(&self) -> f64 {
        self.hess[0] + self.hess[2]
    }
}

/// The four cubic Hermite functions on `[0, 1]` scaled to an interval of
/// length `h`, ordered `[value@0, slope@0, value@1, slope@1]`. Each entry
/// holds the function and its first three physical derivatives.
pub fn hermite_1d(s: f64, h: f64) -> [[f64; 4]; 4] {
    let (s2, s3) = (s * s, s * s * s);
    let (ih, ih2, ih3) = (1.0 / h, 1.0 / (h * h), 1.0 / (h * h * h));
    [
        [1.0 - 3.0 * s2 + 2.0 * s3, (-6.0 * s + 6.0 * s2) * ih, (-6.0 + 12.0 * s) * ih2, 12.0 * ih3],
        [h * (s - 2.0 * s2 + s3), 1.0 - 4.0 * s + 3.0 * s2, (-4.0 + 6.0 * s) * ih, 6.0 * ih2],
        [3.0 * s2 - 2.0 * s3, (6.0 * s - 6.0 * s2) * ih, (6.0 - 12.0 * s) * ih2, -12.0 * ih3],
        [h * (-s2 + s3), -2.0 * s + 3.0 * s2, (-2.0 + 6.0 * s) * ih, 6.0 * ih2],
    ]
}

/// All 16 BFS shapes at a reference point of a cell of size `hx × hy`.
pub fn c1_eval(local: Point, hx: f64, hy: f64) -> [C1Shape; C1_LOCAL_DOFS] {
    let hxs = hermite_1d(local[0], hx);
    let hys = hermite_1d(local[1], hy);
    let mut out = [C1Shape::default(); C1_LOCAL_DOFS];
    for (a, &(ex, ey)) in CORNERS.iter().enumerate() {
        for (d, &(kx, ky)) in DOF_KINDS.iter().enumerate() {
            let fx = &hxs[2 * ex + kx];
            let fy = &hys[2 * ey + ky];
            out[C1_NODE_DOFS * a + d] = C1Shape {
                value: fx[0] * fy[0],
                grad: [fx[1] * fy[0], fx[0] * fy[1]],
                hess: [fx[2] * fy[0], fx[1] * fy[1], fx[0] * fy[2]],
            };
        }
    }
    out
}

/// Third derivatives `[xxx, xxy, xyy, yyy]` of the 16 BFS shapes.
pub fn c1_third_derivatives(local: Point, hx: f64, hy: f64) -> [[f64; 4]; C1_LOCAL_DOFS] {
    let hxs = hermite_1d(local[0], hx);
    let hys = hermite_1d(local[1], hy);
    let mut out = [[0.0; 4]; C1_LOCAL_DOFS];
    for (a, &(ex, ey)) in CORNERS.iter().enumerate() {
        for (d, &(kx, ky)) in DOF_KINDS.iter().enumerate() {
            let fx = &hxs[2 * ex + kx];
            let fy = &hys[2 * ey + ky];
            out[C1_NODE_DOFS * a + d] =
                [fx[3] * fy[0], fx[2] * fy[1], fx[1] * fy[2], fx[0] * fy[3]];
        }
    }
    out
}

/// Value and reference-coordinate gradient of a Lagrange shape.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LagrangeShape {
    pub value: f64,
    pub grad: [f64; 2],
}

/// Tensor-product nodal basis of degree `k ∈ {1, 2, 3}` on `[0, 1]²`.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangeBasis {
    degree: usize,
}

impl LagrangeBasis {
    pub fn new(degree: usize) -> Result<Self> {
        if !(1..=3).contains(&degree) {
            return Err(Error::UnsupportedDegree(degree));
        }
        Ok(Self { degree })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `(k + 1)²`.
    pub fn len(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Reference coordinates of local node `a`.
    pub fn node(&self, a: usize) -> Point {
        let k = self.degree;
        [(a % (k + 1)) as f64 / k as f64, (a / (k + 1)) as f64 / k as f64]
    }

    /// Values and reference gradients of all shapes at `local`.
    pub fn eval(&self, local: Point) -> Vec<LagrangeShape> {
        let mut out = vec![LagrangeShape::default(); self.len()];
        self.eval_into(local, &mut out);
        out
    }

    pub fn eval_into(&self, local: Point, out: &mut [LagrangeShape]) {
        let k = self.degree;
        let mut lx = [[0.0; 2]; 4];
        let mut ly = [[0.0; 2]; 4];
        lagrange_1d(k, local[0], &mut lx);
        lagrange_1d(k, local[1], &mut ly);
        for b in 0..=k {
            for a in 0..=k {
                out[b * (k + 1) + a] = LagrangeShape {
                    value: lx[a][0] * ly[b][0],
                    grad: [lx[a][1] * ly[b][0], lx[a][0] * ly[b][1]],
                };
            }
        }
    }

    /// Shape values only, written into `out`.
    pub fn values_into(&self, local: Point, out: &mut [f64]) {
        let k = self.degree;
        let mut lx = [[0.0; 2]; 4];
        let mut ly = [[0.0; 2]; 4];
        lagrange_1d(k, local[0], &mut lx);
        lagrange_1d(k, local[1], &mut ly);
        for b in 0..=k {
            for a in 0..=k {
                out[b * (k + 1) + a] = lx[a][0] * ly[b][0];
            }
        }
    }
}

/// Equispaced 1-D Lagrange polynomials of degree `k` and their derivatives.
fn lagrange_1d(k: usize, s: f64, out: &mut [[f64; 2]; 4]) {
    let nodes: [f64; 4] = std::array::from_fn(|i| i as f64 / k as f64);
    for i in 0..=k {
        let mut value = 1.0;
        let mut deriv = 0.0;
        for m in 0..=k {
            if m == i {
                continue;
            }
            let denom = nodes[i] - nodes[m];
            let factor = (s - nodes[m]) / denom;
            deriv = deriv * factor + value / denom;
            value *= factor;
        }
        out[i] = [value, deriv];
    }
}

/// Convenience wrapper: the `(k+1)²` shapes of degree `k` at `local`.
pub fn lagrange_eval(k: usize, local: Point) -> Result<Vec<LagrangeShape>> {
    Ok(LagrangeBasis::new(k)?.eval(local))
}
