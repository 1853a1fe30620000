//! Finite element fields: the C¹ Hermite space and the Lagrange space.

use crate::elements::{c1_eval, C1Shape, LagrangeBasis, C1_LOCAL_DOFS, C1_NODE_DOFS};
use crate::error::{Error, Result};
use crate::mesh::{Location, Mesh, Point};

/// Global C¹ dofs of a cell, in local order.
pub fn c1_cell_dofs(mesh: &Mesh, cell: usize) -> [usize; C1_LOCAL_DOFS] {
    let nodes = mesh.cell_nodes(cell);
    std::array::from_fn(|l| C1_NODE_DOFS * nodes[l / C1_NODE_DOFS] + l % C1_NODE_DOFS)
}

pub fn c1_num_dofs(mesh: &Mesh) -> usize {
    C1_NODE_DOFS * mesh.num_nodes()
}

/// Number of Lagrange dofs per axis, `k * n + 1`.
pub fn lagrange_axis_len(n: usize, k: usize) -> usize {
    k * n + 1
}

pub fn lagrange_num_dofs(mesh: &Mesh, k: usize) -> usize {
    lagrange_axis_len(mesh.nx, k) * lagrange_axis_len(mesh.ny, k)
}

/// Global Lagrange dofs of a cell, lexicographic local order.
pub fn lagrange_cell_dofs(mesh: &Mesh, k: usize, cell: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity((k + 1) * (k + 1));
    lagrange_cell_dofs_into(mesh, k, cell, &mut out);
    out
}

pub fn lagrange_cell_dofs_into(mesh: &Mesh, k: usize, cell: usize, out: &mut Vec<usize>) {
    out.clear();
    let (i, j) = mesh.cell_ij(cell);
    let row = lagrange_axis_len(mesh.nx, k);
    for b in 0..=k {
        for a in 0..=k {
            out.push((k * j + b) * row + k * i + a);
        }
    }
}

/// Pointwise value, gradient and Hessian of a C¹ field.
pub type C1Value = C1Shape;

/// A function in the Bogner–Fox–Schmit space. Coefficients are stored
/// node-major: `[ψ, ψ_x, ψ_y, ψ_xy]` at each mesh node.
#[derive(Clone, Debug, PartialEq)]
pub struct C1Field {
    pub mesh: Mesh,
    pub coeffs: Vec<f64>,
}

impl C1Field {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self { mesh: mesh.clone(), coeffs: vec![0.0; c1_num_dofs(mesh)] }
    }

    pub fn from_coeffs(mesh: &Mesh, coeffs: Vec<f64>) -> Result<Self> {
        let n = c1_num_dofs(mesh);
        if coeffs.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: coeffs.len() });
        }
        Ok(Self { mesh: mesh.clone(), coeffs })
    }

    /// Hermite interpolant from nodal `[f, f_x, f_y, f_xy]`.
    pub fn interpolate(mesh: &Mesh, f: impl Fn(Point) -> [f64; 4]) -> Self {
        let mut coeffs = Vec::with_capacity(c1_num_dofs(mesh));
        for node in 0..mesh.num_nodes() {
            coeffs.extend_from_slice(&f(mesh.node_coords(node)));
        }
        Self { mesh: mesh.clone(), coeffs }
    }

    /// The constant function `c`.
    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self::interpolate(mesh, |_| [c, 0.0, 0.0, 0.0])
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn cell_coeffs(&self, cell: usize) -> [f64; C1_LOCAL_DOFS] {
        let dofs = c1_cell_dofs(&self.mesh, cell);
        std::array::from_fn(|l| self.coeffs[dofs[l]])
    }

    pub fn eval_local(&self, cell: usize, local: Point) -> C1Value {
        let table = c1_eval(local, self.mesh.hx, self.mesh.hy);
        combine(&table, &self.cell_coeffs(cell))
    }

    pub fn eval(&self, p: Point) -> Result<C1Value> {
        match self.mesh.locate(p) {
            Location::Inside { cell, local } => Ok(self.eval_local(cell, local)),
            Location::Outside => Err(Error::OutsideDomain(p[0], p[1])),
        }
    }

    /// Adds the constant `c` (shifts the value dofs only).
    pub fn add_constant(&mut self, c: f64) {
        for v in self.coeffs.iter_mut().step_by(C1_NODE_DOFS) {
            *v += c;
        }
    }
}

/// Σ_j c_j · shape_j.
pub fn combine(table: &[C1Shape; C1_LOCAL_DOFS], coeffs: &[f64; C1_LOCAL_DOFS]) -> C1Value {
    let mut out = C1Shape::default();
    for (s, &c) in table.iter().zip(coeffs) {
        out.value += c * s.value;
        out.grad[0] += c * s.grad[0];
        out.grad[1] += c * s.grad[1];
        out.hess[0] += c * s.hess[0];
        out.hess[1] += c * s.hess[1];
        out.hess[2] += c * s.hess[2];
    }
    out
}

/// A function in the continuous tensor Lagrange space of degree `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangeField {
    pub mesh: Mesh,
    pub degree: usize,
    pub coeffs: Vec<f64>,
}

impl LagrangeField {
    pub fn zeros(mesh: &Mesh, degree: usize) -> Result<Self> {
        LagrangeBasis::new(degree)?;
        Ok(Self { mesh: mesh.clone(), degree, coeffs: vec![0.0; lagrange_num_dofs(mesh, degree)] })
    }

    pub fn from_coeffs(mesh: &Mesh, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        LagrangeBasis::new(degree)?;
        let n = lagrange_num_dofs(mesh, degree);
        if coeffs.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: coeffs.len() });
        }
        Ok(Self { mesh: mesh.clone(), degree, coeffs })
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: &Mesh, degree: usize, f: impl Fn(Point) -> f64) -> Result<Self> {
        let mut field = Self::zeros(mesh, degree)?;
        for (i, c) in field.coeffs.iter_mut().enumerate() {
            *c = f(dof_coords(mesh, degree, i));
        }
        Ok(field)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn dof_coords(&self, dof: usize) -> Point {
        dof_coords(&self.mesh, self.degree, dof)
    }

    /// True when the dof sits on the domain boundary.
    pub fn is_boundary_dof(&self, dof: usize) -> bool {
        is_boundary_lagrange_dof(&self.mesh, self.degree, dof)
    }

    pub fn eval_local(&self, cell: usize, local: Point) -> f64 {
        let k = self.degree;
        let basis = LagrangeBasis::new(k).expect("degree validated at construction");
        let mut vals = [0.0; 16];
        basis.values_into(local, &mut vals);
        let (i, j) = self.mesh.cell_ij(cell);
        let row = lagrange_axis_len(self.mesh.nx, k);
        let mut s = 0.0;
        for b in 0..=k {
            for a in 0..=k {
                s += vals[b * (k + 1) + a] * self.coeffs[(k * j + b) * row + k * i + a];
            }
        }
        s
    }

    pub fn eval(&self, p: Point) -> Result<f64> {
        match self.mesh.locate(p) {
            Location::Inside { cell, local } => Ok(self.eval_local(cell, local)),
            Location::Outside => Err(Error::OutsideDomain(p[0], p[1])),
        }
    }

    /// Value and physical gradient.
    pub fn eval_with_gradient(&self, p: Point) -> Result<(f64, [f64; 2])> {
        let Location::Inside { cell, local } = self.mesh.locate(p) else {
            return Err(Error::OutsideDomain(p[0], p[1]));
        };
        let basis = LagrangeBasis::new(self.degree)?;
        let table = basis.eval(local);
        let dofs = lagrange_cell_dofs(&self.mesh, self.degree, cell);
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for (s, &d) in table.iter().zip(&dofs) {
            let c = self.coeffs[d];
            v += c * s.value;
            g[0] += c * s.grad[0] / self.mesh.hx;
            g[1] += c * s.grad[1] / self.mesh.hy;
        }
        Ok((v, g))
    }

    pub fn min_dof(&self) -> f64 {
        self.coeffs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_dof(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Physical coordinates of Lagrange dof `dof` for degree `k`.
pub fn dof_coords(mesh: &Mesh, k: usize, dof: usize) -> Point {
    let row = lagrange_axis_len(mesh.nx, k);
    let (ix, iy) = (dof % row, dof / row);
    let coord = |idx: usize, n: usize, lo: f64, hi: f64, h: f64| {
        if idx == k * n {
            hi
        } else {
            lo + (idx / k) as f64 * h + (idx % k) as f64 * h / k as f64
        }
    };
    let d = &mesh.domain;
    [coord(ix, mesh.nx, d.xmin, d.xmax, mesh.hx), coord(iy, mesh.ny, d.ymin, d.ymax, mesh.hy)]
}

pub fn is_boundary_lagrange_dof(mesh: &Mesh, k: usize, dof: usize) -> bool {
    let row = lagrange_axis_len(mesh.nx, k);
    let (ix, iy) = (dof % row, dof / row);
    ix == 0 || iy == 0 || ix == k * mesh.nx || iy == k * mesh.ny
}
