//! Global operators and functionals on the C¹ space and the Lagrange space.
//!
//! The mesh is uniform, so the reference shape tables at the quadrature
//! points are identical for every cell and are computed once per space.
//! Element contributions are scattered into a precomputed CSR pattern in
//! cell order, which fixes the floating-point summation order.

use crate::elements::{c1_eval, C1Shape, LagrangeBasis, LagrangeShape, C1_LOCAL_DOFS};
use crate::error::Result;
use crate::fields::{
    c1_cell_dofs, c1_num_dofs, combine, is_boundary_lagrange_dof, lagrange_cell_dofs, lagrange_num_dofs,
    C1Field, LagrangeField,
};
use crate::mesh::{Mesh, Point, Side};
use crate::quadrature::{gauss_rule, GaussRule1d, QuadratureRule, DEFAULT_ORDER};
use crate::sparse::SparseMatrix;

/// Points per edge for boundary integrals (exact to degree 9).
const EDGE_ORDER: usize = 5;
const C1_PAIRS: usize = C1_LOCAL_DOFS * C1_LOCAL_DOFS;

/// Cofactor matrix of a 2×2 Hessian `[xx, xy, yy]`:
/// `Φ = [[ψ_yy, −ψ_xy], [−ψ_xy, ψ_xx]]`, stored as `[Φ11, Φ12, Φ22]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CofactorEval {
    pub phi: [f64; 3],
}

impl CofactorEval {
    pub fn from_hessian(hess: [f64; 3]) -> Self {
        Self { phi: [hess[2], -hess[1], hess[0]] }
    }

    pub fn det(&self) -> f64 {
        self.phi[0] * self.phi[2] - self.phi[1] * self.phi[1]
    }

    pub fn trace(&self) -> f64 {
        self.phi[0] + self.phi[2]
    }

    /// `Φ v`.
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.phi[0] * v[0] + self.phi[1] * v[1], self.phi[1] * v[0] + self.phi[2] * v[1]]
    }

    /// `Φ : H` for a symmetric `H = [xx, xy, yy]`.
    pub fn contract(&self, h: [f64; 3]) -> f64 {
        self.phi[0] * h[0] + 2.0 * self.phi[1] * h[1] + self.phi[2] * h[2]
    }
}

/// `det(D²ψ)` from `[xx, xy, yy]`.
pub fn hessian_det(h: [f64; 3]) -> f64 {
    h[0] * h[2] - h[1] * h[1]
}

fn edge_local(side: Side, s: f64) -> Point {
    match side {
        Side::Bottom => [s, 0.0],
        Side::Right => [1.0, s],
        Side::Top => [s, 1.0],
        Side::Left => [0.0, s],
    }
}

/// Builds a CSR pattern for per-cell dof lists and the position of every
/// local `(i, j)` pair in it.
fn build_pattern(n: usize, cells: impl Iterator<Item = Vec<usize>>) -> (SparseMatrix, Vec<Vec<u32>>) {
    let cells: Vec<Vec<usize>> = cells.collect();
    let mut trip = Vec::new();
    for dofs in &cells {
        for &r in dofs {
            for &c in dofs {
                trip.push((r, c, 0.0));
            }
        }
    }
    let pattern = SparseMatrix::from_triplets(n, &trip).expect("cell dofs are in range");
    let positions = cells
        .iter()
        .map(|dofs| {
            let mut pos = Vec::with_capacity(dofs.len() * dofs.len());
            for &r in dofs {
                let row = &pattern.col_idx()[pattern.row_ptr()[r]..pattern.row_ptr()[r + 1]];
                for &c in dofs {
                    let k = row.binary_search(&c).expect("pattern contains cell pairs");
                    pos.push((pattern.row_ptr()[r] + k) as u32);
                }
            }
            pos
        })
        .collect();
    (pattern, positions)
}

/// The Bogner–Fox–Schmit space on a mesh with its quadrature tables.
#[derive(Clone, Debug)]
pub struct C1Space {
    mesh: Mesh,
    quad: QuadratureRule,
    tables: Vec<[C1Shape; C1_LOCAL_DOFS]>,
    /// quadrature weight times cell area
    weights: Vec<f64>,
    edge_rule: GaussRule1d,
    pattern: SparseMatrix,
    positions: Vec<Vec<u32>>,
    mean: Vec<f64>,
}

impl C1Space {
    pub fn new(mesh: &Mesh) -> Self {
        Self::with_order(mesh, DEFAULT_ORDER).expect("default order is valid")
    }

    pub fn with_order(mesh: &Mesh, n_quad: usize) -> Result<Self> {
        let quad = gauss_rule(n_quad)?;
        let area = mesh.hx * mesh.hy;
        let tables = quad.points.iter().map(|&p| c1_eval(p, mesh.hx, mesh.hy)).collect();
        let weights = quad.weights.iter().map(|w| w * area).collect();
        let (pattern, positions) = build_pattern(
            c1_num_dofs(mesh),
            (0..mesh.num_cells()).map(|c| c1_cell_dofs(mesh, c).to_vec()),
        );
        let mut space = Self {
            mesh: mesh.clone(),
            quad,
            tables,
            weights,
            edge_rule: GaussRule1d::new(EDGE_ORDER)?,
            pattern,
            positions,
            mean: Vec::new(),
        };
        space.mean = space.load(|_| 1.0);
        Ok(space)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quad
    }

    pub fn num_dofs(&self) -> usize {
        self.pattern.dim()
    }

    /// Physical quadrature points of a cell.
    pub fn quad_points(&self, cell: usize) -> impl Iterator<Item = Point> + '_ {
        self.quad.points.iter().map(move |&p| self.mesh.map_to_global(cell, p))
    }

    /// `(1, φ_i)` for every dof.
    pub fn mean_vector(&self) -> &[f64] {
        &self.mean
    }

    /// `(ψ, 1)`.
    pub fn integral(&self, psi: &C1Field) -> f64 {
        crate::sparse::dot(&self.mean, &psi.coeffs)
    }

    /// Values, gradients and Hessians of `psi` at every quadrature point,
    /// cell-major.
    pub fn evaluate(&self, psi: &C1Field) -> Vec<C1Shape> {
        let nq = self.tables.len();
        let mut out = Vec::with_capacity(self.mesh.num_cells() * nq);
        for cell in 0..self.mesh.num_cells() {
            let c = psi.cell_coeffs(cell);
            out.extend(self.tables.iter().map(|t| combine(t, &c)));
        }
        out
    }

    fn assemble_matrix(&self, mut kernel: impl FnMut(usize, usize, &[C1Shape; C1_LOCAL_DOFS], f64, &mut [f64; C1_PAIRS])) -> SparseMatrix {
        let mut m = self.pattern.clone();
        let values = m.values_mut();
        let mut local = [0.0; C1_PAIRS];
        for cell in 0..self.mesh.num_cells() {
            local.fill(0.0);
            for (q, (t, &w)) in self.tables.iter().zip(&self.weights).enumerate() {
                kernel(cell, q, t, w, &mut local);
            }
            for (k, &pos) in self.positions[cell].iter().enumerate() {
                values[pos as usize] += local[k];
            }
        }
        m
    }

    /// `(Δφ_j, Δφ_i)`.
    pub fn biharmonic(&self) -> SparseMatrix {
        self.assemble_matrix(|_, _, t, w, local| {
            let lap: [f64; C1_LOCAL_DOFS] = std::array::from_fn(|i| t[i].laplacian());
            for i in 0..C1_LOCAL_DOFS {
                let wi = w * lap[i];
                for j in 0..C1_LOCAL_DOFS {
                    local[i * C1_LOCAL_DOFS + j] += wi * lap[j];
                }
            }
        })
    }

    /// `(∇φ_j, ∇φ_i)`.
    pub fn stiffness(&self) -> SparseMatrix {
        self.assemble_matrix(|_, _, t, w, local| {
            for i in 0..C1_LOCAL_DOFS {
                for j in 0..C1_LOCAL_DOFS {
                    local[i * C1_LOCAL_DOFS + j] +=
                        w * (t[i].grad[0] * t[j].grad[0] + t[i].grad[1] * t[j].grad[1]);
                }
            }
        })
    }

    /// `(φ_j, φ_i)`.
    pub fn mass(&self) -> SparseMatrix {
        self.assemble_matrix(|_, _, t, w, local| {
            for i in 0..C1_LOCAL_DOFS {
                for j in 0..C1_LOCAL_DOFS {
                    local[i * C1_LOCAL_DOFS + j] += w * t[i].value * t[j].value;
                }
            }
        })
    }

    /// `ε(Δφ_j, Δφ_i) + (Φ∇φ_j, ∇φ_i)` with `Φ = cof(D²ψ)` at each
    /// quadrature point.
    pub fn b_matrix(&self, psi: &C1Field, eps: f64) -> SparseMatrix {
        let nq = self.tables.len();
        let hess: Vec<[f64; 3]> = self.evaluate(psi).iter().map(|v| v.hess).collect();
        self.assemble_matrix(|cell, q, t, w, local| {
            let cof = CofactorEval::from_hessian(hess[cell * nq + q]);
            let lap: [f64; C1_LOCAL_DOFS] = std::array::from_fn(|i| t[i].laplacian());
            let pg: [[f64; 2]; C1_LOCAL_DOFS] = std::array::from_fn(|j| cof.apply(t[j].grad));
            for i in 0..C1_LOCAL_DOFS {
                let g = t[i].grad;
                for j in 0..C1_LOCAL_DOFS {
                    local[i * C1_LOCAL_DOFS + j] +=
                        w * (eps * lap[i] * lap[j] + pg[j][0] * g[0] + pg[j][1] * g[1]);
                }
            }
        })
    }

    /// `(Φ : D²φ_j, φ_i)`: the non-integrated form of the cofactor term.
    pub fn cofactor_hessian_matrix(&self, psi: &C1Field) -> SparseMatrix {
        let nq = self.tables.len();
        let hess: Vec<[f64; 3]> = self.evaluate(psi).iter().map(|v| v.hess).collect();
        self.assemble_matrix(|cell, q, t, w, local| {
            let cof = CofactorEval::from_hessian(hess[cell * nq + q]);
            for i in 0..C1_LOCAL_DOFS {
                for j in 0..C1_LOCAL_DOFS {
                    local[i * C1_LOCAL_DOFS + j] += w * cof.contract(t[j].hess) * t[i].value;
                }
            }
        })
    }

    /// `∮ (Φ∇φ_j · ν) φ_i ds` over the domain boundary. This is the term
    /// dropped when the cofactor form is integrated by parts; it vanishes
    /// when `ψ` has zero normal derivative and `φ_j` is in the constrained
    /// space.
    pub fn boundary_cofactor_matrix(&self, psi: &C1Field) -> SparseMatrix {
        let mut trip = Vec::new();
        for e in self.mesh.boundary_edges() {
            let len = match e.side {
                Side::Bottom | Side::Top => self.mesh.hx,
                Side::Left | Side::Right => self.mesh.hy,
            };
            let nu = e.side.normal();
            let dofs = c1_cell_dofs(&self.mesh, e.cell);
            let coeffs = psi.cell_coeffs(e.cell);
            let mut local = [0.0; C1_PAIRS];
            for (&s, &w) in self.edge_rule.points.iter().zip(&self.edge_rule.weights) {
                let t = c1_eval(edge_local(e.side, s), self.mesh.hx, self.mesh.hy);
                let cof = CofactorEval::from_hessian(combine(&t, &coeffs).hess);
                for j in 0..C1_LOCAL_DOFS {
                    let pg = cof.apply(t[j].grad);
                    let flux = w * len * (pg[0] * nu[0] + pg[1] * nu[1]);
                    for i in 0..C1_LOCAL_DOFS {
                        local[i * C1_LOCAL_DOFS + j] += flux * t[i].value;
                    }
                }
            }
            for i in 0..C1_LOCAL_DOFS {
                for j in 0..C1_LOCAL_DOFS {
                    trip.push((dofs[i], dofs[j], local[i * C1_LOCAL_DOFS + j]));
                }
            }
        }
        SparseMatrix::from_triplets(self.num_dofs(), &trip).expect("cell dofs are in range")
    }

    /// Exact Galerkin linearization of `ψ ↦ ε(Δψ, Δv) − (det D²ψ, v)`:
    /// `B − ∮ (Φ∇· · ν) v`. Equal to [`C1Space::b_matrix`] on the
    /// homogeneous-Neumann space.
    pub fn linearization(&self, psi: &C1Field, eps: f64) -> SparseMatrix {
        self.b_matrix(psi, eps).add_scaled(-1.0, &self.boundary_cofactor_matrix(psi))
    }

    /// `(det D²ψ, φ_i)`.
    pub fn det_vector(&self, psi: &C1Field) -> Vec<f64> {
        self.det_vector_counted(psi).0
    }

    /// `(det D²ψ, φ_i)` and the number of quadrature points where
    /// `det D²ψ <= 0`.
    pub fn det_vector_counted(&self, psi: &C1Field) -> (Vec<f64>, usize) {
        let mut out = vec![0.0; self.num_dofs()];
        let mut nonpositive = 0;
        for cell in 0..self.mesh.num_cells() {
            let coeffs = psi.cell_coeffs(cell);
            let dofs = c1_cell_dofs(&self.mesh, cell);
            for (t, &w) in self.tables.iter().zip(&self.weights) {
                let det = hessian_det(combine(t, &coeffs).hess);
                if det <= 0.0 {
                    nonpositive += 1;
                }
                let d = w * det;
                for (i, &g) in dofs.iter().enumerate() {
                    out[g] += d * t[i].value;
                }
            }
        }
        (out, nonpositive)
    }

    /// Total number of quadrature points.
    pub fn num_quad_points(&self) -> usize {
        self.mesh.num_cells() * self.tables.len()
    }

    /// `(f, φ_i)` for a pointwise function.
    pub fn load(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.num_dofs()];
        for cell in 0..self.mesh.num_cells() {
            let dofs = c1_cell_dofs(&self.mesh, cell);
            for ((t, &w), p) in self.tables.iter().zip(&self.weights).zip(self.quad.points.iter()) {
                let v = w * f(self.mesh.map_to_global(cell, *p));
                for (i, &g) in dofs.iter().enumerate() {
                    out[g] += v * t[i].value;
                }
            }
        }
        out
    }

    /// `(α, φ_i)` for a Lagrange field on the same mesh.
    pub fn load_lagrange(&self, alpha: &LagrangeField) -> Vec<f64> {
        let k = alpha.degree;
        let basis = LagrangeBasis::new(k).expect("validated degree");
        let lag: Vec<Vec<f64>> = self
            .quad
            .points
            .iter()
            .map(|&p| {
                let mut v = vec![0.0; basis.len()];
                basis.values_into(p, &mut v);
                v
            })
            .collect();
        let mut out = vec![0.0; self.num_dofs()];
        for cell in 0..self.mesh.num_cells() {
            let dofs = c1_cell_dofs(&self.mesh, cell);
            let ldofs = lagrange_cell_dofs(&self.mesh, k, cell);
            for ((t, &w), lv) in self.tables.iter().zip(&self.weights).zip(&lag) {
                let a: f64 = ldofs.iter().zip(lv).map(|(&d, s)| alpha.coeffs[d] * s).sum();
                let v = w * a;
                for (i, &g) in dofs.iter().enumerate() {
                    out[g] += v * t[i].value;
                }
            }
        }
        out
    }

    /// `∮ g φ_i ds` over the domain boundary.
    pub fn boundary_load(&self, g: impl Fn(Point, Side) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.num_dofs()];
        for e in self.mesh.boundary_edges() {
            let dofs = c1_cell_dofs(&self.mesh, e.cell);
            let len = match e.side {
                Side::Bottom | Side::Top => self.mesh.hx,
                Side::Left | Side::Right => self.mesh.hy,
            };
            for (&s, &w) in self.edge_rule.points.iter().zip(&self.edge_rule.weights) {
                let local = edge_local(e.side, s);
                let p = self.mesh.map_to_global(e.cell, local);
                let v = w * len * g(p, e.side);
                let t = c1_eval(local, self.mesh.hx, self.mesh.hy);
                for (i, &d) in dofs.iter().enumerate() {
                    out[d] += v * t[i].value;
                }
            }
        }
        out
    }
}

/// `(Δφ_j, Δφ_i)` on `mesh` with the default rule. Scale by ε at the call site.
pub fn assemble_biharmonic(mesh: &Mesh) -> SparseMatrix {
    C1Space::new(mesh).biharmonic()
}

/// `(det D²ψ, φ_i)` with the default rule.
pub fn assemble_det_functional(mesh: &Mesh, psi: &C1Field) -> Vec<f64> {
    C1Space::new(mesh).det_vector(psi)
}

/// `B[φ_j, φ_i] = ε(Δφ_j, Δφ_i) + (cof(D²ψ)∇φ_j, ∇φ_i)`.
#[allow(non_snake_case)]
pub fn assemble_B(mesh: &Mesh, psi: &C1Field, eps: f64) -> SparseMatrix {
    C1Space::new(mesh).b_matrix(psi, eps)
}

/// `∮ data φ_i ds`.
pub fn assemble_boundary_flux(mesh: &Mesh, data: impl Fn(Point) -> f64) -> Vec<f64> {
    C1Space::new(mesh).boundary_load(|p, _| data(p))
}

/// Which space a mass matrix is built on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MassSpace {
    C1,
    Lagrange(usize),
}

/// Gram matrix of the chosen space.
pub fn assemble_mass(mesh: &Mesh, space: MassSpace) -> Result<SparseMatrix> {
    match space {
        MassSpace::C1 => Ok(C1Space::new(mesh).mass()),
        MassSpace::Lagrange(k) => Ok(LagrangeSpace::new(mesh, k)?.mass()),
    }
}

/// The continuous Lagrange space of degree `k` with quadrature tables.
#[derive(Clone, Debug)]
pub struct LagrangeSpace {
    mesh: Mesh,
    degree: usize,
    quad: QuadratureRule,
    tables: Vec<Vec<LagrangeShape>>,
    weights: Vec<f64>,
    pattern: SparseMatrix,
    positions: Vec<Vec<u32>>,
}

impl LagrangeSpace {
    pub fn new(mesh: &Mesh, degree: usize) -> Result<Self> {
        Self::with_order(mesh, degree, DEFAULT_ORDER)
    }

    pub fn with_order(mesh: &Mesh, degree: usize, n_quad: usize) -> Result<Self> {
        let basis = LagrangeBasis::new(degree)?;
        let quad = gauss_rule(n_quad)?;
        let area = mesh.hx * mesh.hy;
        let tables = quad.points.iter().map(|&p| basis.eval(p)).collect();
        let weights = quad.weights.iter().map(|w| w * area).collect();
        let (pattern, positions) = build_pattern(
            lagrange_num_dofs(mesh, degree),
            (0..mesh.num_cells()).map(|c| lagrange_cell_dofs(mesh, degree, c)),
        );
        Ok(Self { mesh: mesh.clone(), degree, quad, tables, weights, pattern, positions })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_dofs(&self) -> usize {
        self.pattern.dim()
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quad
    }

    /// Shape values at quadrature point `q`.
    pub fn shape_values(&self, q: usize) -> impl Iterator<Item = f64> + '_ {
        self.tables[q].iter().map(|s| s.value)
    }

    /// Quadrature weight times cell area.
    pub fn weight(&self, q: usize) -> f64 {
        self.weights[q]
    }

    pub fn mass(&self) -> SparseMatrix {
        let nl = self.tables[0].len();
        let mut m = self.pattern.clone();
        let values = m.values_mut();
        let mut local = vec![0.0; nl * nl];
        for cell in 0..self.mesh.num_cells() {
            local.fill(0.0);
            for (t, &w) in self.tables.iter().zip(&self.weights) {
                for i in 0..nl {
                    for j in 0..nl {
                        local[i * nl + j] += w * t[i].value * t[j].value;
                    }
                }
            }
            for (k, &pos) in self.positions[cell].iter().enumerate() {
                values[pos as usize] += local[k];
            }
        }
        m
    }

    /// Indices of boundary / interior dofs.
    pub fn split_boundary(&self) -> (Vec<usize>, Vec<usize>) {
        (0..self.num_dofs()).partition(|&d| is_boundary_lagrange_dof(&self.mesh, self.degree, d))
    }
}

/// Dofs of a C¹ field pinned by a Neumann condition, and their values.
///
/// On the vertical sides the normal derivative along the edge is the
/// Hermite interpolant of the nodal `ψ_x` and `ψ_xy`, so both are fixed;
/// on the horizontal sides `ψ_y` and `ψ_xy`.
#[derive(Clone, Debug, PartialEq)]
pub struct DofConstraints {
    pub fixed: Vec<usize>,
    pub values: Vec<f64>,
    pub free: Vec<usize>,
    n: usize,
}

impl DofConstraints {
    /// Neumann data given as the nodal `[ψ_x, ψ_y, ψ_xy]` of any function
    /// whose normal derivative is the boundary data; `None` means zero.
    pub fn neumann(mesh: &Mesh, data: Option<&dyn Fn(Point) -> [f64; 3]>) -> Self {
        let n = c1_num_dofs(mesh);
        let mut fixed = Vec::new();
        let mut values = Vec::new();
        for node in 0..mesh.num_nodes() {
            let vert = mesh.on_vertical_boundary(node);
            let horiz = mesh.on_horizontal_boundary(node);
            if !vert && !horiz {
                continue;
            }
            let g = data.map(|f| f(mesh.node_coords(node))).unwrap_or([0.0; 3]);
            let base = 4 * node;
            if vert {
                fixed.push(base + 1);
                values.push(g[0]);
            }
            if horiz {
                fixed.push(base + 2);
                values.push(g[1]);
            }
            fixed.push(base + 3);
            values.push(g[2]);
        }
        let mut is_fixed = vec![false; n];
        for &d in &fixed {
            is_fixed[d] = true;
        }
        let free = (0..n).filter(|&d| !is_fixed[d]).collect();
        Self { fixed, values, free, n }
    }

    pub fn num_dofs(&self) -> usize {
        self.n
    }

    /// Writes the pinned values into a coefficient vector.
    pub fn impose(&self, coeffs: &mut [f64]) {
        for (&d, &v) in self.fixed.iter().zip(&self.values) {
            coeffs[d] = v;
        }
    }

    pub fn restrict(&self, v: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| v[d]).collect()
    }

    /// Scatters a free-dof vector into a full vector (pinned entries zero).
    pub fn extend(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (&d, &x) in self.free.iter().zip(v) {
            out[d] = x;
        }
        out
    }
}

/// Symmetric elimination of pinned dofs from `A u = b`: returns
/// `(A_ff, b_f − A_fp u_p)` on the free dofs.
pub fn apply_neumann_bc(a: &SparseMatrix, b: &[f64], cons: &DofConstraints) -> (SparseMatrix, Vec<f64>) {
    let mut pinned = vec![0.0; cons.n];
    cons.impose(&mut pinned);
    let lift = a.matvec(&pinned);
    let rhs = cons.free.iter().map(|&d| b[d] - lift[d]).collect();
    (a.submatrix(&cons.free), rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(n: usize) -> Mesh {
        Mesh::new(Domain::square(1.0).unwrap(), n, n).unwrap()
    }

    fn random_field(m: &Mesh, seed: u64) -> C1Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        C1Field::from_coeffs(m, (0..c1_num_dofs(m)).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn paraboloid(m: &Mesh) -> C1Field {
        C1Field::interpolate(m, |p| [0.5 * (p[0] * p[0] + p[1] * p[1]), p[0], p[1], 0.0])
    }

    #[test]
    fn biharmonic_kernel_and_value() {
        let m = unit(6);
        let k = assemble_biharmonic(&m);
        assert!(k.asymmetry() < 1e-12);
        let lin = C1Field::interpolate(&m, |p| [p[0], 1.0, 0.0, 0.0]);
        assert!(k.bilinear(&lin.coeffs, &lin.coeffs).abs() < 1e-10);
        let q = paraboloid(&m);
        assert!((k.bilinear(&q.coeffs, &q.coeffs) - 4.0).abs() < 1e-10);
    }

    #[test]
    fn biharmonic_matches_per_cell_oracle() {
        // independent route: evaluate Δψ pointwise on each cell with a
        // 6-point rule and integrate (Δψ)²
        let m = Mesh::new(Domain::new(0.0, 1.5, 0.0, 1.0).unwrap(), 3, 4).unwrap();
        let f = random_field(&m, 4);
        let k = assemble_biharmonic(&m);
        let q = gauss_rule(6).unwrap();
        let mut oracle = 0.0;
        for cell in 0..m.num_cells() {
            for (p, w) in q.iter() {
                let v = f.eval_local(cell, p);
                oracle += w * m.hx * m.hy * (v.hess[0] + v.hess[2]).powi(2);
            }
        }
        let got = k.bilinear(&f.coeffs, &f.coeffs);
        assert!((got - oracle).abs() < 1e-12 * oracle.max(1.0), "{got} vs {oracle}");
    }

    #[test]
    fn det_functional_examples() {
        let m = unit(4);
        let space = C1Space::new(&m);
        let ones = space.load(|_| 1.0);
        let d = space.det_vector(&paraboloid(&m));
        for (a, b) in d.iter().zip(&ones) {
            assert!((a - b).abs() < 1e-13);
        }
        let xy = C1Field::interpolate(&m, |p| [p[0] * p[1], p[1], p[0], 1.0]);
        let d = space.det_vector(&xy);
        for (a, b) in d.iter().zip(&ones) {
            assert!((a + b).abs() < 1e-13);
        }
    }

    #[test]
    fn det_functional_on_exponential_profile() {
        // ψ = exp(t r²/2): det D²ψ = t²(1 + t r²) e^{t r²}
        let t = 0.25;
        let m = unit(16);
        let psi = C1Field::interpolate(&m, |p| {
            let e = (t * (p[0] * p[0] + p[1] * p[1]) / 2.0).exp();
            [e, t * p[0] * e, t * p[1] * e, t * t * p[0] * p[1] * e]
        });
        let space = C1Space::new(&m);
        let got = space.det_vector(&psi);
        let want = space.load(|p| {
            let r2 = p[0] * p[0] + p[1] * p[1];
            t * t * (1.0 + t * r2) * (t * r2).exp()
        });
        let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-3 * scale, "err {err} scale {scale}");
    }

    #[test]
    fn b_with_identity_cofactor() {
        let m = unit(4);
        let space = C1Space::new(&m);
        let eps = 0.01;
        let b = space.b_matrix(&paraboloid(&m), eps);
        let expect = space.stiffness().add_scaled(eps, &space.biharmonic());
        for r in 0..b.dim() {
            for (c, v) in b.row(r) {
                assert!((v - expect.get(r, c)).abs() < 1e-13);
            }
        }
        assert!(b.asymmetry() < 1e-12);
    }

    #[test]
    fn cofactor_identities() {
        let m = unit(3);
        let space = C1Space::new(&m);
        for v in space.evaluate(&random_field(&m, 8)) {
            let c = CofactorEval::from_hessian(v.hess);
            assert!((c.trace() - v.laplacian()).abs() < 1e-13 * (1.0 + v.laplacian().abs()));
            assert!((c.det() - hessian_det(v.hess)).abs() < 1e-13 * (1.0 + hessian_det(v.hess).abs()));
        }
    }

    #[test]
    fn det_directional_derivative() {
        let m = unit(3);
        let psi = random_field(&m, 1);
        let delta = random_field(&m, 2);
        let s = 1e-6;
        let space = C1Space::new(&m);
        let a = space.evaluate(&psi);
        let mut shifted = psi.clone();
        shifted.coeffs.iter_mut().zip(&delta.coeffs).for_each(|(x, d)| *x += s * d);
        let b = space.evaluate(&shifted);
        let d = space.evaluate(&delta);
        for ((va, vb), vd) in a.iter().zip(&b).zip(&d) {
            let fd = (hessian_det(vb.hess) - hessian_det(va.hess)) / s;
            let exact = CofactorEval::from_hessian(va.hess).contract(vd.hess);
            // error is exactly s·det(D²δ)
            assert!((fd - exact - s * hessian_det(vd.hess)).abs() < 1e-6 * (1.0 + exact.abs()));
            assert!((fd - exact).abs() <= 2.0 * s * hessian_det(vd.hess).abs() + 1e-6 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn integration_by_parts_with_boundary_term() {
        // (Φ:D²δ, v) + (Φ∇δ, ∇v) − ∮ (Φ∇δ·ν) v = 0 for any ψ, δ, v
        let m = unit(4);
        let space = C1Space::new(&m);
        let psi = random_field(&m, 21);
        let delta = random_field(&m, 22);
        let v = random_field(&m, 23);
        let hmat = space.cofactor_hessian_matrix(&psi);
        let smat = space.b_matrix(&psi, 0.0);
        let bmat = space.boundary_cofactor_matrix(&psi);
        let lhs = hmat.bilinear(&v.coeffs, &delta.coeffs) + smat.bilinear(&v.coeffs, &delta.coeffs)
            - bmat.bilinear(&v.coeffs, &delta.coeffs);
        assert!(lhs.abs() < 1e-9, "{lhs}");
        // with v having zero value and gradient on ∂U the boundary term is absent
        let mut vin = v.clone();
        for node in 0..m.num_nodes() {
            let (i, j) = m.node_ij(node);
            if i == 0 || j == 0 || i == m.nx || j == m.ny {
                vin.coeffs[4 * node..4 * node + 4].fill(0.0);
            }
        }
        let lhs = hmat.bilinear(&vin.coeffs, &delta.coeffs) + smat.bilinear(&vin.coeffs, &delta.coeffs);
        assert!(lhs.abs() < 1e-9, "{lhs}");
    }

    #[test]
    fn lagrange_mass_examples() {
        let m = unit(1);
        let mass = assemble_mass(&m, MassSpace::Lagrange(1)).unwrap();
        let expect = [[4.0, 2.0, 2.0, 1.0], [2.0, 4.0, 1.0, 2.0], [2.0, 1.0, 4.0, 2.0], [1.0, 2.0, 2.0, 4.0]];
        for r in 0..4 {
            for c in 0..4 {
                assert!((mass.get(r, c) - expect[r][c] / 36.0).abs() < 1e-15);
            }
        }
        let m = Mesh::new(Domain::square(6.0).unwrap(), 5, 3).unwrap();
        for k in 1..=3 {
            let mass = assemble_mass(&m, MassSpace::Lagrange(k)).unwrap();
            let ones = vec![1.0; mass.dim()];
            assert!((mass.bilinear(&ones, &ones) - 36.0).abs() < 1e-11);
        }
        let c1 = assemble_mass(&m, MassSpace::C1).unwrap();
        let one = C1Field::constant(&m, 1.0);
        assert!((c1.bilinear(&one.coeffs, &one.coeffs) - 36.0).abs() < 1e-11);
    }

    #[test]
    fn boundary_flux_examples() {
        let m = unit(3);
        let one = C1Field::constant(&m, 1.0);
        let f = assemble_boundary_flux(&m, |_| 1.0);
        assert!((crate::sparse::dot(&f, &one.coeffs) - 4.0).abs() < 1e-14);
        let f = assemble_boundary_flux(&m, |_| 0.01 * 0.01);
        assert!((crate::sparse::dot(&f, &one.coeffs) - 4e-4).abs() < 1e-17);
        let space = C1Space::new(&m);
        let f = space.boundary_load(|p, side| if side == Side::Bottom { p[0] } else { 0.0 });
        assert!((crate::sparse::dot(&f, &one.coeffs) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn neumann_constraints() {
        let m = unit(2);
        let cons = DofConstraints::neumann(&m, None);
        // corners pin 3 dofs, edge midpoints 2, center none
        assert_eq!(cons.fixed.len(), 4 * 3 + 4 * 2);
        assert!(cons.values.iter().all(|&v| v == 0.0));

        let t: f64 = 0.25;
        let g = move |p: Point| {
            let e = (t * (p[0] * p[0] + p[1] * p[1]) / 2.0).exp();
            [t * p[0] * e, t * p[1] * e, t * t * p[0] * p[1] * e]
        };
        let cons = DofConstraints::neumann(&m, Some(&g));
        let corner = m.node_index(2, 2);
        let k = cons.fixed.iter().position(|&d| d == 4 * corner + 1).unwrap();
        assert!((cons.values[k] - t * t.exp()).abs() < 1e-15);

        let a = C1Space::new(&m).biharmonic();
        let b = vec![1.0; a.dim()];
        let (af, bf) = apply_neumann_bc(&a, &b, &cons);
        assert_eq!(af.dim(), cons.free.len());
        assert_eq!(bf.len(), cons.free.len());
        assert!(af.asymmetry() < 1e-12);
    }
}
