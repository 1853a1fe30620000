//! Modified-characteristics update of the density.
//!
//! With `v = (ψ_y − y, x − ψ_x)` frozen at the arrival point, the feet
//! `x̄ = x − Δt v(x)` are traced back one step and `α^m(x̄)` is projected
//! onto the Lagrange space with prescribed boundary values.

use crate::assembly::LagrangeSpace;
use crate::elements::{c1_eval, C1Shape, C1_LOCAL_DOFS};
use crate::error::{Error, Result};
use crate::fields::{combine, lagrange_cell_dofs, C1Field, LagrangeField};
use crate::mesh::{Domain, Point};
use crate::sparse::LuFactor;

/// Treatment of feet that leave the domain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FootPolicy {
    /// Evaluate the density at the nearest point of the closed domain.
    #[default]
    Clamp,
    /// Evaluate the initial density at the foot itself.
    ExtendByInitial,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TransportMethod {
    /// Galerkin projection with the mass matrix.
    #[default]
    L2Projection,
    /// Values at the dofs copied from their feet.
    NodalInterpolation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportConfig {
    pub dt: f64,
    pub policy: FootPolicy,
    pub degree: usize,
    pub method: TransportMethod,
}

impl TransportConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(1..=3).contains(&self.degree) {
            return Err(Error::UnsupportedDegree(self.degree));
        }
        Ok(())
    }
}

/// `v = (ψ_y − y, x − ψ_x)` from the gradient of `ψ` at `x`.
pub fn velocity_from_gradient(x: Point, grad: [f64; 2]) -> [f64; 2] {
    [grad[1] - x[1], x[0] - grad[0]]
}

/// Velocity induced by `psi` at `x`.
pub fn velocity_at(psi: &C1Field, x: Point) -> Result<[f64; 2]> {
    Ok(velocity_from_gradient(x, psi.eval(x)?.grad))
}

/// `x − Δt v` and whether it left the closed domain.
pub fn characteristic_foot(x: Point, v: [f64; 2], dt: f64, domain: &Domain) -> (Point, bool) {
    let foot = [x[0] - dt * v[0], x[1] - dt * v[1]];
    (foot, !domain.contains(foot))
}

/// Density at a foot under the given policy.
fn foot_value(alpha: &LagrangeField, foot: Point, outside: bool, policy: FootPolicy, initial: Option<&dyn Fn(Point) -> f64>) -> f64 {
    match (outside, policy, initial) {
        (true, FootPolicy::ExtendByInitial, Some(a0)) => a0(foot),
        (true, _, _) => alpha.eval(alpha.mesh.domain.clamp(foot)).expect("clamped point is inside"),
        (false, _, _) => alpha.eval(foot).expect("foot is inside"),
    }
}

/// Gauss points per axis for the load `(α^m(x̄), w)`. The composed
/// integrand is only piecewise polynomial, and four points let the
/// projected density drift unboundedly over long runs.
pub const TRANSPORT_ORDER: usize = 6;

/// Spaces, tables and the factored interior mass matrix for repeated steps.
pub struct Transport {
    space: LagrangeSpace,
    config: TransportConfig,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    mass: crate::sparse::SparseMatrix,
    interior_lu: LuFactor,
    c1_tables: Vec<[C1Shape; C1_LOCAL_DOFS]>,
}

impl Transport {
    pub fn new(mesh: &crate::mesh::Mesh, config: TransportConfig) -> Result<Self> {
        Self::with_order(mesh, config, TRANSPORT_ORDER)
    }

    /// As [`Transport::new`] with `n_quad` Gauss points per axis.
    pub fn with_order(mesh: &crate::mesh::Mesh, config: TransportConfig, n_quad: usize) -> Result<Self> {
        config.validate()?;
        let space = LagrangeSpace::with_order(mesh, config.degree, n_quad)?;
        let (boundary, interior) = space.split_boundary();
        let mass = space.mass();
        let interior_lu = LuFactor::new(&mass.submatrix(&interior))?;
        let c1_tables = space.quadrature().points.iter().map(|&p| c1_eval(p, mesh.hx, mesh.hy)).collect();
        Ok(Self { space, config, interior, boundary, mass, interior_lu, c1_tables })
    }

    pub fn config(&self) -> &TransportConfig {
        &self.config
    }

    pub fn space(&self) -> &LagrangeSpace {
        &self.space
    }

    /// Solves `(α, w) = rhs(w)` for interior `w` with boundary values `g_d`.
    fn solve_projection(&self, rhs: &[f64], g_d: &dyn Fn(Point) -> f64) -> Result<LagrangeField> {
        let mesh = self.space.mesh();
        let mut a = LagrangeField::zeros(mesh, self.config.degree)?;
        for &d in &self.boundary {
            a.coeffs[d] = g_d(a.dof_coords(d));
        }
        let lift = self.mass.matvec(&a.coeffs);
        let b: Vec<f64> = self.interior.iter().map(|&d| rhs[d] - lift[d]).collect();
        let x = self.interior_lu.solve(&b)?;
        for (&d, v) in self.interior.iter().zip(x) {
            a.coeffs[d] = v;
        }
        Ok(a)
    }

    /// Projection of `f` with boundary values `g_d`.
    pub fn project(&self, f: impl Fn(Point) -> f64, g_d: &dyn Fn(Point) -> f64) -> Result<LagrangeField> {
        let rhs = self.load(|_, p| f(p));
        self.solve_projection(&rhs, g_d)
    }

    /// `(f, w_i)` for a pointwise integrand that also receives the flat
    /// quadrature-point index.
    fn load(&self, f: impl Fn(usize, Point) -> f64) -> Vec<f64> {
        let mesh = self.space.mesh();
        let nq = self.space.quadrature().len();
        let mut rhs = vec![0.0; self.space.num_dofs()];
        for cell in 0..mesh.num_cells() {
            let dofs = lagrange_cell_dofs(mesh, self.config.degree, cell);
            for (q, &p) in self.space.quadrature().points.iter().enumerate() {
                let x = mesh.map_to_global(cell, p);
                let v = self.space.weight(q) * f(cell * nq + q, x);
                for (s, &d) in self.space.shape_values(q).zip(&dofs) {
                    rhs[d] += v * s;
                }
            }
        }
        rhs
    }

    /// One step `α^m ↦ α^{m+1}`. `source` adds `Δt (F, w)`; `g_d` gives
    /// the boundary values; `initial` is used by
    /// [`FootPolicy::ExtendByInitial`].
    pub fn step(
        &self,
        alpha: &LagrangeField,
        psi: &C1Field,
        source: Option<&dyn Fn(Point) -> f64>,
        g_d: &dyn Fn(Point) -> f64,
        initial: Option<&dyn Fn(Point) -> f64>,
    ) -> Result<LagrangeField> {
        if alpha.degree != self.config.degree || alpha.mesh != *self.space.mesh() || psi.mesh != alpha.mesh {
            return Err(Error::DimensionMismatch { expected: self.space.num_dofs(), got: alpha.len() });
        }
        match self.config.method {
            TransportMethod::L2Projection => self.step_projection(alpha, psi, source, g_d, initial),
            TransportMethod::NodalInterpolation => self.step_nodal(alpha, psi, source, g_d, initial),
        }
    }

    fn step_projection(
        &self,
        alpha: &LagrangeField,
        psi: &C1Field,
        source: Option<&dyn Fn(Point) -> f64>,
        g_d: &dyn Fn(Point) -> f64,
        initial: Option<&dyn Fn(Point) -> f64>,
    ) -> Result<LagrangeField> {
        let mesh = self.space.mesh();
        let dt = self.config.dt;
        let nq = self.c1_tables.len();
        let mut grads = Vec::with_capacity(mesh.num_cells() * nq);
        for cell in 0..mesh.num_cells() {
            let c = psi.cell_coeffs(cell);
            grads.extend(self.c1_tables.iter().map(|t| combine(t, &c).grad));
        }
        let rhs = self.load(|idx, x| {
            let v = velocity_from_gradient(x, grads[idx]);
            let (foot, out) = characteristic_foot(x, v, dt, &mesh.domain);
            let mut val = foot_value(alpha, foot, out, self.config.policy, initial);
            if let Some(f) = source {
                val += dt * f(x);
            }
            val
        });
        self.solve_projection(&rhs, g_d)
    }

    fn step_nodal(
        &self,
        alpha: &LagrangeField,
        psi: &C1Field,
        source: Option<&dyn Fn(Point) -> f64>,
        g_d: &dyn Fn(Point) -> f64,
        initial: Option<&dyn Fn(Point) -> f64>,
    ) -> Result<LagrangeField> {
        let mesh = self.space.mesh();
        let dt = self.config.dt;
        let mut next = LagrangeField::zeros(mesh, self.config.degree)?;
        for &d in &self.boundary {
            next.coeffs[d] = g_d(next.dof_coords(d));
        }
        for &d in &self.interior {
            let x = next.dof_coords(d);
            let v = velocity_at(psi, x)?;
            let (foot, out) = characteristic_foot(x, v, dt, &mesh.domain);
            let mut val = foot_value(alpha, foot, out, self.config.policy, initial);
            if let Some(f) = source {
                val += dt * f(x);
            }
            next.coeffs[d] = val;
        }
        Ok(next)
    }
}

/// One step with a freshly built [`Transport`].
pub fn transport_step(
    alpha: &LagrangeField,
    psi: &C1Field,
    config: TransportConfig,
    g_d: &dyn Fn(Point) -> f64,
) -> Result<LagrangeField> {
    Transport::new(&alpha.mesh, config)?.step(alpha, psi, None, g_d, None)
}

/// Smallest dof value.
pub fn min_value(alpha: &LagrangeField) -> f64 {
    alpha.min_dof()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    fn unit(n: usize) -> Mesh {
        Mesh::new(Domain::square(1.0).unwrap(), n, n).unwrap()
    }

    fn c1(m: &Mesh, f: impl Fn(Point) -> [f64; 4]) -> C1Field {
        C1Field::interpolate(m, f)
    }

    fn cfg(dt: f64, degree: usize) -> TransportConfig {
        TransportConfig { dt, policy: FootPolicy::Clamp, degree, method: TransportMethod::L2Projection }
    }

    #[test]
    fn velocity_examples() {
        let m = unit(3);
        let radial = c1(&m, |p| [0.5 * (p[0] * p[0] + p[1] * p[1]), p[0], p[1], 0.0]);
        let v = velocity_at(&radial, [0.3, 0.8]).unwrap();
        assert!(v[0].abs() < 1e-14 && v[1].abs() < 1e-14);
        let xy = c1(&m, |p| [p[0] * p[1], p[1], p[0], 1.0]);
        let v = velocity_at(&xy, [0.2, 0.7]).unwrap();
        assert!((v[0] + 0.5).abs() < 1e-14 && (v[1] + 0.5).abs() < 1e-14);
        assert!(velocity_at(&xy, [1.5, 0.5]).is_err());
        // the radial exponential potential at t = 0 is constant
        let flat = c1(&m, |_| [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(velocity_at(&flat, [1.0, 0.0]).unwrap(), [0.0, 1.0]);
    }

    #[test]
    fn foot_examples() {
        let d = Domain::square(1.0).unwrap();
        assert_eq!(characteristic_foot([0.5, 0.5], [0.0, 0.0], 0.1, &d), ([0.5, 0.5], false));
        let (f, out) = characteristic_foot([0.5, 0.5], [1.0, 0.0], 0.1, &d);
        assert!((f[0] - 0.4).abs() < 1e-15 && f[1] == 0.5 && !out);
        let (f, out) = characteristic_foot([0.05, 0.5], [1.0, 0.0], 0.1, &d);
        assert!(out);
        assert_eq!(d.clamp(f), [0.0, 0.5]);
    }

    #[test]
    fn stationary_potential_keeps_density() {
        let m = unit(4);
        let psi = c1(&m, |p| [0.5 * (p[0] * p[0] + p[1] * p[1]), p[0], p[1], 0.0]);
        let alpha = LagrangeField::interpolate(&m, 3, |p| (p[0] * 3.0).sin() * p[1] + 1.0).unwrap();
        let g = alpha.clone();
        let tr = Transport::new(&m, cfg(0.1, 3)).unwrap();
        let next = tr.step(&alpha, &psi, None, &|p| g.eval(p).unwrap(), None).unwrap();
        let diff = next.coeffs.iter().zip(&alpha.coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn constants_and_zero_are_preserved() {
        let m = unit(5);
        let psi = c1(&m, |p| [p[0] * p[1], p[1], p[0], 1.0]);
        for k in 1..=3 {
            let tr = Transport::new(&m, cfg(0.05, k)).unwrap();
            let alpha = LagrangeField::interpolate(&m, k, |_| 2.5).unwrap();
            let next = tr.step(&alpha, &psi, None, &|_| 2.5, None).unwrap();
            assert!(next.coeffs.iter().all(|v| (v - 2.5).abs() < 1e-12));
            let zero = LagrangeField::zeros(&m, k).unwrap();
            let next = tr.step(&zero, &psi, None, &|_| 0.0, None).unwrap();
            assert!(next.coeffs.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn nodal_variant_copies_foot_values() {
        let m = unit(4);
        let psi = c1(&m, |p| [p[0] * p[1], p[1], p[0], 1.0]);
        let alpha = LagrangeField::interpolate(&m, 1, |p| 1.0 + p[0] * p[0] + p[1]).unwrap();
        let tr = Transport::new(&m, TransportConfig { method: TransportMethod::NodalInterpolation, ..cfg(0.1, 1) }).unwrap();
        let next = tr.step(&alpha, &psi, None, &|_| 0.0, None).unwrap();
        for d in 0..next.len() {
            let x = next.dof_coords(d);
            if next.is_boundary_dof(d) {
                assert_eq!(next.coeffs[d], 0.0);
                continue;
            }
            let v = [x[0] - x[1], x[0] - x[1]];
            let foot = m.domain.clamp([x[0] - 0.1 * v[0], x[1] - 0.1 * v[1]]);
            assert!((next.coeffs[d] - alpha.eval(foot).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn extend_by_initial_uses_initial_density_outside() {
        let m = unit(4);
        // v = (−y, x): rotation about the origin, feet near x = 0 exit the domain
        let psi = c1(&m, |_| [0.0; 4]);
        let alpha = LagrangeField::zeros(&m, 1).unwrap();
        let a0 = |_: Point| 7.0;
        let tr = Transport::new(
            &m,
            TransportConfig { method: TransportMethod::NodalInterpolation, policy: FootPolicy::ExtendByInitial, ..cfg(0.5, 1) },
        )
        .unwrap();
        let next = tr.step(&alpha, &psi, None, &|_| 0.0, Some(&a0)).unwrap();
        // node (0.25, 0.25): foot (0.375, 0.125) inside; node (0.25, 0.75): foot (0.625, 0.625) inside;
        // node (0.75, 0.25): foot (0.875, −0.125) outside
        let d = 5 + 3;
        assert_eq!(next.dof_coords(d), [0.75, 0.25]);
        assert_eq!(next.coeffs[d], 7.0);
        assert_eq!(next.coeffs[5 + 1], 0.0);
    }

    #[test]
    fn projection_is_idempotent_on_the_space() {
        let m = unit(3);
        let tr = Transport::new(&m, cfg(0.1, 3)).unwrap();
        let a = LagrangeField::interpolate(&m, 3, |p| (p[0] - 0.3).powi(3) * p[1] + p[1].powi(2)).unwrap();
        let g = a.clone();
        let p = tr.project(|x| g.eval(x).unwrap(), &|x| g.eval(x).unwrap()).unwrap();
        let diff = p.coeffs.iter().zip(&a.coeffs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
    }
}
