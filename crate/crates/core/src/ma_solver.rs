//! Newton and fixed-point solvers for the regularized Monge–Ampère problem
//!
//! ```text
//! −ε(Δψ, Δv) + (det D²ψ, v) = (α, v) + ⟨g, v⟩   for all v with ∂v/∂ν = 0,
//! ∂ψ/∂ν = g_N on ∂U,   (ψ, 1) = γ,
//! ```
//!
//! where `g = ε ∂Δψ/∂ν` is the boundary flux (`ε²` for the base problem).
//! The mean condition is enforced with a Lagrange multiplier, so every
//! linear solve is a bordered system.

use crate::assembly::{C1Space, DofConstraints};
use crate::error::{Error, Result};
use crate::fields::{C1Field, LagrangeField};
use crate::mesh::{Point, Side};
use crate::sparse::{dot, norm2, BorderedFactor, SparseMatrix};

/// Fraction of nonpositive-determinant quadrature points above which a
/// trial step is shortened, when the current iterate is below it.
pub const DET_GUARD_FRACTION: f64 = 0.2;
/// Absolute floor of the convergence threshold.
/// Relative block residual accepted for a Newton correction or the
/// initial guess.
pub const STEP_TOL: f64 = 1e-8;
pub const RESIDUAL_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Newton,
    /// Linearization frozen at the initial guess.
    FixedPoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MASolverConfig {
    /// Regularization parameter.
    pub eps: f64,
    /// Tolerance on the residual relative to the load norm.
    pub newton_tol: f64,
    pub max_iters: usize,
    /// Initial step length in `(0, 1]`.
    pub damping: f64,
    pub scheme: Scheme,
    /// Step halvings allowed per iteration.
    pub max_halvings: usize,
}

impl Default for MASolverConfig {
    fn default() -> Self {
        Self { eps: 0.01, newton_tol: 1e-10, max_iters: 50, damping: 1.0, scheme: Scheme::Newton, max_halvings: 10 }
    }
}

impl MASolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.eps)));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::Config(format!("newton_tol must be positive, got {}", self.newton_tol)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MASolveReport {
    pub iterations: usize,
    /// Residual norm at the guess and after every accepted step.
    pub residuals: Vec<f64>,
    /// `|(ψ, 1) − γ|` at the same iterates.
    pub constraint_residuals: Vec<f64>,
    pub converged: bool,
    /// Convergence threshold that was applied: the relative tolerance
    /// times the load norm, but at least the absolute floor and the
    /// rounding level of the residual.
    pub threshold: f64,
    /// Iterations whose accepted step was shorter than the initial length.
    pub damped_steps: usize,
    /// Trial steps rejected by the determinant guard.
    pub det_rejections: usize,
    /// Fraction of quadrature points with `det D²ψ <= 0` at the result.
    pub nonpositive_det_fraction: f64,
    /// Multiplier of the mean condition at the last solve.
    pub multiplier: f64,
}

impl MASolveReport {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Neumann constraints and boundary flux load for one time level.
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub neumann: DofConstraints,
    /// `⟨g, φ_i⟩` over all dofs.
    pub flux: Vec<f64>,
    /// True when all pinned values are zero; the boundary part of the
    /// linearization then vanishes on the free space.
    pub homogeneous: bool,
}

impl BoundaryData {
    pub fn new(
        space: &C1Space,
        neumann: Option<&dyn Fn(Point) -> [f64; 3]>,
        flux: &dyn Fn(Point, Side) -> f64,
    ) -> Self {
        let neumann = DofConstraints::neumann(space.mesh(), neumann);
        let homogeneous = neumann.values.iter().all(|&v| v == 0.0);
        Self { neumann, flux: space.boundary_load(flux), homogeneous }
    }

    /// Zero normal derivative and constant flux `ε²`.
    pub fn standard(space: &C1Space, eps: f64) -> Self {
        Self::new(space, None, &|_, _| eps * eps)
    }
}

/// Precomputed operators for repeated solves on one mesh.
pub struct MASolver {
    space: C1Space,
    biharmonic: SparseMatrix,
    config: MASolverConfig,
}

impl MASolver {
    pub fn new(space: C1Space, config: MASolverConfig) -> Result<Self> {
        config.validate()?;
        let biharmonic = space.biharmonic();
        Ok(Self { space, biharmonic, config })
    }

    pub fn space(&self) -> &C1Space {
        &self.space
    }

    pub fn config(&self) -> &MASolverConfig {
        &self.config
    }

    /// `(α, φ_i) + ⟨g, φ_i⟩`.
    pub fn load(&self, alpha: &LagrangeField, bc: &BoundaryData) -> Vec<f64> {
        let mut l = self.space.load_lagrange(alpha);
        l.iter_mut().zip(&bc.flux).for_each(|(a, b)| *a += b);
        l
    }

    /// Same as [`MASolver::load`] for a pointwise density.
    pub fn load_fn(&self, alpha: impl Fn(Point) -> f64, bc: &BoundaryData) -> Vec<f64> {
        let mut l = self.space.load(alpha);
        l.iter_mut().zip(&bc.flux).for_each(|(a, b)| *a += b);
        l
    }

    fn residual_counted(&self, psi: &C1Field, load: &[f64], bc: &BoundaryData) -> (Vec<f64>, usize) {
        let (det, nonpositive) = self.space.det_vector_counted(psi);
        let k = self.biharmonic.matvec(&psi.coeffs);
        let eps = self.config.eps;
        let r = bc.neumann.free.iter().map(|&d| eps * k[d] - det[d] + load[d]).collect();
        (r, nonpositive)
    }

    /// Galerkin residual `ε(Δψ, Δφ_i) − (det D²ψ, φ_i) + load_i` on the
    /// free dofs.
    pub fn residual(&self, psi: &C1Field, load: &[f64], bc: &BoundaryData) -> Vec<f64> {
        self.residual_counted(psi, load, bc).0
    }

    /// Size of the rounding error in [`MASolver::residual`]: unit roundoff
    /// times the norm of the summed magnitudes of its terms.
    pub fn residual_noise(&self, psi: &C1Field, load: &[f64], bc: &BoundaryData) -> f64 {
        let k = &self.biharmonic;
        let eps = self.config.eps;
        let s: f64 = bc
            .neumann
            .free
            .iter()
            .map(|&d| {
                let kv: f64 = k.row(d).map(|(c, v)| (v * psi.coeffs[c]).abs()).sum();
                (eps * kv + load[d].abs()).powi(2)
            })
            .sum();
        f64::EPSILON * s.sqrt()
    }

    /// Norm of the residual with its component along the mean functional
    /// removed; that component is absorbed by the multiplier.
    pub fn residual_norm(&self, r: &[f64], bc: &BoundaryData) -> f64 {
        let c = bc.neumann.restrict(self.space.mean_vector());
        let s = dot(&c, r) / dot(&c, &c);
        r.iter().zip(&c).map(|(ri, ci)| (ri - s * ci).powi(2)).sum::<f64>().sqrt()
    }

    /// Jacobian of [`MASolver::residual`] on the free dofs.
    pub fn jacobian(&self, psi: &C1Field, bc: &BoundaryData) -> SparseMatrix {
        let full = if bc.homogeneous {
            self.space.b_matrix(psi, self.config.eps)
        } else {
            self.space.linearization(psi, self.config.eps)
        };
        full.submatrix(&bc.neumann.free)
    }

    fn factor(&self, psi: &C1Field, bc: &BoundaryData) -> Result<BorderedFactor> {
        self.bordered(&self.jacobian(psi, bc), bc)
    }

    /// Bordered factor of a free-dof operator whose kernel is the constants.
    fn bordered(&self, a: &SparseMatrix, bc: &BoundaryData) -> Result<BorderedFactor> {
        let mesh = self.space.mesh();
        let e = bc.neumann.restrict(&C1Field::constant(mesh, 1.0).coeffs);
        let centre = mesh.node_index(mesh.nx / 2, mesh.ny / 2);
        let k = bc.neumann.free.binary_search(&(4 * centre)).expect("value dofs are free");
        BorderedFactor::deflated(a, &bc.neumann.restrict(self.space.mean_vector()), &e, k, None)
    }

    /// Solves `J δ + λc = −R(w)`, `cᵀδ = γ − (w, 1)` with `J` factored at
    /// some reference state; returns the full-length update and `λ`.
    fn update(
        &self,
        factor: &BorderedFactor,
        w: &C1Field,
        r: &[f64],
        bc: &BoundaryData,
        gamma: f64,
    ) -> Result<(Vec<f64>, f64)> {
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let (d, lambda) = factor.solve_with_tol(&rhs, gamma - self.space.integral(w), STEP_TOL)?;
        Ok((bc.neumann.extend(&d), lambda))
    }

    /// One undamped Newton update at `psi`.
    pub fn newton_update(&self, psi: &C1Field, load: &[f64], bc: &BoundaryData, gamma: f64) -> Result<Vec<f64>> {
        let r = self.residual(psi, load, bc);
        Ok(self.update(&self.factor(psi, bc)?, psi, &r, bc, gamma)?.0)
    }

    /// `T(w) = w + δ` with `J(reference) δ = −R(w)`. With
    /// `reference = w` this is one Newton step.
    pub fn fixed_point_step(
        &self,
        w: &C1Field,
        reference: &C1Field,
        load: &[f64],
        bc: &BoundaryData,
        gamma: f64,
    ) -> Result<C1Field> {
        let r = self.residual(w, load, bc);
        let (d, _) = self.update(&self.factor(reference, bc)?, w, &r, bc, gamma)?;
        let mut out = w.clone();
        out.coeffs.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    /// Solution of the problem without the determinant term:
    /// `ε(Δψ, Δv) + load(v) = 0` with the same constraints.
    pub fn initial_guess(&self, load: &[f64], bc: &BoundaryData, gamma: f64) -> Result<C1Field> {
        let mut pinned = C1Field::zeros(self.space.mesh());
        bc.neumann.impose(&mut pinned.coeffs);
        let lift = self.biharmonic.matvec(&pinned.coeffs);
        let eps = self.config.eps;
        let rhs: Vec<f64> = bc.neumann.free.iter().map(|&d| -load[d] - eps * lift[d]).collect();
        let mut k = self.biharmonic.submatrix(&bc.neumann.free);
        k.scale(eps);
        let factor = self.bordered(&k, bc)?;
        let (x, _) = factor.solve_with_tol(&rhs, gamma - self.space.integral(&pinned), STEP_TOL)?;
        let ext = bc.neumann.extend(&x);
        pinned.coeffs.iter_mut().zip(&ext).for_each(|(a, b)| *a += b);
        Ok(pinned)
    }

    /// Damped Newton (or frozen-Jacobian) iteration from `guess`.
    ///
    /// The guess has its Neumann dofs overwritten and is shifted by a
    /// constant to satisfy the mean condition, which every later iterate
    /// then keeps. Non-convergence is reported through
    /// [`MASolveReport::converged`]; linear-solver failures are errors.
    pub fn solve(
        &self,
        load: &[f64],
        bc: &BoundaryData,
        guess: &C1Field,
        gamma: f64,
    ) -> Result<(C1Field, MASolveReport)> {
        let cfg = &self.config;
        let area = self.space.mesh().domain.area();
        let nq = self.space.num_quad_points() as f64;
        let mut psi = guess.clone();
        bc.neumann.impose(&mut psi.coeffs);
        psi.add_constant((gamma - self.space.integral(&psi)) / area);

        let base = (cfg.newton_tol * norm2(&bc.neumann.restrict(load))).max(RESIDUAL_FLOOR);
        let mut threshold = base.max(self.residual_noise(&psi, load, bc));
        let mut report = MASolveReport::default();
        let (mut r, mut bad) = self.residual_counted(&psi, load, bc);
        let mut norm = self.residual_norm(&r, bc);
        report.residuals.push(norm);
        report.constraint_residuals.push((self.space.integral(&psi) - gamma).abs());

        let mut frozen = None;
        if cfg.scheme == Scheme::FixedPoint {
            frozen = Some(self.factor(&psi, bc)?);
        }
        while norm > threshold && report.iterations < cfg.max_iters {
            let fresh;
            let factor = match &frozen {
                Some(f) => f,
                None => {
                    fresh = self.factor(&psi, bc)?;
                    &fresh
                }
            };
            let (delta, lambda) = self.update(factor, &psi, &r, bc, gamma)?;
            report.multiplier = lambda;
            let mut step = cfg.damping;
            let mut accepted = None;
            for _ in 0..=cfg.max_halvings {
                let mut trial = psi.clone();
                trial.coeffs.iter_mut().zip(&delta).for_each(|(a, b)| *a += step * b);
                let (rt, bt) = self.residual_counted(&trial, load, bc);
                let nt = self.residual_norm(&rt, bc);
                let guard = bt as f64 > DET_GUARD_FRACTION * nq && bad as f64 <= DET_GUARD_FRACTION * nq;
                if guard {
                    report.det_rejections += 1;
                }
                if nt.is_finite() && (nt < norm || nt <= threshold) && !guard {
                    accepted = Some((trial, rt, bt, nt));
                    break;
                }
                step *= 0.5;
            }
            let Some((trial, rt, bt, nt)) = accepted else {
                break;
            };
            if step < cfg.damping {
                report.damped_steps += 1;
            }
            psi = trial;
            threshold = base.max(self.residual_noise(&psi, load, bc));
            r = rt;
            bad = bt;
            norm = nt;
            report.iterations += 1;
            report.residuals.push(norm);
            report.constraint_residuals.push((self.space.integral(&psi) - gamma).abs());
        }
        report.converged = norm <= threshold;
        report.threshold = threshold;
        report.nonpositive_det_fraction = bad as f64 / nq;
        Ok((psi, report))
    }
}

/// Galerkin residual on the free dofs for density `alpha`.
pub fn ma_residual(solver: &MASolver, psi: &C1Field, alpha: &LagrangeField, bc: &BoundaryData) -> Vec<f64> {
    solver.residual(psi, &solver.load(alpha, bc), bc)
}

/// Newton solve for density `alpha` with mean `gamma`.
pub fn newton_solve(
    solver: &MASolver,
    alpha: &LagrangeField,
    guess: &C1Field,
    bc: &BoundaryData,
    gamma: f64,
) -> Result<(C1Field, MASolveReport)> {
    solver.solve(&solver.load(alpha, bc), bc, guess, gamma)
}

/// `T(w)` with the linearization frozen at `reference`.
pub fn fixed_point_step(
    solver: &MASolver,
    w: &C1Field,
    reference: &C1Field,
    alpha: &LagrangeField,
    bc: &BoundaryData,
    gamma: f64,
) -> Result<C1Field> {
    solver.fixed_point_step(w, reference, &solver.load(alpha, bc), bc, gamma)
}
