//! Manufactured problems, error norms and convergence rates.
//!
//! Tests 1 and 2 share the radial potential `ψ = exp(t|x|²/2)` on the unit
//! square; the velocity it induces is tangent to circles, so the density
//! is only driven by the source `F = ∂α/∂t`. Test 3 has no exact solution.

use std::sync::Arc;

use crate::elements::{c1_eval, LagrangeBasis};
use crate::error::{Error, Result};
use crate::fields::{combine, lagrange_cell_dofs, C1Field, C1Value, LagrangeField};
use crate::mesh::{Domain, Point, Side};
use crate::quadrature::{gauss_rule, GaussRule1d, NORM_ORDER};

pub type ScalarFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;
pub type JetFn = Arc<dyn Fn(Point, f64) -> C1Value + Send + Sync>;
pub type NeumannFn = Arc<dyn Fn(Point, f64) -> [f64; 3] + Send + Sync>;
/// `(x, side, t, ε) ↦ ε ∂Δψ/∂ν`.
pub type FluxFn = Arc<dyn Fn(Point, Side, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Test1,
    Test2,
    Test3,
    Custom,
}

/// Data of one problem. Time is the second closure argument.
#[derive(Clone)]
pub struct ManufacturedProblem {
    pub kind: ProblemKind,
    pub domain: Domain,
    /// Exact potential with first and second derivatives.
    pub psi: Option<JetFn>,
    /// Exact density.
    pub alpha: Option<ScalarFn>,
    /// Nodal `[ψ_x, ψ_y, ψ_xy]` carrying the normal-derivative data;
    /// `None` is the homogeneous condition.
    pub neumann: Option<NeumannFn>,
    /// Boundary values of the density.
    pub dirichlet: ScalarFn,
    pub flux: FluxFn,
    /// Transport source.
    pub source: Option<ScalarFn>,
    /// Mean value `(ψ, 1)` at time `t`.
    pub mean: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub alpha0: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for ManufacturedProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedProblem").field("kind", &self.kind).field("domain", &self.domain).finish()
    }
}

fn r2(p: Point) -> f64 {
    p[0] * p[0] + p[1] * p[1]
}

/// `exp(t|x|²/2)` and its derivatives.
pub fn radial_psi(p: Point, t: f64) -> C1Value {
    let e = (t * r2(p) / 2.0).exp();
    let (x, y) = (p[0], p[1]);
    C1Value {
        value: e,
        grad: [t * x * e, t * y * e],
        hess: [(t + t * t * x * x) * e, t * t * x * y * e, (t + t * t * y * y) * e],
    }
}

/// `det D²ψ` for the radial potential.
pub fn radial_alpha(p: Point, t: f64) -> f64 {
    let r = r2(p);
    t * t * (1.0 + t * r) * (t * r).exp()
}

/// `Δ²ψ` for the radial potential.
pub fn radial_bilaplacian(p: Point, t: f64) -> f64 {
    let r = r2(p);
    t * t * (t * r / 2.0).exp() * (8.0 + 8.0 * t * r + t * t * r * r)
}

/// `∂Δψ/∂ν` for the radial potential.
pub fn radial_flux(p: Point, side: Side, t: f64) -> f64 {
    let nu = side.normal();
    let r = r2(p);
    (4.0 * t * t + t * t * t * r) * (p[0] * nu[0] + p[1] * nu[1]) * (t * r / 2.0).exp()
}

fn radial_source(p: Point, t: f64) -> f64 {
    let r = r2(p);
    t * (2.0 + 4.0 * t * r + t * t * r * r) * (t * r).exp()
}

fn radial_bilaplacian_dt(p: Point, t: f64) -> f64 {
    let r = r2(p);
    t / 2.0 * (t * r / 2.0).exp() * (32.0 + 56.0 * r * t + 16.0 * t * t * r * r + t * t * t * r * r * r)
}

/// `∫_{[0,1]²} exp(t|x|²/2) dx`.
pub fn radial_mean(t: f64) -> f64 {
    let g = GaussRule1d::new(10).expect("valid order");
    let pieces = 4;
    let mut s = 0.0;
    for k in 0..pieces {
        for (x, w) in g.points.iter().zip(&g.weights) {
            let xx = (k as f64 + x) / pieces as f64;
            s += w / pieces as f64 * (t * xx * xx / 2.0).exp();
        }
    }
    s * s
}

fn radial_neumann() -> NeumannFn {
    Arc::new(|p, t| {
        let j = radial_psi(p, t);
        [j.grad[0], j.grad[1], j.hess[1]]
    })
}

fn unit_square() -> Domain {
    Domain::square(1.0).expect("valid domain")
}

/// Unregularized radial problem with the base boundary flux `ε²`.
pub fn test1_problem() -> ManufacturedProblem {
    ManufacturedProblem {
        kind: ProblemKind::Test1,
        domain: unit_square(),
        psi: Some(Arc::new(radial_psi)),
        alpha: Some(Arc::new(radial_alpha)),
        neumann: Some(radial_neumann()),
        dirichlet: Arc::new(radial_alpha),
        flux: Arc::new(|_, _, _, eps| eps * eps),
        source: Some(Arc::new(radial_source)),
        mean: Arc::new(radial_mean),
        alpha0: Arc::new(|p| radial_alpha(p, 0.0)),
    }
}

/// Regularized radial problem: `ψ` is the exact solution for parameter
/// `eps`, with the density and flux adjusted accordingly.
pub fn test2_problem(eps: f64) -> ManufacturedProblem {
    let alpha: ScalarFn = Arc::new(move |p, t| radial_alpha(p, t) - eps * radial_bilaplacian(p, t));
    ManufacturedProblem {
        kind: ProblemKind::Test2,
        domain: unit_square(),
        psi: Some(Arc::new(radial_psi)),
        alpha: Some(alpha.clone()),
        neumann: Some(radial_neumann()),
        dirichlet: alpha,
        flux: Arc::new(|p, side, t, eps| eps * radial_flux(p, side, t)),
        source: Some(Arc::new(move |p, t| radial_source(p, t) - eps * radial_bilaplacian_dt(p, t))),
        mean: Arc::new(radial_mean),
        alpha0: Arc::new(move |p| radial_alpha(p, 0.0) - eps * radial_bilaplacian(p, 0.0)),
    }
}

/// Initial density of the localized-blob problem on `(0, 6)²`.
pub fn test3_alpha0(p: Point) -> f64 {
    let (x, y) = (p[0], p[1]);
    if (2.0..=4.0).contains(&x) && (2.25..=3.75).contains(&y) {
        0.125 * (4.0 - x) * (x - 2.0) * (3.75 - y) * (y - 2.25)
    } else {
        0.0
    }
}

/// Localized blob on `(0, 6)²` with homogeneous data and zero mean.
pub fn test3_problem() -> ManufacturedProblem {
    ManufacturedProblem {
        kind: ProblemKind::Test3,
        domain: Domain::square(6.0).expect("valid domain"),
        psi: None,
        alpha: None,
        neumann: None,
        dirichlet: Arc::new(|_, _| 0.0),
        flux: Arc::new(|_, _, _, eps| eps * eps),
        source: None,
        mean: Arc::new(|_| 0.0),
        alpha0: Arc::new(test3_alpha0),
    }
}

/// `−εΔ²ψ + det D²ψ − α` at `(p, t)` for `problem`, with every derivative
/// of `ψ` replaced by a fourth-order finite difference of its values.
pub fn fd_consistency_residual(problem: &ManufacturedProblem, eps: f64, p: Point, t: f64) -> Result<f64> {
    let (Some(psi), Some(alpha)) = (problem.psi.clone(), problem.alpha.clone()) else {
        return Err(Error::Config("problem has no closed-form solution".into()));
    };
    let f = |dx: f64, dy: f64| psi([p[0] + dx, p[1] + dy], t).value;
    const D1: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
    const D2: [(f64, f64); 5] = [(-2.0, -1.0), (-1.0, 16.0), (0.0, -30.0), (1.0, 16.0), (2.0, -1.0)];
    const D4: [(f64, f64); 7] =
        [(-3.0, -1.0), (-2.0, 12.0), (-1.0, -39.0), (0.0, 56.0), (1.0, -39.0), (2.0, 12.0), (3.0, -1.0)];
    let h = FD_STEP_HESSIAN;
    let xx: f64 = D2.iter().map(|&(k, c)| c * f(k * h, 0.0)).sum::<f64>() / (12.0 * h * h);
    let yy: f64 = D2.iter().map(|&(k, c)| c * f(0.0, k * h)).sum::<f64>() / (12.0 * h * h);
    let mut xy = 0.0;
    for &(i, ci) in &D1 {
        for &(j, cj) in &D1 {
            xy += ci * cj * f(i * h, j * h);
        }
    }
    xy /= 144.0 * h * h;
    let h = FD_STEP_BIHARMONIC;
    let xxxx: f64 = D4.iter().map(|&(k, c)| c * f(k * h, 0.0)).sum::<f64>() / (6.0 * h.powi(4));
    let yyyy: f64 = D4.iter().map(|&(k, c)| c * f(0.0, k * h)).sum::<f64>() / (6.0 * h.powi(4));
    let mut xxyy = 0.0;
    for &(i, ci) in &D2 {
        for &(j, cj) in &D2 {
            xxyy += ci * cj * f(i * h, j * h);
        }
    }
    xxyy /= 144.0 * h.powi(4);
    let bilap = xxxx + 2.0 * xxyy + yyyy;
    Ok(-eps * bilap + xx * yy - xy * xy - alpha(p, t))
}

const FD_STEP_HESSIAN: f64 = 1e-3;
const FD_STEP_BIHARMONIC: f64 = 2e-2;

/// Error norms of a potential. Full norms are the square roots of sums
/// of the squared seminorm components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PsiErrors {
    pub l2: f64,
    pub h1_semi: f64,
    pub h2_semi: f64,
}

impl PsiErrors {
    pub fn h1(&self) -> f64 {
        self.l2.hypot(self.h1_semi)
    }

    pub fn h2(&self) -> f64 {
        (self.l2 * self.l2 + self.h1_semi * self.h1_semi + self.h2_semi * self.h2_semi).sqrt()
    }
}

/// Which exact solution a report is measured against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Reference {
    /// The solution of the regularized problem for the run's `ε`.
    #[default]
    Regularized,
    /// The solution of the Monge–Ampère problem itself.
    Unregularized,
}

/// One row of a convergence table.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorReport {
    pub h: f64,
    pub dt: f64,
    pub eps: f64,
    pub t: f64,
    pub psi_l2: f64,
    pub psi_h1: f64,
    pub psi_h2: f64,
    pub alpha_l2: f64,
    pub reference: Reference,
}

impl ErrorReport {
    pub fn new(h: f64, dt: f64, eps: f64, t: f64, psi: PsiErrors, alpha_l2: f64) -> Self {
        Self { h, dt, eps, t, psi_l2: psi.l2, psi_h1: psi.h1(), psi_h2: psi.h2(), alpha_l2, reference: Reference::Regularized }
    }
}

/// `ψ_h − ψ` in L², H¹ and H² with the over-integrating rule.
pub fn psi_errors(field: &C1Field, exact: impl Fn(Point) -> C1Value) -> PsiErrors {
    let mesh = &field.mesh;
    let q = gauss_rule(NORM_ORDER).expect("valid order");
    let tables: Vec<_> = q.points.iter().map(|&p| c1_eval(p, mesh.hx, mesh.hy)).collect();
    let area = mesh.hx * mesh.hy;
    let (mut l2, mut h1, mut h2) = (0.0, 0.0, 0.0);
    for cell in 0..mesh.num_cells() {
        let c = field.cell_coeffs(cell);
        for ((t, &w), &p) in tables.iter().zip(&q.weights).zip(&q.points) {
            let v = combine(t, &c);
            let e = exact(mesh.map_to_global(cell, p));
            let w = w * area;
            l2 += w * (v.value - e.value).powi(2);
            h1 += w * ((v.grad[0] - e.grad[0]).powi(2) + (v.grad[1] - e.grad[1]).powi(2));
            h2 += w
                * ((v.hess[0] - e.hess[0]).powi(2)
                    + 2.0 * (v.hess[1] - e.hess[1]).powi(2)
                    + (v.hess[2] - e.hess[2]).powi(2));
        }
    }
    PsiErrors { l2: l2.sqrt(), h1_semi: h1.sqrt(), h2_semi: h2.sqrt() }
}

/// `‖α_h − α‖_{L²}` with the over-integrating rule.
pub fn alpha_error(field: &LagrangeField, exact: impl Fn(Point) -> f64) -> f64 {
    let mesh = &field.mesh;
    let q = gauss_rule(NORM_ORDER).expect("valid order");
    let basis = LagrangeBasis::new(field.degree).expect("validated degree");
    let tables: Vec<Vec<f64>> = q
        .points
        .iter()
        .map(|&p| {
            let mut v = vec![0.0; basis.len()];
            basis.values_into(p, &mut v);
            v
        })
        .collect();
    let area = mesh.hx * mesh.hy;
    let mut s = 0.0;
    for cell in 0..mesh.num_cells() {
        let dofs = lagrange_cell_dofs(mesh, field.degree, cell);
        for ((t, &w), &p) in tables.iter().zip(&q.weights).zip(&q.points) {
            let v: f64 = dofs.iter().zip(t).map(|(&d, s)| field.coeffs[d] * s).sum();
            s += w * area * (v - exact(mesh.map_to_global(cell, p))).powi(2);
        }
    }
    s.sqrt()
}

/// Least-squares slope of `log(error)` against `log(param)`.
pub fn convergence_rate(errors: &[f64], params: &[f64]) -> Result<f64> {
    if errors.len() != params.len() {
        return Err(Error::RateInput(format!("{} errors for {} parameters", errors.len(), params.len())));
    }
    if errors.len() < 2 {
        return Err(Error::RateInput("at least two samples are required".into()));
    }
    if errors.iter().chain(params).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::RateInput("errors and parameters must be positive".into()));
    }
    let xs: Vec<f64> = params.iter().map(|p| p.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::RateInput("parameters must not all be equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Slopes between consecutive samples.
pub fn pairwise_rates(errors: &[f64], params: &[f64]) -> Result<Vec<f64>> {
    errors
        .windows(2)
        .zip(params.windows(2))
        .map(|(e, p)| convergence_rate(e, p))
        .collect()
}

/// Fitted rates of the four columns of a table against `param`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableRates {
    pub psi_l2: f64,
    pub psi_h1: f64,
    pub psi_h2: f64,
    pub alpha_l2: Option<f64>,
}

pub fn table_rates(reports: &[ErrorReport], param: impl Fn(&ErrorReport) -> f64) -> Result<TableRates> {
    let p: Vec<f64> = reports.iter().map(param).collect();
    let col = |f: fn(&ErrorReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    Ok(TableRates {
        psi_l2: convergence_rate(&col(|r| r.psi_l2), &p)?,
        psi_h1: convergence_rate(&col(|r| r.psi_h1), &p)?,
        psi_h2: convergence_rate(&col(|r| r.psi_h2), &p)?,
        alpha_l2: convergence_rate(&col(|r| r.alpha_l2), &p).ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test2_closed_forms_satisfy_regularized_equation() {
        let p = test2_problem(0.01);
        for &(x, y, t) in &[(0.3, 0.7, 0.25), (0.9, 0.1, 0.1), (0.5, 0.5, 0.2)] {
            let r = fd_consistency_residual(&p, 0.01, [x, y], t).unwrap();
            assert!(r.abs() < 1e-6, "{r}");
        }
        // the unregularized density leaves the ε-term behind
        let r = fd_consistency_residual(&test1_problem(), 0.01, [0.5, 0.5], 0.25).unwrap();
        assert!(r.abs() > 1e-3);
        assert!(fd_consistency_residual(&test3_problem(), 0.01, [1.0, 1.0], 0.0).is_err());
    }
    use crate::mesh::Mesh;

    #[test]
    fn printed_values() {
        assert_eq!(radial_psi([0.0, 0.0], 0.25).value, 1.0);
        assert!((radial_alpha([0.0, 0.0], 0.25) - 0.0625).abs() < 1e-15);
        let p = test2_problem(0.01);
        assert!(((p.alpha.unwrap())([0.0, 0.0], 0.25) - 0.0575).abs() < 1e-15);
        assert!((test3_alpha0([3.0, 3.0]) - 0.0703125).abs() < 1e-15);
        assert_eq!(test3_alpha0([1.0, 3.0]), 0.0);
        assert_eq!(test3_alpha0([3.0, 4.0]), 0.0);
    }

    #[test]
    fn mean_matches_fine_quadrature() {
        for t in [0.0, 0.1, 0.25, 1.0] {
            let q = gauss_rule(10).unwrap();
            let n = 8;
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for (p, w) in q.iter() {
                        let x = [(i as f64 + p[0]) / n as f64, (j as f64 + p[1]) / n as f64];
                        s += w / (n * n) as f64 * radial_psi(x, t).value;
                    }
                }
            }
            assert!((radial_mean(t) - s).abs() < 1e-13, "t={t}");
        }
    }

    #[test]
    fn rates() {
        assert!((convergence_rate(&[1e-2, 2.5e-3], &[1e-1, 5e-2]).unwrap() - 2.0).abs() < 1e-12);
        assert!(convergence_rate(&[0.3, 0.3, 0.3], &[1.0, 0.5, 0.25]).unwrap().abs() < 1e-14);
        let s = convergence_rate(&[0.000214135, 6.15715e-05], &[0.00694, 0.0025]).unwrap();
        assert!((s - 1.22).abs() < 0.02, "{s}");
        assert!(convergence_rate(&[1.0], &[1.0]).is_err());
        assert!(convergence_rate(&[1.0, -1.0], &[1.0, 2.0]).is_err());
        assert!(convergence_rate(&[1.0, 0.0], &[1.0, 2.0]).is_err());
        assert!(convergence_rate(&[1.0, 2.0], &[1.0, 1.0]).is_err());
        assert_eq!(pairwise_rates(&[1.0, 0.25, 0.0625], &[1.0, 0.5, 0.25]).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn zero_errors_for_matching_fields() {
        let m = Mesh::new(Domain::square(1.0).unwrap(), 3, 3).unwrap();
        let e = psi_errors(&C1Field::zeros(&m), |_| C1Value::default());
        assert_eq!((e.l2, e.h1(), e.h2()), (0.0, 0.0, 0.0));
        assert_eq!(alpha_error(&LagrangeField::zeros(&m, 3).unwrap(), |_| 0.0), 0.0);
    }

    #[test]
    fn known_offset_norms() {
        // field − exact = a·x: L² = a/√3, H¹ semi = a, H² semi = 0
        let m = Mesh::new(Domain::square(1.0).unwrap(), 4, 4).unwrap();
        let a = 1e-3;
        let f = C1Field::interpolate(&m, |p| [p[0] * p[1] + a * p[0], p[1] + a, p[0], 1.0]);
        let e = psi_errors(&f, |p| C1Value { value: p[0] * p[1], grad: [p[1], p[0]], hess: [0.0, 1.0, 0.0] });
        assert!((e.l2 - a / 3f64.sqrt()).abs() < 1e-15);
        assert!((e.h1_semi - a).abs() < 1e-15);
        assert!(e.h2_semi < 1e-14);
    }

    #[test]
    fn interpolation_errors_shrink_at_expected_orders() {
        let t = 0.25;
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for n in [4, 8, 16] {
            let m = Mesh::new(Domain::square(1.0).unwrap(), n, n).unwrap();
            let f = C1Field::interpolate(&m, |p| {
                let j = radial_psi(p, t);
                [j.value, j.grad[0], j.grad[1], j.hess[1]]
            });
            errs.push(psi_errors(&f, |p| radial_psi(p, t)));
            hs.push(m.h());
        }
        let col = |g: fn(&PsiErrors) -> f64| errs.iter().map(g).collect::<Vec<_>>();
        assert!(convergence_rate(&col(|e| e.l2), &hs).unwrap() > 3.7);
        assert!(convergence_rate(&col(|e| e.h1_semi), &hs).unwrap() > 2.7);
        assert!(convergence_rate(&col(|e| e.h2_semi), &hs).unwrap() > 1.8);
    }
}
