//! Self-checks of the discretization and solver on small meshes.
//!
//! Every check is deterministic for a given seed and reports the measured
//! quantity next to its bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{hessian_det, C1Space, CofactorEval, LagrangeSpace};
use crate::error::Result;
use crate::fields::{C1Field, C1Value};
use crate::ma_solver::{BoundaryData, MASolver, MASolverConfig};
use crate::mesh::{Domain, Location, Mesh, Point};
use crate::mms::{fd_consistency_residual, psi_errors, radial_psi, test2_problem};
use crate::quadrature::gauss_rule;
use crate::sparse::{norm2, SparseMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    /// Worst measured value.
    pub value: f64,
    pub tol: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn at_most(name: &'static str, value: f64, tol: f64) -> Self {
        Self { name, value, tol, passed: value <= tol }
    }
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {:.3e} (bound {:.1e})", self.name, self.value, self.tol)
    }
}

pub const FD_STEP: f64 = 1e-6;
pub const JACOBIAN_TOL: f64 = 1e-5;
pub const COFACTOR_TOL: f64 = 1e-13;
pub const EQUIVALENCE_TOL: f64 = 1e-12;
pub const CONTRACTION_BOUND: f64 = 0.5;
pub const PERTURBATION_H2: f64 = 1e-3;
pub const MEAN_TOL: f64 = 1e-10;
pub const CONTINUITY_TOL: f64 = 1e-11;
pub const REPRODUCTION_TOL: f64 = 1e-13;
pub const QUADRATURE_TOL: f64 = 1e-14;
pub const ROUND_TRIP_TOL: f64 = 1e-12;
pub const MMS_TOL: f64 = 1e-6;
pub const MMS_POINTS: usize = 20;

/// Runs every check.
pub fn run_checks(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(vec![
        jacobian_check(&mut rng)?,
        cofactor_check(&mut rng),
        equivalence_check(&mut rng)?,
        contraction_check(&mut rng)?,
        mean_constraint_check(&mut rng)?,
        continuity_check(&mut rng),
        reproduction_check(&mut rng),
        quadrature_check(),
        mass_spd_check()?,
        round_trip_check(&mut rng),
        mms_consistency_check(&mut rng)?,
    ])
}

fn unit_mesh(n: usize) -> Mesh {
    Mesh::new(Domain::square(1.0).expect("valid domain"), n, n).expect("valid mesh")
}

fn random_field(mesh: &Mesh, rng: &mut ChaCha8Rng, scale: f64) -> C1Field {
    let mut f = C1Field::zeros(mesh);
    f.coeffs.iter_mut().for_each(|c| *c = scale * rng.gen_range(-1.0..1.0));
    f
}

fn test2_boundary(space: &C1Space, eps: f64, t: f64) -> BoundaryData {
    let p = test2_problem(eps);
    let g = p.neumann.clone().expect("radial data");
    let flux = p.flux.clone();
    BoundaryData::new(space, Some(&move |x| g(x, t)), &move |x, s| flux(x, s, t, eps))
}

/// Central differences of the residual along random free directions
/// against the assembled Jacobian; three states with inhomogeneous and
/// two with homogeneous Neumann data.
pub fn jacobian_check(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mesh = unit_mesh(5);
    let eps = 0.05;
    let solver = MASolver::new(C1Space::new(&mesh), MASolverConfig { eps, ..Default::default() })?;
    let space = solver.space();
    let mut worst: f64 = 0.0;
    for state in 0..5 {
        let t = rng.gen_range(0.05..0.25);
        let bc = if state < 3 { test2_boundary(space, eps, t) } else { BoundaryData::standard(space, eps) };
        let load = solver.load_fn(|p| radial_psi(p, t).value, &bc);
        let mut psi = C1Field::interpolate(&mesh, |p| {
            let v = radial_psi(p, t);
            [v.value, v.grad[0], v.grad[1], v.hess[1]]
        });
        let noise = random_field(&mesh, rng, 0.1);
        psi.coeffs.iter_mut().zip(&noise.coeffs).for_each(|(a, b)| *a += b);
        bc.neumann.impose(&mut psi.coeffs);
        let dir: Vec<f64> = (0..bc.neumann.free.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let full = bc.neumann.extend(&dir);
        let shifted = |s: f64| {
            let mut p = psi.clone();
            p.coeffs.iter_mut().zip(&full).for_each(|(a, b)| *a += s * b);
            solver.residual(&p, &load, &bc)
        };
        let (rp, rm) = (shifted(FD_STEP), shifted(-FD_STEP));
        let jv = solver.jacobian(&psi, &bc).matvec(&dir);
        let diff: Vec<f64> =
            rp.iter().zip(&rm).zip(&jv).map(|((a, b), j)| (a - b) / (2.0 * FD_STEP) - j).collect();
        worst = worst.max(norm2(&diff) / norm2(&jv));
    }
    Ok(CheckOutcome::at_most("jacobian vs central differences (relative)", worst, JACOBIAN_TOL))
}

/// Symmetry, trace and determinant of the cofactor matrix at the
/// quadrature points of a random field, relative to `|D²ψ|²`.
pub fn cofactor_check(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mesh = unit_mesh(4);
    let space = C1Space::new(&mesh);
    let psi = random_field(&mesh, rng, 1.0);
    let mut worst: f64 = 0.0;
    for v in space.evaluate(&psi) {
        let h = v.hess;
        let phi = CofactorEval::from_hessian(h);
        let scale = 1.0 + h.iter().map(|x| x * x).sum::<f64>();
        let e = [[1.0, 0.0], [0.0, 1.0]];
        let sym = (phi.apply(e[0])[1] - phi.apply(e[1])[0]).abs();
        let trace = (phi.trace() - (h[0] + h[2])).abs();
        let det = (phi.det() - (h[0] * h[2] - h[1] * h[1])).abs();
        // Φ D²ψ = det(D²ψ) I
        let hm = [[h[0], h[1]], [h[1], h[2]]];
        let d = hessian_det(h);
        let mut prod: f64 = 0.0;
        for (i, ei) in e.iter().enumerate() {
            let col = phi.apply([hm[0][i], hm[1][i]]);
            prod = prod.max((col[0] - d * ei[0]).abs()).max((col[1] - d * ei[1]).abs());
        }
        worst = worst.max(sym / scale.sqrt()).max(trace / scale.sqrt()).max(det / scale).max(prod / scale);
    }
    CheckOutcome::at_most("cofactor symmetry, trace and determinant", worst, COFACTOR_TOL)
}

/// A fixed-point step with the linearization frozen at the current
/// iterate is one Newton step.
pub fn equivalence_check(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mesh = unit_mesh(5);
    let eps = 0.01;
    let solver = MASolver::new(C1Space::new(&mesh), MASolverConfig { eps, ..Default::default() })?;
    let t = 0.2;
    let bc = test2_boundary(solver.space(), eps, t);
    let exact = test2_problem(eps).alpha.expect("radial data");
    let load = solver.load_fn(|p| exact(p, t), &bc);
    let mut w = C1Field::interpolate(&mesh, |p| {
        let v = radial_psi(p, t);
        [v.value, v.grad[0], v.grad[1], v.hess[1]]
    });
    let noise = random_field(&mesh, rng, 0.05);
    w.coeffs.iter_mut().zip(&noise.coeffs).for_each(|(a, b)| *a += b);
    bc.neumann.impose(&mut w.coeffs);
    let gamma = crate::mms::radial_mean(t);
    let fp = solver.fixed_point_step(&w, &w, &load, &bc, gamma)?;
    let d = solver.newton_update(&w, &load, &bc, gamma)?;
    let diff: Vec<f64> = fp.coeffs.iter().zip(&w.coeffs).zip(&d).map(|((f, w), d)| f - (w + d)).collect();
    let value = norm2(&diff) / norm2(&fp.coeffs);
    Ok(CheckOutcome::at_most("fixed-point step equals Newton step (relative)", value, EQUIVALENCE_TOL))
}

fn h2_norm(f: &C1Field) -> f64 {
    psi_errors(f, |_| C1Value::default()).h2()
}

/// `‖T(ψ_h + d) − T(ψ_h)‖_{H²} / ‖d‖_{H²}` at a converged Test-2 solution
/// with the linearization frozen at `ψ_h`, for random `d` of H²-norm
/// [`PERTURBATION_H2`].
pub fn contraction_check(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mesh = unit_mesh(8);
    let eps = 0.01;
    let solver = MASolver::new(C1Space::new(&mesh), MASolverConfig { eps, ..Default::default() })?;
    let t = 0.25;
    let bc = test2_boundary(solver.space(), eps, t);
    let exact = test2_problem(eps).alpha.expect("radial data");
    let load = solver.load_fn(|p| exact(p, t), &bc);
    let gamma = crate::mms::radial_mean(t);
    let guess = solver.initial_guess(&load, &bc, gamma)?;
    let (psi, report) = solver.solve(&load, &bc, &guess, gamma)?;
    if !report.converged {
        return Ok(CheckOutcome::at_most("contraction ratio near a solution", f64::INFINITY, CONTRACTION_BOUND));
    }
    let base = solver.fixed_point_step(&psi, &psi, &load, &bc, gamma)?;
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let dir: Vec<f64> = (0..bc.neumann.free.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut d = C1Field::from_coeffs(&mesh, bc.neumann.extend(&dir))?;
        let space = solver.space();
        d.add_constant(-space.integral(&d) / mesh.domain.area());
        let s = PERTURBATION_H2 / h2_norm(&d);
        d.coeffs.iter_mut().for_each(|c| *c *= s);
        let mut v = psi.clone();
        v.coeffs.iter_mut().zip(&d.coeffs).for_each(|(a, b)| *a += b);
        let tv = solver.fixed_point_step(&v, &psi, &load, &bc, gamma)?;
        let diff = C1Field::from_coeffs(&mesh, tv.coeffs.iter().zip(&base.coeffs).map(|(a, b)| a - b).collect())?;
        worst = worst.max(h2_norm(&diff) / h2_norm(&d));
    }
    Ok(CheckOutcome::at_most("contraction ratio near a solution", worst, CONTRACTION_BOUND))
}

/// `|(ψ, 1) − γ|` at every Newton iterate, from a rough start.
pub fn mean_constraint_check(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mesh = unit_mesh(6);
    let eps = 0.01;
    let solver = MASolver::new(C1Space::new(&mesh), MASolverConfig { eps, ..Default::default() })?;
    let mut worst: f64 = 0.0;
    for &t in &[0.1, 0.25] {
        let bc = test2_boundary(solver.space(), eps, t);
        let exact = test2_problem(eps).alpha.expect("radial data");
        let load = solver.load_fn(|p| exact(p, t), &bc);
        let gamma = crate::mms::radial_mean(t);
        let mut guess = solver.initial_guess(&load, &bc, gamma)?;
        let noise = random_field(&mesh, rng, 0.01);
        guess.coeffs.iter_mut().zip(&noise.coeffs).for_each(|(a, b)| *a += b);
        let (_, report) = solver.solve(&load, &bc, &guess, gamma)?;
        let m = report.constraint_residuals.iter().fold(0.0_f64, |a, &b| a.max(b));
        worst = worst.max(if report.converged { m } else { f64::INFINITY });
    }
    Ok(CheckOutcome::at_most("mean constraint at every iterate", worst, MEAN_TOL))
}

/// Value and gradient of a random field seen from both cells of every
/// interior edge.
pub fn continuity_check(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mesh = Mesh::new(Domain::new(-0.5, 1.5, 0.0, 1.25).expect("valid domain"), 5, 4).expect("valid mesh");
    let psi = random_field(&mesh, rng, 1.0);
    let mut worst: f64 = 0.0;
    let mut compare = |a: C1Value, b: C1Value| {
        worst = worst
            .max((a.value - b.value).abs())
            .max((a.grad[0] - b.grad[0]).abs())
            .max((a.grad[1] - b.grad[1]).abs());
    };
    for j in 0..mesh.ny {
        for i in 0..mesh.nx {
            let c = mesh.cell_index(i, j);
            for _ in 0..4 {
                let s = rng.gen_range(0.0..1.0);
                if i + 1 < mesh.nx {
                    let r = mesh.cell_index(i + 1, j);
                    compare(psi.eval_local(c, [1.0, s]), psi.eval_local(r, [0.0, s]));
                }
                if j + 1 < mesh.ny {
                    let u = mesh.cell_index(i, j + 1);
                    compare(psi.eval_local(c, [s, 1.0]), psi.eval_local(u, [s, 0.0]));
                }
            }
        }
    }
    CheckOutcome::at_most("C1 continuity across interior edges", worst, CONTINUITY_TOL)
}

/// Interpolation of a random bicubic is exact.
pub fn reproduction_check(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mesh = unit_mesh(4);
    let mut a = [[0.0; 4]; 4];
    a.iter_mut().flatten().for_each(|c| *c = rng.gen_range(-1.0..1.0));
    let pw = |x: f64, k: usize, d: usize| -> f64 {
        if d > k {
            return 0.0;
        }
        let f: f64 = ((k - d + 1)..=k).map(|m| m as f64).product();
        f * x.powi((k - d) as i32)
    };
    let poly = |p: Point, dx: usize, dy: usize| -> f64 {
        let mut s = 0.0;
        for (i, row) in a.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                s += c * pw(p[0], i, dx) * pw(p[1], j, dy);
            }
        }
        s
    };
    let f = C1Field::interpolate(&mesh, |p| [poly(p, 0, 0), poly(p, 1, 0), poly(p, 0, 1), poly(p, 1, 1)]);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let p = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let v = f.eval(p).expect("point inside");
        let exact = [poly(p, 0, 0), poly(p, 1, 0), poly(p, 0, 1), poly(p, 2, 0), poly(p, 1, 1), poly(p, 0, 2)];
        let got = [v.value, v.grad[0], v.grad[1], v.hess[0], v.hess[1], v.hess[2]];
        for (g, e) in got.iter().zip(&exact) {
            worst = worst.max((g - e).abs() / (1.0 + e.abs()));
        }
    }
    CheckOutcome::at_most("bicubic reproduction", worst, REPRODUCTION_TOL)
}

/// The `n`-point tensor rule integrates `x^a y^b`, `a, b < 2n`, exactly.
pub fn quadrature_check() -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for n in 1..=10 {
        let q = gauss_rule(n).expect("valid order");
        for a in 0..2 * n {
            for b in 0..2 * n {
                let s: f64 = q.iter().map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                let exact = 1.0 / ((a + 1) * (b + 1)) as f64;
                worst = worst.max((s - exact).abs());
            }
        }
    }
    CheckOutcome::at_most("tensor Gauss exactness", worst, QUADRATURE_TOL)
}

/// Cholesky of the C¹ mass matrix and the Lagrange mass matrices; the
/// value is the largest asymmetry, infinite if a pivot is not positive.
pub fn mass_spd_check() -> Result<CheckOutcome> {
    let mesh = Mesh::new(Domain::new(0.0, 2.0, 0.0, 1.0)?, 4, 3)?;
    let mut mats = vec![C1Space::new(&mesh).mass()];
    for k in 1..=3 {
        mats.push(LagrangeSpace::new(&mesh, k)?.mass());
    }
    let mut worst: f64 = 0.0;
    for m in &mats {
        let scale = m.values().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        worst = worst.max(m.asymmetry() / scale);
        if !dense_cholesky_ok(m) {
            worst = f64::INFINITY;
        }
    }
    Ok(CheckOutcome::at_most("mass matrices symmetric positive definite", worst, 1e-14))
}

fn dense_cholesky_ok(m: &SparseMatrix) -> bool {
    let mut a = m.to_dense();
    let n = a.len();
    for j in 0..n {
        let d = a[j][j] - (0..j).map(|k| a[j][k] * a[j][k]).sum::<f64>();
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let s = a[i][j] - (0..j).map(|k| a[i][k] * a[j][k]).sum::<f64>();
            a[i][j] = s / d;
        }
    }
    true
}

/// `map_to_global ∘ locate` is the identity on random points.
pub fn round_trip_check(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let domain = Domain::new(-1.0, 2.5, 0.5, 3.0).expect("valid domain");
    let mesh = Mesh::new(domain, 7, 9).expect("valid mesh");
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = [rng.gen_range(domain.xmin..=domain.xmax), rng.gen_range(domain.ymin..=domain.ymax)];
        match mesh.locate(p) {
            Location::Inside { cell, local } => {
                let q = mesh.map_to_global(cell, local);
                worst = worst.max((q[0] - p[0]).abs()).max((q[1] - p[1]).abs());
            }
            Location::Outside => worst = f64::INFINITY,
        }
    }
    CheckOutcome::at_most("mesh locate and map round trip", worst, ROUND_TRIP_TOL)
}

/// Finite-difference residual of the regularized radial closed forms.
pub fn mms_consistency_check(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let eps = 0.01;
    let problem = test2_problem(eps);
    let mut worst: f64 = 0.0;
    for _ in 0..MMS_POINTS {
        let p = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let t = rng.gen_range(0.0..0.25);
        worst = worst.max(fd_consistency_residual(&problem, eps, p, t)?.abs());
    }
    Ok(CheckOutcome::at_most("manufactured solution consistency", worst, MMS_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_checks(7).unwrap() {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn outcome_formatting() {
        let c = CheckOutcome::at_most("x", 2.0, 1.0);
        assert!(!c.passed);
        assert!(c.to_string().starts_with("FAIL x"));
    }
}
