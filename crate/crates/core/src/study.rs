//! Convergence experiments on the radial problems.

use crate::error::{Error, Result};
use crate::mms::{alpha_error, psi_errors, radial_alpha, radial_psi, ErrorReport, ProblemKind, Reference};
use crate::simulation::{SimConfig, Simulation};

/// Test 2 at `t_final` on each mesh in `cells`, with `Δt = h²`.
/// Errors are measured against the regularized exact solution.
pub fn convergence_study(
    cells: &[usize],
    eps: f64,
    t_final: f64,
    base: &SimConfig,
    mut on_case: impl FnMut(&ErrorReport),
) -> Result<Vec<ErrorReport>> {
    if cells.is_empty() {
        return Err(Error::Config("no meshes given".into()));
    }
    let mut out = Vec::with_capacity(cells.len());
    for &n in cells {
        let h = 1.0 / n as f64;
        let mut cfg = SimConfig { problem: ProblemKind::Test2, cells: n, dt: h * h, t_final, ..base.clone() };
        cfg.solver.eps = eps;
        let report = run_case(cfg, Reference::Regularized)?;
        on_case(&report);
        out.push(report);
    }
    Ok(out)
}

/// Test 1 at `t_final` for each `ε` on a fixed mesh and step. Errors are
/// measured against the unregularized solution.
pub fn eps_sweep(
    eps: &[f64],
    cells: usize,
    dt: f64,
    t_final: f64,
    base: &SimConfig,
    mut on_case: impl FnMut(&ErrorReport),
) -> Result<Vec<ErrorReport>> {
    if eps.is_empty() {
        return Err(Error::Config("no epsilon values given".into()));
    }
    let mut out = Vec::with_capacity(eps.len());
    for &e in eps {
        let mut cfg = SimConfig { problem: ProblemKind::Test1, cells, dt, t_final, ..base.clone() };
        cfg.solver.eps = e;
        let report = run_case(cfg, Reference::Unregularized)?;
        on_case(&report);
        out.push(report);
    }
    Ok(out)
}

fn run_case(cfg: SimConfig, reference: Reference) -> Result<ErrorReport> {
    let sim = Simulation::new(cfg)?;
    let state = sim.run_with(|_| Ok(()))?;
    let t = state.t;
    let cfg = sim.config();
    let (psi, alpha) = match reference {
        Reference::Regularized => {
            let p = sim.problem();
            let exact_psi = p.psi.clone().ok_or_else(|| Error::Config("problem has no exact potential".into()))?;
            let exact_alpha = p.alpha.clone().ok_or_else(|| Error::Config("problem has no exact density".into()))?;
            (psi_errors(&state.psi, |x| exact_psi(x, t)), alpha_error(&state.alpha, |x| exact_alpha(x, t)))
        }
        Reference::Unregularized => {
            (psi_errors(&state.psi, |x| radial_psi(x, t)), alpha_error(&state.alpha, |x| radial_alpha(x, t)))
        }
    };
    let mut report = ErrorReport::new(sim.mesh().h(), cfg.dt, cfg.solver.eps, t, psi, alpha);
    report.reference = reference;
    Ok(report)
}
