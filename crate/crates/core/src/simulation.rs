//! Time loop alternating Monge–Ampère solves and transport steps.
//!
//! State `m` holds `α^m` and the potential `ψ^m` solved from it. A step
//! transports `α^m` with the velocity of `ψ^m` and then solves for
//! `ψ^{m+1}`, warm-started from `ψ^m`.

use crate::assembly::C1Space;
use crate::error::{Error, Result};
use crate::fields::{C1Field, LagrangeField};
use crate::ma_solver::{BoundaryData, MASolveReport, MASolver, MASolverConfig};
use crate::mesh::{Mesh, Point};
use crate::mms::{test1_problem, test2_problem, test3_problem, ManufacturedProblem, ProblemKind};
use crate::quadrature::DEFAULT_ORDER;
use crate::transport::{FootPolicy, Transport, TransportConfig, TransportMethod};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitMethod {
    #[default]
    Interpolate,
    Projection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub problem: ProblemKind,
    /// Cells per axis.
    pub cells: usize,
    pub dt: f64,
    pub t_final: f64,
    /// Lagrange degree of the density.
    pub degree: usize,
    pub solver: MASolverConfig,
    /// Gauss points per axis for assembly.
    pub n_quad: usize,
    /// Times at which states are recorded.
    pub snapshots: Vec<f64>,
    pub transport: TransportMethod,
    pub policy: FootPolicy,
    pub init: InitMethod,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Test3,
            cells: 120,
            dt: 0.001,
            t_final: 0.1,
            degree: 3,
            solver: MASolverConfig::default(),
            n_quad: DEFAULT_ORDER,
            snapshots: Vec::new(),
            transport: TransportMethod::L2Projection,
            policy: FootPolicy::Clamp,
            init: InitMethod::Interpolate,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.cells == 0 {
            return Err(Error::Config("cells must be positive".into()));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("final time must be nonnegative, got {}", self.t_final)));
        }
        TransportConfig { dt: self.dt, policy: self.policy, degree: self.degree, method: self.transport }.validate()?;
        if !(1..=10).contains(&self.n_quad) {
            return Err(Error::QuadratureOrder(self.n_quad));
        }
        let m = (self.t_final / self.dt).round();
        if (m * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(1.0) {
            return Err(Error::Config(format!("dt = {} does not divide T = {}", self.dt, self.t_final)));
        }
        Ok(())
    }

    /// `M = round(T / Δt)`.
    pub fn num_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Problem data for a configuration; Test 2 uses the solver's `ε`.
pub fn problem_for(config: &SimConfig) -> Result<ManufacturedProblem> {
    match config.problem {
        ProblemKind::Test1 => Ok(test1_problem()),
        ProblemKind::Test2 => Ok(test2_problem(config.solver.eps)),
        ProblemKind::Test3 => Ok(test3_problem()),
        ProblemKind::Custom => Err(Error::Config("custom problems are passed with Simulation::with_problem".into())),
    }
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub m: usize,
    pub t: f64,
    pub psi: C1Field,
    pub alpha: LagrangeField,
    /// Monge–Ampère reports, one per solved level.
    pub reports: Vec<MASolveReport>,
}

/// Solver, transport operator and problem data for one configuration.
pub struct Simulation {
    config: SimConfig,
    problem: ManufacturedProblem,
    mesh: Mesh,
    solver: MASolver,
    transport: Transport,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        let problem = problem_for(&config)?;
        Self::with_problem(config, problem)
    }

    pub fn with_problem(config: SimConfig, problem: ManufacturedProblem) -> Result<Self> {
        config.validate()?;
        let mesh = Mesh::new(problem.domain, config.cells, config.cells)?;
        let space = C1Space::with_order(&mesh, config.n_quad)?;
        let solver = MASolver::new(space, config.solver.clone())?;
        let tc = TransportConfig { dt: config.dt, policy: config.policy, degree: config.degree, method: config.transport };
        let transport = Transport::new(&mesh, tc)?;
        Ok(Self { config, problem, mesh, solver, transport })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn problem(&self) -> &ManufacturedProblem {
        &self.problem
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn solver(&self) -> &MASolver {
        &self.solver
    }

    pub fn transport(&self) -> &Transport {
        &self.transport
    }

    fn time(&self, m: usize) -> f64 {
        m as f64 * self.config.dt
    }

    /// Neumann constraints and flux at time `t`.
    pub fn boundary(&self, t: f64) -> BoundaryData {
        let eps = self.config.solver.eps;
        let flux = self.problem.flux.clone();
        match &self.problem.neumann {
            Some(g) => {
                let g = g.clone();
                BoundaryData::new(self.solver.space(), Some(&move |p| g(p, t)), &move |p, s| flux(p, s, t, eps))
            }
            None => BoundaryData::new(self.solver.space(), None, &move |p, s| flux(p, s, t, eps)),
        }
    }

    /// Solves for the potential of density `alpha` at time `t`; without a
    /// guess, the solution of the problem without the determinant is used.
    pub fn solve_psi(&self, alpha: &LagrangeField, t: f64, guess: Option<&C1Field>) -> Result<(C1Field, MASolveReport)> {
        let bc = self.boundary(t);
        let load = self.solver.load(alpha, &bc);
        let gamma = (self.problem.mean)(t);
        let start = match guess {
            Some(g) => g.clone(),
            None => self.solver.initial_guess(&load, &bc, gamma)?,
        };
        let (psi, report) = self.solver.solve(&load, &bc, &start, gamma)?;
        if !report.converged {
            return Err(Error::NotConverged { iterations: report.iterations, residual: report.final_residual() });
        }
        Ok((psi, report))
    }

    /// `α⁰` and `ψ⁰`.
    pub fn initialize(&self) -> Result<SimState> {
        let a0 = self.problem.alpha0.clone();
        let gd = self.problem.dirichlet.clone();
        let alpha = match self.config.init {
            InitMethod::Interpolate => LagrangeField::interpolate(&self.mesh, self.config.degree, |p| a0(p))?,
            InitMethod::Projection => self.transport.project(|p| a0(p), &|p| gd(p, 0.0))?,
        };
        let (psi, report) = self.solve_psi(&alpha, 0.0, None)?;
        Ok(SimState { m: 0, t: 0.0, psi, alpha, reports: vec![report] })
    }

    /// `α^{m+1}` from state `m`.
    pub fn advect(&self, state: &SimState) -> Result<LagrangeField> {
        let t = self.time(state.m + 1);
        let gd = self.problem.dirichlet.clone();
        let g_d = move |p: Point| gd(p, t);
        let src = self.problem.source.clone();
        let source = src.as_ref().map(|f| {
            let f = f.clone();
            move |p: Point| f(p, t)
        });
        let a0 = self.problem.alpha0.clone();
        let initial = move |p: Point| a0(p);
        self.transport.step(
            &state.alpha,
            &state.psi,
            source.as_ref().map(|f| f as &dyn Fn(Point) -> f64),
            &g_d,
            Some(&initial),
        )
    }

    /// Advances the density one step and solves for the new potential.
    pub fn step(&self, state: &SimState) -> Result<SimState> {
        let m = state.m + 1;
        let t = self.time(m);
        let alpha = self.advect(state)?;
        let (psi, report) = self.solve_psi(&alpha, t, Some(&state.psi))?;
        let mut reports = state.reports.clone();
        reports.push(report);
        Ok(SimState { m, t, psi, alpha, reports })
    }

    /// Runs to the final time, passing every state at a requested
    /// snapshot time to `on_snapshot`.
    pub fn run_with(&self, mut on_snapshot: impl FnMut(&SimState) -> Result<()>) -> Result<SimState> {
        let mut state = self.initialize()?;
        let half = 0.5 * self.config.dt;
        let wanted = |t: f64| self.config.snapshots.iter().any(|s| (s - t).abs() < half);
        if wanted(state.t) {
            on_snapshot(&state)?;
        }
        for _ in 0..self.config.num_steps() {
            state = self.step(&state)?;
            if wanted(state.t) {
                on_snapshot(&state)?;
            }
        }
        Ok(state)
    }

    /// Runs to the final time and returns the final state and snapshots.
    pub fn run(&self) -> Result<(SimState, Vec<SimState>)> {
        let mut snaps = Vec::new();
        let fin = self.run_with(|s| {
            snaps.push(s.clone());
            Ok(())
        })?;
        Ok((fin, snaps))
    }
}

/// Sign statistics of `det D²ψ` and `ψ_xx` at the assembly quadrature
/// points.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConvexityStats {
    pub points: usize,
    pub min_det: f64,
    pub min_psi_xx: f64,
    pub nonpositive_det: usize,
    pub nonpositive_psi_xx: usize,
    /// The same counts restricted to cells that do not touch the boundary.
    pub interior_points: usize,
    pub interior_min_det: f64,
    pub interior_min_psi_xx: f64,
    pub interior_nonpositive_det: usize,
    pub interior_nonpositive_psi_xx: usize,
}

impl ConvexityStats {
    pub fn is_convex(&self) -> bool {
        self.nonpositive_det == 0 && self.nonpositive_psi_xx == 0
    }
}

pub fn convexity(space: &C1Space, psi: &C1Field) -> ConvexityStats {
    let mesh = space.mesh();
    let nq = space.quadrature().len();
    let vals = space.evaluate(psi);
    let mut s = ConvexityStats {
        min_det: f64::INFINITY,
        min_psi_xx: f64::INFINITY,
        interior_min_det: f64::INFINITY,
        interior_min_psi_xx: f64::INFINITY,
        ..Default::default()
    };
    for cell in 0..mesh.num_cells() {
        let (i, j) = mesh.cell_ij(cell);
        let inner = i > 0 && j > 0 && i + 1 < mesh.nx && j + 1 < mesh.ny;
        for v in &vals[cell * nq..(cell + 1) * nq] {
            let det = crate::assembly::hessian_det(v.hess);
            let xx = v.hess[0];
            s.points += 1;
            s.min_det = s.min_det.min(det);
            s.min_psi_xx = s.min_psi_xx.min(xx);
            s.nonpositive_det += (det <= 0.0) as usize;
            s.nonpositive_psi_xx += (xx <= 0.0) as usize;
            if inner {
                s.interior_points += 1;
                s.interior_min_det = s.interior_min_det.min(det);
                s.interior_min_psi_xx = s.interior_min_psi_xx.min(xx);
                s.interior_nonpositive_det += (det <= 0.0) as usize;
                s.interior_nonpositive_psi_xx += (xx <= 0.0) as usize;
            }
        }
    }
    s
}
