//! Subcommand bodies. Each writes its manifest before computing.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use sgflow::checks::run_checks;
use sgflow::mms::{alpha_error, pairwise_rates, psi_errors, table_rates, ErrorReport};
use sgflow::simulation::{convexity, SimConfig, SimState, Simulation};
use sgflow::study::{convergence_study, eps_sweep};

use crate::config::{cells_for_spacing, render_config, ConfigError};
use crate::manifest::{unix_time, RunManifest, MANIFEST_FILE, SUMMARY_FILE};
use crate::output::{convergence_csv, field_csv, fmt_float, write_file, OutputError, RateParam, Summary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<OutputError> for CliError {
    fn from(e: OutputError) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<sgflow::Error> for CliError {
    fn from(e: sgflow::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}

fn prepare(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Compute(format!("{}: {e}", dir.display())))
}

/// Writes the summary and stamps the manifest with the finish time; the
/// summary itself carries no timestamps.
fn finish(dir: &Path, summary: Summary) -> Result<Summary, CliError> {
    write_file(dir.join(SUMMARY_FILE), &summary.render())?;
    let path = dir.join(MANIFEST_FILE);
    let mut f = std::fs::OpenOptions::new()
        .append(true)
        .open(&path)
        .map_err(|e| CliError::Compute(format!("{}: {e}", path.display())))?;
    writeln!(f, "[end]\nfinished = {}", unix_time()).map_err(|e| CliError::Compute(format!("{}: {e}", path.display())))?;
    Ok(summary)
}

fn time_tag(t: f64) -> String {
    format!("{t:.4}")
}

/// Output file names of `run` for a configuration.
pub fn run_outputs(cfg: &SimConfig) -> Vec<String> {
    snapshot_times(cfg)
        .iter()
        .flat_map(|&t| [format!("psi_t{}.csv", time_tag(t)), format!("alpha_t{}.csv", time_tag(t))])
        .collect()
}

fn snapshot_times(cfg: &SimConfig) -> Vec<f64> {
    if cfg.snapshots.is_empty() {
        vec![cfg.t_final]
    } else {
        cfg.snapshots.clone()
    }
}

/// Runs one simulation, writing both fields at every snapshot.
pub fn run(cfg: &SimConfig, dir: &Path, resolution: usize) -> Result<Summary, CliError> {
    if resolution < 2 {
        return Err(CliError::Usage(format!("sample resolution must be at least 2, got {resolution}")));
    }
    let mut cfg = cfg.clone();
    cfg.snapshots = snapshot_times(&cfg);
    prepare(dir)?;
    let text = format!("{}resolution = {resolution}\n", render_config(&cfg));
    let outputs: Vec<PathBuf> = run_outputs(&cfg).into_iter().map(|f| dir.join(f)).collect();
    RunManifest::new("run", text, outputs).write(dir)?;

    let sim = Simulation::new(cfg.clone())?;
    let mut summary = Summary::new();
    let record = |s: &SimState| -> sgflow::Result<()> {
        let tag = time_tag(s.t);
        let io = |e: OutputError| sgflow::Error::Config(e.to_string());
        write_file(dir.join(format!("psi_t{tag}.csv")), &field_csv(&s.psi, resolution).map_err(io)?).map_err(io)?;
        write_file(dir.join(format!("alpha_t{tag}.csv")), &field_csv(&s.alpha, resolution).map_err(io)?)
            .map_err(io)?;
        let c = convexity(sim.solver().space(), &s.psi);
        summary.push_float(format!("t{tag}.alpha_min_dof"), s.alpha.min_dof());
        summary.push_float(format!("t{tag}.min_det"), c.min_det);
        summary.push_float(format!("t{tag}.min_psi_xx"), c.min_psi_xx);
        summary.push(format!("t{tag}.nonpositive_det"), c.nonpositive_det);
        summary.push(format!("t{tag}.nonpositive_psi_xx"), c.nonpositive_psi_xx);
        summary.push(format!("t{tag}.quadrature_points"), c.points);
        summary.push(format!("t{tag}.convex"), c.is_convex());
        eprintln!("t = {tag}: min alpha {:.3e}, min det {:.3e}, min psi_xx {:.3e}", s.alpha.min_dof(), c.min_det, c.min_psi_xx);
        Ok(())
    };
    let fin = sim.run_with(record)?;
    let iterations: usize = fin.reports.iter().map(|r| r.iterations).sum();
    summary.push("steps", fin.m);
    summary.push_float("final_time", fin.t);
    summary.push("newton_iterations", iterations);
    summary.push_float("max_final_residual", fin.reports.iter().map(|r| r.final_residual()).fold(0.0, f64::max));
    let p = sim.problem();
    if let (Some(psi), Some(alpha)) = (p.psi.clone(), p.alpha.clone()) {
        let t = fin.t;
        let e = psi_errors(&fin.psi, |x| psi(x, t));
        summary.push_float("psi_l2_error", e.l2);
        summary.push_float("psi_h1_error", e.h1());
        summary.push_float("psi_h2_error", e.h2());
        summary.push_float("alpha_l2_error", alpha_error(&fin.alpha, |x| alpha(x, t)));
    }
    finish(dir, summary)
}

fn rate_summary(summary: &mut Summary, reports: &[ErrorReport], param: RateParam) {
    let pick = |r: &ErrorReport| match param {
        RateParam::Dt => r.dt,
        RateParam::Eps => r.eps,
    };
    if let Ok(rates) = table_rates(reports, pick) {
        summary.push_float("rate.psi_l2", rates.psi_l2);
        summary.push_float("rate.psi_h1", rates.psi_h1);
        summary.push_float("rate.psi_h2", rates.psi_h2);
        if let Some(a) = rates.alpha_l2 {
            summary.push_float("rate.alpha_l2", a);
        }
    }
    let p: Vec<f64> = reports.iter().map(pick).collect();
    let cols: [(&str, fn(&ErrorReport) -> f64); 4] =
        [("psi_l2", |r| r.psi_l2), ("psi_h1", |r| r.psi_h1), ("psi_h2", |r| r.psi_h2), ("alpha_l2", |r| r.alpha_l2)];
    for (name, f) in cols {
        let e: Vec<f64> = reports.iter().map(f).collect();
        if let Ok(r) = pairwise_rates(&e, &p) {
            summary.push(format!("pairwise.{name}"), r.iter().map(|v| fmt_float(*v)).collect::<Vec<_>>().join(","));
        }
    }
}

fn progress(r: &ErrorReport) {
    eprintln!(
        "h = {:.5}, dt = {:.3e}, eps = {:.3e}: psi L2 {:.4e} H1 {:.4e} H2 {:.4e}, alpha L2 {:.4e}",
        r.h, r.dt, r.eps, r.psi_l2, r.psi_h1, r.psi_h2, r.alpha_l2
    );
}

/// Test-2 sweep over mesh sizes with `Δt = h²`.
pub fn converge(h: &[f64], eps: f64, t_final: f64, base: &SimConfig, dir: &Path) -> Result<Summary, CliError> {
    if h.is_empty() {
        return Err(CliError::Usage("no mesh sizes given".into()));
    }
    let cells: Vec<usize> = h.iter().map(|&h| cells_for_spacing(1.0, h)).collect::<Result<_, _>>().map_err(CliError::Usage)?;
    prepare(dir)?;
    let cells_text = cells.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
    let text = format!("{}sweep_cells = {cells_text}\n", render_config(&SimConfig { t_final, ..sweep_base(base, eps) }));
    RunManifest::new("converge", text, vec![dir.join("convergence.csv")]).write(dir)?;
    let reports = convergence_study(&cells, eps, t_final, base, progress)?;
    write_file(dir.join("convergence.csv"), &convergence_csv(&reports, RateParam::Dt)?)?;
    let mut summary = Summary::new();
    summary.push("cases", reports.len());
    summary.push("reference", "regularized");
    rate_summary(&mut summary, &reports, RateParam::Dt);
    finish(dir, summary)
}

/// Test-1 sweep over `ε` on one mesh.
pub fn epsweep(eps: &[f64], h: f64, dt: f64, t_final: f64, base: &SimConfig, dir: &Path) -> Result<Summary, CliError> {
    if eps.is_empty() {
        return Err(CliError::Usage("no epsilon values given".into()));
    }
    if eps.iter().any(|e| !(*e > 0.0)) {
        return Err(CliError::Usage("epsilon values must be positive".into()));
    }
    let cells = cells_for_spacing(1.0, h).map_err(CliError::Usage)?;
    let probe = SimConfig { cells, dt, t_final, ..base.clone() };
    probe.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    prepare(dir)?;
    let eps_text = eps.iter().map(|e| format!("{e:?}")).collect::<Vec<_>>().join(",");
    let text = format!("{}sweep_epsilon = {eps_text}\n", render_config(&SimConfig { problem: sgflow::mms::ProblemKind::Test1, ..probe }));
    RunManifest::new("epsweep", text, vec![dir.join("epsweep.csv")]).write(dir)?;
    let reports = eps_sweep(eps, cells, dt, t_final, base, progress)?;
    write_file(dir.join("epsweep.csv"), &convergence_csv(&reports, RateParam::Eps)?)?;
    let mut summary = Summary::new();
    summary.push("cases", reports.len());
    summary.push("reference", "unregularized");
    summary.push_float("h", reports[0].h);
    rate_summary(&mut summary, &reports, RateParam::Eps);
    finish(dir, summary)
}

fn sweep_base(base: &SimConfig, eps: f64) -> SimConfig {
    let mut c = SimConfig { problem: sgflow::mms::ProblemKind::Test2, ..base.clone() };
    c.solver.eps = eps;
    c
}

/// Lowercase words joined by underscores.
pub fn summary_key(name: &str) -> String {
    name.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_ascii_lowercase())
        .collect::<Vec<_>>()
        .join("_")
}

/// Runs the self-check suite; fails if any check fails.
pub fn check(seed: u64, dir: &Path) -> Result<Summary, CliError> {
    prepare(dir)?;
    RunManifest::new("check", format!("seed = {seed}\n"), vec![dir.join(SUMMARY_FILE)]).write(dir)?;
    let outcomes = run_checks(seed)?;
    let mut summary = Summary::new();
    for c in &outcomes {
        println!("{c}");
        summary.push(summary_key(c.name), format!("{} {}", if c.passed { "pass" } else { "fail" }, fmt_float(c.value)));
    }
    let failed = outcomes.iter().filter(|c| !c.passed).count();
    summary.push("failed", failed);
    let summary = finish(dir, summary)?;
    if failed > 0 {
        return Err(CliError::Compute(format!("{failed} check(s) failed")));
    }
    Ok(summary)
}
