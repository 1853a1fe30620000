//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! then compares the outcomes with the recorded ones in `RECORDED_FAILURES`.
//! Long: several minutes in release mode.

use std::fmt;
use std::io::Write as _;
use std::time::Instant;

use sgflow::checks::run_checks;
use sgflow::fields::LagrangeField;
use sgflow::mms::{fd_consistency_residual, table_rates, test2_problem, test3_alpha0, ErrorReport};
use sgflow::simulation::{convexity, ConvexityStats, SimConfig, Simulation};
use sgflow::study::{convergence_study, eps_sweep};
use sgflow::transport::{FootPolicy, Transport, TransportConfig, TransportMethod};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that fail on this implementation, with the measured reason
/// kept in the README.
const RECORDED_FAILURES: &[&str] = &["2", "3b", "4"];

const RATE_RANGE: (f64, f64) = (0.85, 1.4);
const MAGNITUDE_FACTOR: f64 = 10.0;
const EPS_RATE_TOL: f64 = 0.25;
const UNDERSHOOT_FACTOR: f64 = 10.0;
const MMS_TOL: f64 = 1e-6;
const MMS_POINTS: usize = 20;

/// Reference errors for h = 1/12, 1/20, 0.03066: ψ in L², H¹, H², α in L².
const REFERENCE_ERRORS: [[f64; 4]; 3] = [
    [0.000214135, 0.000978608, 0.004434963, 0.003456864],
    [6.15715e-05, 0.000281367, 0.001274611, 0.001009269],
    [1.42185e-05, 6.49825e-05, 0.000294575, 0.000232896],
];

struct Outcome {
    id: &'static str,
    name: &'static str,
    passed: bool,
    detail: String,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} [{}] {}: {}", self.id, self.name, self.detail)
    }
}

/// Written past the harness capture so the lines show in plain `cargo test`.
fn emit(out: &mut Vec<Outcome>, o: Outcome) {
    let _ = writeln!(std::io::stdout().lock(), "{o}");
    out.push(o);
}

fn progress(r: &ErrorReport) {
    println!(
        "  h = {:.5} dt = {:.3e} eps = {:.3e}: psi L2 {:.4e} H1 {:.4e} H2 {:.4e} alpha L2 {:.4e}",
        r.h, r.dt, r.eps, r.psi_l2, r.psi_h1, r.psi_h2, r.alpha_l2
    );
}

fn criterion_1() -> Outcome {
    let reports = convergence_study(&[12, 20, 32], 0.01, 0.25, &SimConfig::default(), progress).expect("Test 2 sweep");
    let rates = table_rates(&reports, |r| r.dt).expect("rates");
    let alpha = rates.alpha_l2.unwrap_or(f64::NAN);
    let fitted = [rates.psi_l2, rates.psi_h1, rates.psi_h2, alpha];
    let in_range = fitted.iter().all(|r| (RATE_RANGE.0..=RATE_RANGE.1).contains(r));
    let mut worst_ratio: f64 = 1.0;
    for (r, row) in reports.iter().zip(REFERENCE_ERRORS) {
        for (e, p) in [r.psi_l2, r.psi_h1, r.psi_h2, r.alpha_l2].into_iter().zip(row) {
            worst_ratio = worst_ratio.max(e / p).max(p / e);
        }
    }
    Outcome {
        id: "1",
        name: "Test-2 convergence in dt",
        passed: in_range && worst_ratio <= MAGNITUDE_FACTOR,
        detail: format!(
            "rates L2 {:.3} H1 {:.3} H2 {:.3} alpha {:.3} (bound [{}, {}]); worst ratio to reference {:.2} (bound {})",
            fitted[0], fitted[1], fitted[2], fitted[3], RATE_RANGE.0, RATE_RANGE.1, worst_ratio, MAGNITUDE_FACTOR
        ),
    }
}

fn criterion_2() -> Outcome {
    let eps = [0.05, 0.025, 0.0125, 0.00625];
    let reports = eps_sweep(&eps, 34, 0.001, 0.25, &SimConfig::default(), progress).expect("Test 1 sweep");
    let rates = table_rates(&reports, |r| r.eps).expect("rates");
    let got = [rates.psi_l2, rates.psi_h1, rates.psi_h2];
    let want = [1.0, 0.75, 0.25];
    let passed = got.iter().zip(want).all(|(g, w)| (g - w).abs() <= EPS_RATE_TOL);
    Outcome {
        id: "2",
        name: "Test-1 rates in epsilon",
        passed,
        detail: format!(
            "slopes L2 {:.3} H1 {:.3} H2 {:.3} (targets 1.0, 0.75, 0.25 within {EPS_RATE_TOL}); h = 1/34, dt = 0.001",
            got[0], got[1], got[2]
        ),
    }
}

fn convexity_detail(t: f64, c: &ConvexityStats) -> String {
    format!(
        "t = {t}: min det {:.3e}, min psi_xx {:.3e}, {} of {} points with det <= 0",
        c.min_det, c.min_psi_xx, c.nonpositive_det, c.points
    )
}

/// Criteria 3 and 4 share the Test-3 setup and its initial potential.
fn criteria_3_and_4() -> Vec<Outcome> {
    let cfg = SimConfig { snapshots: vec![0.0, 0.05, 0.1], ..SimConfig::default() };
    let sim = Simulation::new(cfg).expect("Test 3 setup");
    let s0 = sim.initialize().expect("initial potential");
    let h = sim.mesh().h();
    let dt = sim.config().dt;
    let steps = 100;

    let run = |degree: usize, method: TransportMethod| {
        let tr = Transport::new(sim.mesh(), TransportConfig { dt, policy: FootPolicy::Clamp, degree, method }).expect("transport");
        let mut a = LagrangeField::interpolate(sim.mesh(), degree, test3_alpha0).expect("interpolant");
        let mut worst = a.min_dof();
        for _ in 0..steps {
            a = tr.step(&a, &s0.psi, None, &|_| 0.0, None).expect("transport step");
            worst = worst.min(a.min_dof());
        }
        (worst, a.max_abs_dof())
    };
    let mut out = Vec::new();
    let (nodal_min, _) = run(1, TransportMethod::NodalInterpolation);
    out.push(Outcome {
        id: "3a",
        name: "k=1 nodal transport stays nonnegative",
        passed: nodal_min >= 0.0,
        detail: format!("min dof over {steps} steps {nodal_min:.3e} (bound 0)"),
    });
    let amax = LagrangeField::interpolate(sim.mesh(), 3, test3_alpha0).expect("interpolant").max_abs_dof();
    let bound = -UNDERSHOOT_FACTOR * h.powi(4) * amax;
    let (l2_min, l2_max) = run(3, TransportMethod::L2Projection);
    out.push(Outcome {
        id: "3b",
        name: "k=3 projection undershoot",
        passed: l2_min >= bound,
        detail: format!("min dof over {steps} steps {l2_min:.3e} (bound {bound:.3e}); max {l2_max:.3e}"),
    });

    let mut details = Vec::new();
    let c0 = convexity(sim.solver().space(), &s0.psi);
    details.push(convexity_detail(0.0, &c0));
    let mut convex = c0.is_convex();
    let mut state = s0;
    for &t in &[0.05, 0.1] {
        let target = (t / dt).round() as usize;
        let mut failure = None;
        while state.m < target {
            match sim.step(&state) {
                Ok(next) => state = next,
                Err(e) => {
                    failure = Some(format!("t = {t}: not reached, step {} failed: {e}", state.m + 1));
                    break;
                }
            }
        }
        if let Some(f) = failure {
            details.push(f);
            convex = false;
            break;
        }
        let c = convexity(sim.solver().space(), &state.psi);
        convex &= c.is_convex();
        details.push(convexity_detail(t, &c));
    }
    out.push(Outcome {
        id: "4",
        name: "Test-3 convexity snapshots",
        passed: convex,
        detail: details.join("; "),
    });
    out
}

fn criterion_5() -> Outcome {
    let checks = run_checks(7).expect("checks");
    for c in &checks {
        println!("  {c}");
    }
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    Outcome {
        id: "5",
        name: "solver property suite",
        passed: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} checks passed", checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    }
}

fn criterion_6() -> Outcome {
    let eps = 0.01;
    let problem = test2_problem(eps);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..MMS_POINTS {
        let p = [rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9)];
        let t = rng.gen_range(0.0..0.25);
        worst = worst.max(fd_consistency_residual(&problem, eps, p, t).expect("residual").abs());
    }
    Outcome {
        id: "6",
        name: "closed forms satisfy the regularized equation",
        passed: worst <= MMS_TOL,
        detail: format!("max residual at {MMS_POINTS} points {worst:.3e} (bound {MMS_TOL:e})"),
    }
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let mut out = Vec::new();
    emit(&mut out, criterion_1());
    emit(&mut out, criterion_2());
    for o in criteria_3_and_4() {
        emit(&mut out, o);
    }
    emit(&mut out, criterion_5());
    emit(&mut out, criterion_6());
    let _ = writeln!(std::io::stdout().lock(), "acceptance total {:.0?}", start.elapsed());

    let unexpected: Vec<String> = out
        .iter()
        .filter(|o| o.passed == RECORDED_FAILURES.contains(&o.id))
        .map(|o| format!("[{}] {}", o.id, if o.passed { "passed but is recorded as failing" } else { "failed" }))
        .collect();
    assert!(unexpected.is_empty(), "outcomes differ from the record: {}", unexpected.join(", "));
}
