//! `key = value` run configuration files.
//!
//! Defaults: `epsilon = 0.01`, `n_quad = 4`, `degree = 3`,
//! `newton_tol = 1e-10`, `max_iters = 50`, `damping = 1`,
//! `scheme = newton`, `transport = l2`, `foot_policy = clamp`,
//! `init = interpolate`, `h_cells = 120`, `dt = 0.001`, `t_final = 0.1`,
//! no snapshots. `test` is required unless a `preset` supplies it.
//! `h` sets the cells per axis to the smallest count whose spacing does
//! not exceed it. Numbers may be written as fractions such as `1/12`.

use std::collections::HashSet;
use std::path::Path;

use sgflow::ma_solver::{MASolverConfig, Scheme};
use sgflow::mesh::Domain;
use sgflow::mms::{test1_problem, test3_problem, ProblemKind};
use sgflow::simulation::{InitMethod, SimConfig};
use sgflow::transport::{FootPolicy, TransportMethod};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub const PRESETS: [&str; 2] = ["test3-text", "test3-caption"];

const KEYS: [&str; 17] = [
    "preset",
    "test",
    "epsilon",
    "dt",
    "h_cells",
    "h",
    "t_final",
    "degree",
    "n_quad",
    "newton_tol",
    "max_iters",
    "damping",
    "max_halvings",
    "scheme",
    "transport",
    "foot_policy",
    "init",
];
const SNAPSHOT_KEY: &str = "snapshots";

/// Test 3 with `Δt = 0.001`, `h = 0.05`, `ε = 0.01`, snapshots at
/// 0, 0.05, 0.1 and 0.15.
pub fn test3_text() -> SimConfig {
    SimConfig {
        problem: ProblemKind::Test3,
        cells: 120,
        dt: 0.001,
        t_final: 0.15,
        snapshots: vec![0.0, 0.05, 0.1, 0.15],
        ..Default::default()
    }
}

/// Test 3 with `Δt = 0.01`, `h = 0.05`, `ε = 0.01`, snapshots at 0,
/// 0.05 and 0.1.
pub fn test3_caption() -> SimConfig {
    SimConfig { dt: 0.01, t_final: 0.1, snapshots: vec![0.0, 0.05, 0.1], ..test3_text() }
}

pub fn preset(name: &str) -> Option<SimConfig> {
    match name {
        "test3-text" => Some(test3_text()),
        "test3-caption" => Some(test3_caption()),
        _ => None,
    }
}

/// Parses a number, accepting `a/b`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
            if b == 0.0 {
                return Err(format!("`{s}` divides by zero"));
            }
            a / b
        }
        None => s.parse().map_err(|_| format!("`{s}` is not a number"))?,
    };
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v)
}

/// Comma-separated numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(parse_number).collect()
}

/// Cells per axis for a target spacing `h` on an interval of `length`.
pub fn cells_for_spacing(length: f64, h: f64) -> Result<usize, String> {
    if !(h > 0.0) {
        return Err(format!("spacing must be positive, got {h}"));
    }
    let n = (length / h - 1e-9).ceil();
    if n < 1.0 || n > 1e6 {
        return Err(format!("spacing {h} gives {n} cells"));
    }
    Ok(n as usize)
}

pub fn domain_of(problem: ProblemKind) -> Domain {
    match problem {
        ProblemKind::Test3 => test3_problem().domain,
        _ => test1_problem().domain,
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<SimConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<SimConfig, ConfigError> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(ConfigError::Parse { line, msg: format!("expected `key = value`, got `{content}`") });
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) && k != SNAPSHOT_KEY {
            return Err(ConfigError::Parse { line, msg: format!("unknown key `{k}`") });
        }
        if v.is_empty() {
            return Err(ConfigError::Parse { line, msg: format!("empty value for `{k}`") });
        }
        if !seen.insert(k.to_string()) {
            return Err(ConfigError::Parse { line, msg: format!("duplicate key `{k}`") });
        }
        entries.push((line, k.to_string(), v.to_string()));
    }
    let get = |key: &str| entries.iter().find(|e| e.1 == key);

    let mut cfg = match get("preset") {
        Some((line, _, v)) => preset(v).ok_or_else(|| ConfigError::Parse {
            line: *line,
            msg: format!("unknown preset `{v}`, expected one of {}", PRESETS.join(", ")),
        })?,
        None => {
            let Some((line, _, v)) = get("test") else {
                return Err(ConfigError::Missing("test"));
            };
            let problem = parse_test(v).map_err(|msg| ConfigError::Parse { line: *line, msg })?;
            SimConfig { problem, ..Default::default() }
        }
    };
    if get("h").is_some() && get("h_cells").is_some() {
        return Err(ConfigError::Invalid { key: "h".into(), msg: "give either `h` or `h_cells`, not both".into() });
    }
    for (line, key, value) in &entries {
        let line = *line;
        let num = || parse_number(value).map_err(|msg| ConfigError::Parse { line, msg });
        let int = || -> Result<usize, ConfigError> {
            value.parse().map_err(|_| ConfigError::Parse { line, msg: format!("`{value}` is not a nonnegative integer") })
        };
        let bad = |msg: String| Err(ConfigError::Parse { line, msg });
        match key.as_str() {
            "preset" => {}
            "test" => cfg.problem = parse_test(value).map_err(|msg| ConfigError::Parse { line, msg })?,
            "epsilon" => cfg.solver.eps = num()?,
            "dt" => cfg.dt = num()?,
            "h_cells" => cfg.cells = int()?,
            "h" => {}
            "t_final" => cfg.t_final = num()?,
            "degree" => cfg.degree = int()?,
            "n_quad" => cfg.n_quad = int()?,
            "newton_tol" => cfg.solver.newton_tol = num()?,
            "max_iters" => cfg.solver.max_iters = int()?,
            "damping" => cfg.solver.damping = num()?,
            "max_halvings" => cfg.solver.max_halvings = int()?,
            "scheme" => {
                cfg.solver.scheme = match value.as_str() {
                    "newton" => Scheme::Newton,
                    "fixed-point" => Scheme::FixedPoint,
                    _ => return bad(format!("scheme must be `newton` or `fixed-point`, got `{value}`")),
                }
            }
            "transport" => {
                cfg.transport = match value.as_str() {
                    "l2" => TransportMethod::L2Projection,
                    "nodal" => TransportMethod::NodalInterpolation,
                    _ => return bad(format!("transport must be `l2` or `nodal`, got `{value}`")),
                }
            }
            "foot_policy" => {
                cfg.policy = match value.as_str() {
                    "clamp" => FootPolicy::Clamp,
                    "initial" => FootPolicy::ExtendByInitial,
                    _ => return bad(format!("foot_policy must be `clamp` or `initial`, got `{value}`")),
                }
            }
            "init" => {
                cfg.init = match value.as_str() {
                    "interpolate" => InitMethod::Interpolate,
                    "projection" => InitMethod::Projection,
                    _ => return bad(format!("init must be `interpolate` or `projection`, got `{value}`")),
                }
            }
            SNAPSHOT_KEY => cfg.snapshots = parse_list(value).map_err(|msg| ConfigError::Parse { line, msg })?,
            _ => unreachable!("keys are checked above"),
        }
    }
    if let Some((line, _, v)) = get("h") {
        let h = parse_number(v).map_err(|msg| ConfigError::Parse { line: *line, msg })?;
        let d = domain_of(cfg.problem);
        cfg.cells =
            cells_for_spacing(d.xmax - d.xmin, h).map_err(|msg| ConfigError::Invalid { key: "h".into(), msg })?;
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn parse_test(v: &str) -> Result<ProblemKind, String> {
    match v {
        "1" => Ok(ProblemKind::Test1),
        "2" => Ok(ProblemKind::Test2),
        "3" => Ok(ProblemKind::Test3),
        _ => Err(format!("test must be 1, 2 or 3, got `{v}`")),
    }
}

/// Checks each setting and names the offending key.
pub fn validate(cfg: &SimConfig) -> Result<(), ConfigError> {
    let invalid = |key: &str, msg: String| Err(ConfigError::Invalid { key: key.into(), msg });
    let s = &cfg.solver;
    if !(s.eps > 0.0) {
        return invalid("epsilon", format!("must be positive, got {}", s.eps));
    }
    if !(cfg.dt > 0.0) {
        return invalid("dt", format!("must be positive, got {}", cfg.dt));
    }
    if cfg.cells == 0 {
        return invalid("h_cells", "must be at least 1".into());
    }
    if !(cfg.t_final >= 0.0) {
        return invalid("t_final", format!("must be nonnegative, got {}", cfg.t_final));
    }
    if !(1..=3).contains(&cfg.degree) {
        return invalid("degree", format!("must be 1, 2 or 3, got {}", cfg.degree));
    }
    if !(1..=10).contains(&cfg.n_quad) {
        return invalid("n_quad", format!("must lie in 1..=10, got {}", cfg.n_quad));
    }
    if !(s.newton_tol > 0.0) {
        return invalid("newton_tol", format!("must be positive, got {}", s.newton_tol));
    }
    if s.max_iters == 0 {
        return invalid("max_iters", "must be at least 1".into());
    }
    if !(s.damping > 0.0 && s.damping <= 1.0) {
        return invalid("damping", format!("must lie in (0, 1], got {}", s.damping));
    }
    if cfg.snapshots.iter().any(|&t| !(0.0..=cfg.t_final + 0.5 * cfg.dt).contains(&t)) {
        return invalid(SNAPSHOT_KEY, format!("times must lie in [0, {}]", cfg.t_final));
    }
    cfg.validate().or_else(|e| invalid("dt", e.to_string()))
}

/// The configuration as a file that parses back to it.
pub fn render_config(cfg: &SimConfig) -> String {
    let test = match cfg.problem {
        ProblemKind::Test1 => "1",
        ProblemKind::Test2 => "2",
        ProblemKind::Test3 | ProblemKind::Custom => "3",
    };
    let s: &MASolverConfig = &cfg.solver;
    let scheme = match s.scheme {
        Scheme::Newton => "newton",
        Scheme::FixedPoint => "fixed-point",
    };
    let transport = match cfg.transport {
        TransportMethod::L2Projection => "l2",
        TransportMethod::NodalInterpolation => "nodal",
    };
    let policy = match cfg.policy {
        FootPolicy::Clamp => "clamp",
        FootPolicy::ExtendByInitial => "initial",
    };
    let init = match cfg.init {
        InitMethod::Interpolate => "interpolate",
        InitMethod::Projection => "projection",
    };
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    kv("test", test.into());
    kv("epsilon", format!("{:?}", s.eps));
    kv("dt", format!("{:?}", cfg.dt));
    kv("h_cells", cfg.cells.to_string());
    kv("t_final", format!("{:?}", cfg.t_final));
    kv("degree", cfg.degree.to_string());
    kv("n_quad", cfg.n_quad.to_string());
    kv("newton_tol", format!("{:?}", s.newton_tol));
    kv("max_iters", s.max_iters.to_string());
    kv("damping", format!("{:?}", s.damping));
    kv("max_halvings", s.max_halvings.to_string());
    kv("scheme", scheme.into());
    kv("transport", transport.into());
    kv("foot_policy", policy.into());
    kv("init", init.into());
    if !cfg.snapshots.is_empty() {
        kv(SNAPSHOT_KEY, cfg.snapshots.iter().map(|t| format!("{t:?}")).collect::<Vec<_>>().join(","));
    }
    out
}
