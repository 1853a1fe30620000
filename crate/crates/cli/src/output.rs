//! CSV and key/value writers.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use sgflow::fields::{C1Field, LagrangeField};
use sgflow::mesh::{Domain, Point};
use sgflow::mms::{convergence_rate, ErrorReport};

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Invalid(String),
}

/// A field that can be sampled pointwise on its domain.
pub trait Sampled {
    fn domain(&self) -> Domain;
    fn sample(&self, p: Point) -> f64;
}

impl Sampled for C1Field {
    fn domain(&self) -> Domain {
        self.mesh.domain
    }

    fn sample(&self, p: Point) -> f64 {
        self.eval(p).map(|v| v.value).unwrap_or(f64::NAN)
    }
}

impl Sampled for LagrangeField {
    fn domain(&self) -> Domain {
        self.mesh.domain
    }

    fn sample(&self, p: Point) -> f64 {
        self.eval(p).unwrap_or(f64::NAN)
    }
}

/// Uniform grid of `res × res` points including the corners, x fastest.
pub fn sample_grid(domain: &Domain, res: usize) -> Vec<Point> {
    let step = |a: f64, b: f64, i: usize| if i + 1 == res { b } else { a + (b - a) * i as f64 / (res - 1) as f64 };
    let mut out = Vec::with_capacity(res * res);
    for j in 0..res {
        for i in 0..res {
            out.push([step(domain.xmin, domain.xmax, i), step(domain.ymin, domain.ymax, j)]);
        }
    }
    out
}

/// Seventeen significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn field_csv(field: &dyn Sampled, res: usize) -> Result<String, OutputError> {
    if res < 2 {
        return Err(OutputError::Invalid(format!("sample resolution must be at least 2, got {res}")));
    }
    let mut s = String::from("x,y,value\n");
    for p in sample_grid(&field.domain(), res) {
        let _ = writeln!(s, "{},{},{}", fmt_float(p[0]), fmt_float(p[1]), fmt_float(field.sample(p)));
    }
    Ok(s)
}

pub fn write_field_csv(field: &dyn Sampled, res: usize, path: impl AsRef<Path>) -> Result<(), OutputError> {
    write_file(path, &field_csv(field, res)?)
}

/// Parameter the footer rates are fitted against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateParam {
    Dt,
    Eps,
}

/// Columns h, dt, ψ errors in L², H¹, H², α error in L², then `eps`; the
/// last row holds the fitted slopes.
pub fn convergence_csv(reports: &[ErrorReport], param: RateParam) -> Result<String, OutputError> {
    if reports.is_empty() {
        return Err(OutputError::Invalid("no reports to write".into()));
    }
    let mut s = String::from("h,dt,psi_l2,psi_h1,psi_h2,alpha_l2,eps\n");
    for r in reports {
        let cols = [r.h, r.dt, r.psi_l2, r.psi_h1, r.psi_h2, r.alpha_l2, r.eps];
        let _ = writeln!(s, "{}", cols.map(fmt_float).join(","));
    }
    let (label, p): (&str, Vec<f64>) = match param {
        RateParam::Dt => ("rate_vs_dt", reports.iter().map(|r| r.dt).collect()),
        RateParam::Eps => ("rate_vs_eps", reports.iter().map(|r| r.eps).collect()),
    };
    let rate = |f: fn(&ErrorReport) -> f64| {
        let e: Vec<f64> = reports.iter().map(f).collect();
        convergence_rate(&e, &p).map(fmt_float).unwrap_or_else(|_| "nan".into())
    };
    let _ = writeln!(
        s,
        "{label},,{},{},{},{},",
        rate(|r| r.psi_l2),
        rate(|r| r.psi_h1),
        rate(|r| r.psi_h2),
        rate(|r| r.alpha_l2)
    );
    Ok(s)
}

pub fn write_convergence_csv(
    reports: &[ErrorReport],
    param: RateParam,
    path: impl AsRef<Path>,
) -> Result<(), OutputError> {
    write_file(path, &convergence_csv(reports, param)?)
}

/// Flat `key = value` lines in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn push_float(&mut self, key: impl Into<String>, value: f64) {
        self.push(key, fmt_float(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.0 == key).map(|e| e.1.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

pub fn write_file(path: impl AsRef<Path>, text: &str) -> Result<(), OutputError> {
    let path = path.as_ref();
    let io = |source| OutputError::Io { path: path.display().to_string(), source };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)?;
    f.flush().map_err(io)
}
