//! Convergence studies: energy extrapolation, error surrogates, rate fits and
//! the CSV/JSON records they produce.
//!
//! With `‖u‖²_ex` the extrapolated energy, every record carries
//! `err_h12 = |‖u‖²_ex − ⟨f, u_hp⟩|^{1/2} / ‖u‖_ex` and
//! `jump_rel = ‖[u_hp]‖_{L²(γ_h)} / ‖u‖_ex`. The variant
//! `jump_rel_sqrt = ‖[u_hp]‖^{1/2} / ‖u‖_ex` is emitted alongside for comparison.

mod extrapolate;
mod rates;
mod runs;

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use extrapolate::{extrapolate_energy, EnergyReference};
pub use rates::{fit_rate, RateFit};
pub use runs::{
    compute_energy_reference, field_samples, run_h_study, run_nu_sweep, run_p_study, solve_conforming, solve_dg, validate_quadrature,
    ConformingOutcome, DgOutcome, FieldSample, FieldSummary, HStudy, NuSweep, NuSweepResult, PStudy, QuadratureCheck,
    QuadratureValidation, StudySettings,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dg,
    Conforming,
}

/// One solved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub method: Method,
    pub n: usize,
    pub p: usize,
    /// Penalty; absent for conforming runs.
    pub nu: Option<f64>,
    pub dofs: usize,
    /// Maximum panel diameter.
    pub h: f64,
    /// `⟨f, u_hp⟩`.
    pub energy: f64,
    pub jump_l2: f64,
    pub err_h12: f64,
    pub jump_rel: f64,
    pub jump_rel_sqrt: f64,
    /// `|cᵀKc − (⟨f, u_hp⟩ − ν‖[u_hp]‖²)| / ⟨f, u_hp⟩`.
    pub identity_defect: f64,
    /// Seconds spent on assembly (shared by all `ν` of one mesh and degree) plus this solve.
    pub wall_time: f64,
}

impl StudyRecord {
    pub fn label(&self) -> String {
        match (self.method, self.nu) {
            (Method::Dg, Some(nu)) => format!("dg n={} p={} nu={nu}", self.n, self.p),
            _ => format!("conforming n={} p={}", self.n, self.p),
        }
    }
}

/// Types written as CSV rows with a fixed header.
pub trait CsvRow {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

/// 17 significant digits, enough to round-trip every `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

impl CsvRow for StudyRecord {
    fn header() -> &'static [&'static str] {
        &[
            "method",
            "n",
            "p",
            "nu",
            "dofs",
            "h",
            "energy",
            "jump_l2",
            "err_h12",
            "jump_rel",
            "jump_rel_sqrt",
            "identity_defect",
            "wall_time",
        ]
    }

    fn fields(&self) -> Vec<String> {
        let method = match self.method {
            Method::Dg => "dg",
            Method::Conforming => "conforming",
        };
        vec![
            method.to_string(),
            self.n.to_string(),
            self.p.to_string(),
            format_opt(self.nu),
            self.dofs.to_string(),
            format_float(self.h),
            format_float(self.energy),
            format_float(self.jump_l2),
            format_float(self.err_h12),
            format_float(self.jump_rel),
            format_float(self.jump_rel_sqrt),
            format_float(self.identity_defect),
            format_float(self.wall_time),
        ]
    }
}

pub fn write_csv<R: CsvRow, W: Write>(out: W, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(R::header())?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned, R: Read>(input: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

/// Rows of `records` matching a method, degree and penalty, sorted by `n`.
pub fn select(records: &[StudyRecord], method: Method, p: usize, nu: Option<f64>) -> Vec<&StudyRecord> {
    let mut v: Vec<&StudyRecord> = records
        .iter()
        .filter(|r| r.method == method && r.p == p && r.nu == nu)
        .collect();
    v.sort_by_key(|r| r.n);
    v
}
