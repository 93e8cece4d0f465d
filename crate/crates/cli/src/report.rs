use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dgbem::study::{
    fit_rate, to_json, write_csv, CsvRow, EnergyReference, FieldSummary, Method, QuadratureCheck, StudyRecord,
};
use serde::Serialize;

use crate::{ensure_dir, Format};

/// Where and how results are written.
pub struct Output {
    dir: PathBuf,
    format: Format,
}

impl Output {
    pub fn new(dir: &Path, format: Format) -> Result<Self> {
        ensure_dir(dir)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            format,
        })
    }

    pub fn write<R: CsvRow + Serialize>(&self, stem: &str, rows: &[R]) -> Result<PathBuf> {
        match self.format {
            Format::Csv => {
                let path = self.dir.join(format!("{stem}.csv"));
                let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
                write_csv(BufWriter::new(file), rows)?;
                Ok(path)
            }
            Format::Json => self.write_json(stem, rows),
        }
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, stem: &str, value: &T) -> Result<PathBuf> {
        let path = self.dir.join(format!("{stem}.json"));
        std::fs::write(&path, to_json(value)?).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

/// Plain-text summary printed after a run.
pub struct Report {
    lines: Vec<String>,
}

impl Report {
    pub fn print(&self) {
        for l in &self.lines {
            println!("{l}");
        }
    }

    fn table(records: &[StudyRecord], reference: &EnergyReference) -> Vec<String> {
        let mut lines = vec![
            format!("reference ‖u‖²_ex = {:.10} ± {:.1e}", reference.u_ex_sq, reference.tolerance),
            format!(
                "{:<11} {:>3} {:>2} {:>7} {:>6} {:>14} {:>11} {:>11} {:>11} {:>8}",
                "method", "n", "p", "nu", "dofs", "energy", "err_h12", "jump_rel", "defect", "time"
            ),
        ];
        for r in records {
            let method = match r.method {
                Method::Dg => "dg",
                Method::Conforming => "conforming",
            };
            lines.push(format!(
                "{method:<11} {:>3} {:>2} {:>7} {:>6} {:>14.10} {:>11.4e} {:>11.4e} {:>11.2e} {:>7.2}s",
                r.n,
                r.p,
                r.nu.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                r.dofs,
                r.energy,
                r.err_h12,
                r.jump_rel,
                r.identity_defect,
                r.wall_time
            ));
        }
        lines
    }

    /// One slope line per series, grouped by `key` and ordered by `x`.
    fn slopes<K: PartialEq + Copy>(
        records: &[StudyRecord],
        key: impl Fn(&StudyRecord) -> K,
        label: impl Fn(K) -> String,
        x: impl Fn(&StudyRecord) -> f64,
        xname: &str,
    ) -> Vec<String> {
        let mut keys: Vec<K> = Vec::new();
        for r in records {
            let k = key(r);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        let mut lines = Vec::new();
        for k in keys {
            let mut series: Vec<&StudyRecord> = records.iter().filter(|r| key(r) == k).collect();
            series.sort_by(|a, b| x(a).total_cmp(&x(b)));
            let xs: Vec<f64> = series.iter().map(|r| x(r)).collect();
            let fit = |y: fn(&StudyRecord) -> f64| {
                let ys: Vec<f64> = series.iter().map(|r| y(r)).collect();
                fit_rate(&xs, &ys, None)
                    .map(|f| format!("{:.3} ± {:.3}", f.slope, f.stderr))
                    .unwrap_or_else(|_| "n/a".into())
            };
            lines.push(format!(
                "{}: slope vs {xname} of err_h12 {}, of jump_rel {}",
                label(k),
                fit(|r| r.err_h12),
                fit(|r| r.jump_rel)
            ));
        }
        lines
    }

    pub fn h_version(records: &[StudyRecord], reference: &EnergyReference) -> Report {
        let mut lines = Self::table(records, reference);
        lines.extend(Self::slopes(
            records,
            |r| (r.method, r.p, r.nu.map(f64::to_bits)),
            |(m, p, nu)| match (m, nu) {
                (Method::Dg, Some(nu)) => format!("dg p={p} nu={}", f64::from_bits(nu)),
                _ => format!("conforming p={p}"),
            },
            |r| r.h,
            "h",
        ));
        Report { lines }
    }

    pub fn p_version(records: &[StudyRecord], reference: &EnergyReference) -> Report {
        let mut lines = Self::table(records, reference);
        lines.extend(Self::slopes(
            records,
            |r| r.nu.map(f64::to_bits),
            |nu| format!("dg nu={}", nu.map(f64::from_bits).unwrap_or(f64::NAN)),
            |r| r.p as f64,
            "p",
        ));
        Report { lines }
    }

    pub fn nu_sweep(fields: &[FieldSummary]) -> Report {
        let mut lines = vec![format!(
            "{:<11} {:>7} {:>12} {:>12} {:>12}",
            "method", "nu", "jump_l2", "trace_l2", "max|u-u_c|"
        )];
        for f in fields {
            let method = match f.method {
                Method::Dg => "dg",
                Method::Conforming => "conforming",
            };
            lines.push(format!(
                "{method:<11} {:>7} {:>12.4e} {:>12.4e} {:>12.4e}",
                f.nu.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                f.jump_l2,
                f.boundary_trace_l2,
                f.max_diff_to_conforming
            ));
        }
        Report { lines }
    }

    pub fn quadrature(checks: &[QuadratureCheck]) -> Report {
        let mut lines = vec![format!(
            "{:<10} {:<14} {:>2} {:>10} {:>7} {:>5}",
            "entity", "class", "p", "rel_err", "tol", "ok"
        )];
        for c in checks {
            lines.push(format!(
                "{:<10} {:<14} {:>2} {:>10.2e} {:>7.0e} {:>5}",
                c.entity, c.class, c.degree, c.rel_err, c.tolerance, c.pass
            ));
        }
        let failed = checks.iter().filter(|c| !c.pass).count();
        lines.push(format!("{} of {} blocks within tolerance", checks.len() - failed, checks.len()));
        Report { lines }
    }
}
