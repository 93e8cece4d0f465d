use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CsvRow, EnergyReference, Method, StudyRecord, extrapolate_energy, format_float, format_opt};
use crate::assembly::{assemble_conforming, assemble_dg, with_threads, ConformingSystem, DgSystem, LoadFn};
use crate::error::{Error, Result};
use crate::mesh::{build_uniform_square_mesh, Mesh, PairClass, EdgePanelClass};
use crate::quadrature::{
    BruteForceOracle, EdgeLegendre, GalerkinQuadrature, ModalValues, PairIntegrator, DEFAULT_ASSEMBLY_ORDER,
    DEFAULT_VALIDATION_ORDER,
};
use crate::solve::{solve_dense, FieldView, Solution, SolverKind};
use crate::space::{HpSpace, SpaceKind};

/// Options shared by all studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudySettings {
    pub quad_order: usize,
    pub threads: Option<usize>,
    /// Configurations with more unknowns are skipped.
    pub max_dofs: Option<usize>,
}

impl Default for StudySettings {
    fn default() -> Self {
        StudySettings {
            quad_order: DEFAULT_ASSEMBLY_ORDER,
            threads: None,
            max_dofs: None,
        }
    }
}

impl StudySettings {
    fn quadrature(&self) -> Result<GalerkinQuadrature> {
        GalerkinQuadrature::new(self.quad_order)
    }

    fn admits(&self, dofs: usize) -> bool {
        self.max_dofs.is_none_or(|m| dofs <= m)
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidConfig(format!("penalty ν must be positive, got {nu}")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DgOutcome {
    pub nu: f64,
    pub solution: Solution,
    /// `⟨f, u_hp⟩`.
    pub energy: f64,
    /// `cᵀKc`.
    pub k_energy: f64,
    pub jump_l2: f64,
    pub boundary_trace_l2: f64,
    pub identity_defect: f64,
    pub solve_time: f64,
}

impl DgOutcome {
    pub fn field(&self, space: &Arc<HpSpace>) -> Result<FieldView> {
        FieldView::new(space.clone(), self.solution.coefficients.clone())
    }
}

/// Solves `A(ν) c = rhs` and evaluates energy, jumps and the energy identity.
pub fn solve_dg(sys: &DgSystem, nu: f64) -> Result<DgOutcome> {
    check_nu(nu)?;
    let t = Instant::now();
    let solution = solve_dense(&sys.matrix(nu), &sys.rhs, SolverKind::Lu)?;
    let c = &solution.coefficients;
    let energy = sys.rhs.dot(c);
    let k_energy = c.dot(&(&sys.k * c));
    let view = FieldView::new(sys.space.clone(), c.clone())?;
    let jump_l2 = view.jump_l2();
    let identity_defect = (k_energy - (energy - nu * jump_l2 * jump_l2)).abs() / energy.abs();
    Ok(DgOutcome {
        nu,
        energy,
        k_energy,
        jump_l2,
        boundary_trace_l2: view.boundary_trace_l2(),
        identity_defect,
        solve_time: t.elapsed().as_secs_f64(),
        solution,
    })
}

#[derive(Debug, Clone)]
pub struct ConformingOutcome {
    pub system: ConformingSystem,
    pub solution: Solution,
    pub energy: f64,
    pub jump_l2: f64,
    pub identity_defect: f64,
    pub wall_time: f64,
}

/// Assembles and solves the conforming problem on the uniform `n × n` mesh.
pub fn solve_conforming(mesh: Arc<Mesh>, p: usize, settings: &StudySettings) -> Result<ConformingOutcome> {
    let t = Instant::now();
    let space = Arc::new(HpSpace::uniform(mesh, p, SpaceKind::ConformingZeroTrace)?);
    let system = assemble_conforming(space.clone(), &settings.quadrature()?, &LoadFn::default(), settings.threads)?;
    let solution = solve_dense(&system.matrix, &system.rhs, SolverKind::Cholesky)?;
    let c = &solution.coefficients;
    let energy = system.rhs.dot(c);
    let k_energy = c.dot(&(&system.matrix * c));
    let jump_l2 = FieldView::new(space, c.clone())?.jump_l2();
    Ok(ConformingOutcome {
        identity_defect: (k_energy - energy).abs() / energy.abs(),
        wall_time: t.elapsed().as_secs_f64(),
        system,
        solution,
        energy,
        jump_l2,
    })
}

/// Extrapolated `‖u‖²_ex` from conforming solves of degree `p` on the meshes `ns`.
pub fn compute_energy_reference(p: usize, ns: &[usize], settings: &StudySettings) -> Result<EnergyReference> {
    let mut energies = Vec::with_capacity(ns.len());
    for &n in ns {
        let out = solve_conforming(Arc::new(build_uniform_square_mesh(n)?), p, settings)?;
        log::info!("conforming n={n} p={p}: energy {:.12e} ({:.2} s)", out.energy, out.wall_time);
        energies.push(out.energy);
    }
    extrapolate_energy(ns, &energies)
}

fn surrogate(reference: &EnergyReference, energy: f64, jump_l2: f64) -> (f64, f64, f64) {
    let norm = reference.u_ex_sq.sqrt();
    (
        (reference.u_ex_sq - energy).abs().sqrt() / norm,
        jump_l2 / norm,
        jump_l2.sqrt() / norm,
    )
}

fn dg_record(n: usize, mesh: &Mesh, sys: &DgSystem, out: &DgOutcome, reference: &EnergyReference, assembly: f64) -> StudyRecord {
    let (err_h12, jump_rel, jump_rel_sqrt) = surrogate(reference, out.energy, out.jump_l2);
    StudyRecord {
        method: Method::Dg,
        n,
        p: sys.space.max_degree(),
        nu: Some(out.nu),
        dofs: sys.dofs(),
        h: mesh.h,
        energy: out.energy,
        jump_l2: out.jump_l2,
        err_h12,
        jump_rel,
        jump_rel_sqrt,
        identity_defect: out.identity_defect,
        wall_time: assembly + out.solve_time,
    }
}

fn conforming_record(n: usize, p: usize, mesh: &Mesh, out: &ConformingOutcome, reference: &EnergyReference) -> StudyRecord {
    let (err_h12, jump_rel, jump_rel_sqrt) = surrogate(reference, out.energy, out.jump_l2);
    StudyRecord {
        method: Method::Conforming,
        n,
        p,
        nu: None,
        dofs: out.system.rhs.len(),
        h: mesh.h,
        energy: out.energy,
        jump_l2: out.jump_l2,
        err_h12,
        jump_rel,
        jump_rel_sqrt,
        identity_defect: out.identity_defect,
        wall_time: out.wall_time,
    }
}

/// DG records for every `ν` on one mesh and degree, sharing a single assembly.
fn dg_records(n: usize, p: usize, nus: &[f64], reference: &EnergyReference, settings: &StudySettings) -> Result<Vec<StudyRecord>> {
    let mesh = Arc::new(build_uniform_square_mesh(n)?);
    let dofs = mesh.num_panels() * (p + 1) * (p + 1);
    if !settings.admits(dofs) {
        log::warn!("skipping dg n={n} p={p}: {dofs} dofs above the cap");
        return Ok(Vec::new());
    }
    let t = Instant::now();
    let space = Arc::new(HpSpace::uniform(mesh.clone(), p, SpaceKind::Discontinuous)?);
    let sys = assemble_dg(space, &settings.quadrature()?, &LoadFn::default(), settings.threads)?;
    let assembly = t.elapsed().as_secs_f64();
    // penalties share K, B and P; solves are independent and collected in input order
    let outcomes: Vec<DgOutcome> =
        with_threads(settings.threads, || nus.par_iter().map(|&nu| solve_dg(&sys, nu)).collect::<Result<_>>())??;
    Ok(outcomes
        .iter()
        .map(|o| {
            let rec = dg_record(n, &mesh, &sys, o, reference, assembly);
            log::info!("{}: err_h12 {:.4e} jump_rel {:.4e}", rec.label(), rec.err_h12, rec.jump_rel);
            rec
        })
        .collect())
}

/// h-version: uniform refinement at fixed degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HStudy {
    pub ps: Vec<usize>,
    pub nus: Vec<f64>,
    pub ns: Vec<usize>,
    /// Degrees for which conforming comparison records are added.
    pub conforming_ps: Vec<usize>,
    pub settings: StudySettings,
}

impl Default for HStudy {
    fn default() -> Self {
        HStudy {
            ps: vec![1, 3, 5],
            nus: vec![1.0, 20.0, 100.0],
            ns: vec![4, 8, 16, 32],
            conforming_ps: vec![1],
            settings: StudySettings::default(),
        }
    }
}

pub fn run_h_study(cfg: &HStudy, reference: &EnergyReference) -> Result<Vec<StudyRecord>> {
    for &nu in &cfg.nus {
        check_nu(nu)?;
    }
    let mut records = Vec::new();
    for &p in &cfg.ps {
        for &n in &cfg.ns {
            records.extend(dg_records(n, p, &cfg.nus, reference, &cfg.settings)?);
        }
    }
    for &p in &cfg.conforming_ps {
        for &n in &cfg.ns {
            let mesh = Arc::new(build_uniform_square_mesh(n)?);
            let dofs = ((n * p).saturating_sub(1)).pow(2);
            if dofs == 0 || !cfg.settings.admits(dofs) {
                continue;
            }
            let out = solve_conforming(mesh.clone(), p, &cfg.settings)?;
            records.push(conforming_record(n, p, &mesh, &out, reference));
        }
    }
    Ok(records)
}

/// p-version: increasing degree on a fixed mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PStudy {
    pub n: usize,
    pub ps: Vec<usize>,
    pub nus: Vec<f64>,
    pub settings: StudySettings,
}

impl Default for PStudy {
    fn default() -> Self {
        PStudy {
            n: 2,
            ps: (1..=8).collect(),
            nus: vec![1.0, 10.0, 50.0, 100.0],
            settings: StudySettings::default(),
        }
    }
}

pub fn run_p_study(cfg: &PStudy, reference: &EnergyReference) -> Result<Vec<StudyRecord>> {
    for &nu in &cfg.nus {
        check_nu(nu)?;
    }
    let mut records = Vec::new();
    for &p in &cfg.ps {
        records.extend(dg_records(cfg.n, p, &cfg.nus, reference, &cfg.settings)?);
    }
    Ok(records)
}

/// Solution fields on one mesh for several penalties plus the conforming solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuSweep {
    pub n: usize,
    pub p: usize,
    pub nus: Vec<f64>,
    /// Samples per panel side, including the panel boundary.
    pub samples_per_side: usize,
    pub settings: StudySettings,
}

impl Default for NuSweep {
    fn default() -> Self {
        NuSweep {
            n: 5,
            p: 3,
            nus: vec![0.1, 1.0, 10.0],
            samples_per_side: 9,
            settings: StudySettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub method: Method,
    pub nu: Option<f64>,
    pub jump_l2: f64,
    pub boundary_trace_l2: f64,
    /// Largest sampled `|u − u_conf|`.
    pub max_diff_to_conforming: f64,
    pub max_abs: f64,
    pub identity_defect: f64,
}

/// Value of a field at a point of a panel's closure (panel-local, so both sides of a jump appear).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub method: Method,
    pub nu: Option<f64>,
    pub panel: usize,
    pub x: f64,
    pub y: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuSweepResult {
    pub fields: Vec<FieldSummary>,
    pub samples: Vec<FieldSample>,
}

fn sample_field(view: &FieldView, m: usize) -> Vec<(usize, f64, f64, f64)> {
    let mesh = view.space.mesh();
    let mut out = Vec::with_capacity(mesh.num_panels() * m * m);
    for q in 0..mesh.num_panels() {
        for j in 0..m {
            for i in 0..m {
                let r = [i as f64 / (m - 1) as f64, j as f64 / (m - 1) as f64];
                let x = mesh.panel_map(q, r);
                out.push((q, x[0], x[1], view.space.eval_panel(q, r, &view.coefficients)));
            }
        }
    }
    out
}

/// Panel-local samples of a field on a `samples_per_side × samples_per_side` grid per panel.
pub fn field_samples(view: &FieldView, method: Method, nu: Option<f64>, samples_per_side: usize) -> Result<Vec<FieldSample>> {
    if samples_per_side < 2 {
        return Err(Error::InvalidConfig("need at least two samples per panel side".into()));
    }
    Ok(sample_field(view, samples_per_side)
        .into_iter()
        .map(|(panel, x, y, u)| FieldSample {
            method,
            nu,
            panel,
            x,
            y,
            u,
        })
        .collect())
}

pub fn run_nu_sweep(cfg: &NuSweep) -> Result<NuSweepResult> {
    if cfg.samples_per_side < 2 {
        return Err(Error::InvalidConfig("need at least two samples per panel side".into()));
    }
    let mesh = Arc::new(build_uniform_square_mesh(cfg.n)?);
    let quad = cfg.settings.quadrature()?;
    let space = Arc::new(HpSpace::uniform(mesh.clone(), cfg.p, SpaceKind::Discontinuous)?);
    let sys = assemble_dg(space.clone(), &quad, &LoadFn::default(), cfg.settings.threads)?;
    let conf = solve_conforming(mesh, cfg.p, &cfg.settings)?;
    let conf_view = FieldView::new(conf.system.space.clone(), conf.solution.coefficients.clone())?;
    let conf_samples = sample_field(&conf_view, cfg.samples_per_side);

    let mut fields = Vec::new();
    let mut samples = Vec::new();
    let mut push = |method: Method, nu: Option<f64>, defect: f64, view: &FieldView, vals: &[(usize, f64, f64, f64)]| {
        let diff = vals
            .iter()
            .zip(&conf_samples)
            .map(|(a, b)| (a.3 - b.3).abs())
            .fold(0.0, f64::max);
        fields.push(FieldSummary {
            method,
            nu,
            jump_l2: view.jump_l2(),
            boundary_trace_l2: view.boundary_trace_l2(),
            max_diff_to_conforming: diff,
            max_abs: vals.iter().map(|s| s.3.abs()).fold(0.0, f64::max),
            identity_defect: defect,
        });
        samples.extend(vals.iter().map(|&(panel, x, y, u)| FieldSample {
            method,
            nu,
            panel,
            x,
            y,
            u,
        }));
    };
    for &nu in &cfg.nus {
        let out = solve_dg(&sys, nu)?;
        let view = out.field(&space)?;
        let vals = sample_field(&view, cfg.samples_per_side);
        push(Method::Dg, Some(nu), out.identity_defect, &view, &vals);
    }
    push(Method::Conforming, None, conf.identity_defect, &conf_view, &conf_samples);
    Ok(NuSweepResult { fields, samples })
}

impl CsvRow for FieldSummary {
    fn header() -> &'static [&'static str] {
        &[
            "method",
            "nu",
            "jump_l2",
            "boundary_trace_l2",
            "max_diff_to_conforming",
            "max_abs",
            "identity_defect",
        ]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            method_name(self.method).into(),
            format_opt(self.nu),
            format_float(self.jump_l2),
            format_float(self.boundary_trace_l2),
            format_float(self.max_diff_to_conforming),
            format_float(self.max_abs),
            format_float(self.identity_defect),
        ]
    }
}

impl CsvRow for FieldSample {
    fn header() -> &'static [&'static str] {
        &["method", "nu", "panel", "x", "y", "u"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            method_name(self.method).into(),
            format_opt(self.nu),
            self.panel.to_string(),
            format_float(self.x),
            format_float(self.y),
            format_float(self.u),
        ]
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Dg => "dg",
        Method::Conforming => "conforming",
    }
}

/// Production rule versus the brute-force oracle on representative pairs of a uniform mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureValidation {
    pub n: usize,
    pub order: usize,
    pub max_degree: usize,
    /// Oracle tolerance for touching pairs; disjoint pairs use a tenth of it.
    pub oracle_tolerance: f64,
}

impl Default for QuadratureValidation {
    fn default() -> Self {
        QuadratureValidation {
            n: 3,
            order: DEFAULT_VALIDATION_ORDER,
            max_degree: 3,
            oracle_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureCheck {
    /// `panel_pair` or `edge_panel`.
    pub entity: String,
    pub class: String,
    pub target: usize,
    pub source: usize,
    pub degree: usize,
    pub order: usize,
    pub max_abs_err: f64,
    /// Max entry error over the max entry of the oracle block.
    pub rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seconds: f64,
}

impl CsvRow for QuadratureCheck {
    fn header() -> &'static [&'static str] {
        &[
            "entity",
            "class",
            "target",
            "source",
            "degree",
            "order",
            "max_abs_err",
            "rel_err",
            "tolerance",
            "pass",
            "seconds",
        ]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.entity.clone(),
            self.class.clone(),
            self.target.to_string(),
            self.source.to_string(),
            self.degree.to_string(),
            self.order.to_string(),
            format_float(self.max_abs_err),
            format_float(self.rel_err),
            format_float(self.tolerance),
            self.pass.to_string(),
            format_float(self.seconds),
        ]
    }
}

const TOUCHING_TOL: f64 = 1e-6;
const DISJOINT_TOL: f64 = 1e-10;

/// One representative `(target, source, class)` per panel-pair class, with the
/// source in a corner and disjoint pairs split into near and far.
fn representative_pairs(mesh: &Mesh) -> Result<Vec<(usize, usize, String)>> {
    let src = 0;
    let mut out: Vec<(usize, usize, String)> = Vec::new();
    let mut far: Option<(f64, usize)> = None;
    for b in 0..mesh.num_panels() {
        let class = mesh.classify_pair(src, b)?;
        let tag = match class {
            PairClass::Disjoint => {
                let ratio = mesh.panel_distance(src, b) / mesh.diameter(src);
                if far.is_none_or(|(r, _)| ratio > r) {
                    far = Some((ratio, b));
                }
                if ratio < 1.0 {
                    "disjoint_near".to_string()
                } else {
                    continue;
                }
            }
            c => c.tag().to_string(),
        };
        if !out.iter().any(|(_, _, t)| *t == tag) {
            out.push((b, src, tag));
        }
    }
    if let Some((ratio, b)) = far {
        if ratio >= 1.0 {
            out.push((b, src, "disjoint_far".into()));
        }
    }
    Ok(out)
}

fn representative_edges(mesh: &Mesh, src: usize) -> Result<Vec<(usize, String)>> {
    let mut out: Vec<(usize, String)> = Vec::new();
    let mut far: Option<(f64, usize)> = None;
    for e in 0..mesh.num_edges() {
        let tag = match mesh.classify_edge_panel(e, src)? {
            EdgePanelClass::Side => "side",
            EdgePanelClass::CommonVertex { .. } => "common_vertex",
            EdgePanelClass::Disjoint => {
                let d = mesh.edge_panel_distance(e, src);
                if far.is_none_or(|(r, _)| d > r) {
                    far = Some((d, e));
                }
                "disjoint"
            }
        };
        if !out.iter().any(|(_, t)| t == tag) {
            out.push((e, tag.into()));
        }
    }
    if let Some((_, e)) = far {
        out.push((e, "disjoint_far".into()));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn compare(
    entity: &str,
    class: String,
    target: usize,
    source: usize,
    degree: usize,
    order: usize,
    value: DMatrix<f64>,
    oracle: DMatrix<f64>,
    seconds: f64,
) -> QuadratureCheck {
    let max_abs_err = (&value - &oracle).amax();
    let rel_err = max_abs_err / oracle.amax();
    let tolerance = if class.starts_with("disjoint") { DISJOINT_TOL } else { TOUCHING_TOL };
    QuadratureCheck {
        entity: entity.into(),
        class,
        target,
        source,
        degree,
        order,
        max_abs_err,
        rel_err,
        tolerance,
        pass: rel_err <= tolerance,
        seconds,
    }
}

/// Compares whole modal blocks (all functions up to each degree) against the oracle.
pub fn validate_quadrature(cfg: &QuadratureValidation) -> Result<Vec<QuadratureCheck>> {
    let mesh = build_uniform_square_mesh(cfg.n)?;
    let quad = GalerkinQuadrature::exact_order(cfg.order)?;
    let touching = BruteForceOracle::new(cfg.oracle_tolerance)?;
    let separated = BruteForceOracle::new(cfg.oracle_tolerance * 1e-1)?;
    let pairs = representative_pairs(&mesh)?;
    let src = pairs.first().map(|p| p.1).unwrap_or(0);
    let edges = representative_edges(&mesh, src)?;
    let mut out = Vec::new();
    for degree in 0..=cfg.max_degree {
        let fam = ModalValues { p: degree };
        for (b, a, class) in &pairs {
            let oracle = if class.starts_with("disjoint") { &separated } else { &touching };
            let t = Instant::now();
            let value = quad.panel_pair(&mesh, *b, *a, &fam, &fam)?;
            let reference = oracle.panel_pair(&mesh, *b, *a, &fam, &fam)?;
            let secs = t.elapsed().as_secs_f64();
            out.push(compare("panel_pair", class.clone(), *b, *a, degree, cfg.order, value, reference, secs));
        }
        let g = EdgeLegendre { pmax: degree };
        for (e, class) in &edges {
            let oracle = if class.starts_with("disjoint") { &separated } else { &touching };
            let t = Instant::now();
            let value = quad.edge_panel(&mesh, *e, src, &g, &fam)?;
            let reference = oracle.edge_panel(&mesh, *e, src, &g, &fam)?;
            let secs = t.elapsed().as_secs_f64();
            out.push(compare("edge_panel", class.clone(), *e, src, degree, cfg.order, value, reference, secs));
        }
    }
    Ok(out)
}
