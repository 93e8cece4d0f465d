//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//! Run with `cargo test -p dgbem-core --test acceptance`.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use dgbem::assembly::{assemble_dg, DgSystem, LoadFn};
use dgbem::mesh::build_uniform_square_mesh;
use dgbem::quadrature::{BruteForceOracle, GalerkinQuadrature, PairIntegrator, DEFAULT_VALIDATION_ORDER};
use dgbem::space::{HpSpace, SpaceKind};
use dgbem::study::{
    compute_energy_reference, fit_rate, run_h_study, run_nu_sweep, run_p_study, select, solve_dg, validate_quadrature,
    EnergyReference, HStudy, Method, NuSweep, PStudy, QuadratureValidation, StudyRecord, StudySettings,
};
use nalgebra::{DMatrix, SymmetricEigen};

const REFERENCE_NS: [usize; 5] = [4, 8, 16, 32, 64];
const H_NS: [usize; 4] = [4, 8, 16, 32];
const RATE_H: (f64, f64) = (0.4, 0.75);
const RATE_P: (f64, f64) = (-1.4, -0.6);
const IDENTITY_TOL: f64 = 1e-8;

struct Outcome {
    id: usize,
    pass: bool,
    detail: String,
}

fn outcome(id: usize, pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        id,
        pass,
        detail: detail.into(),
    }
}

fn single_thread() -> StudySettings {
    StudySettings {
        threads: Some(1),
        ..Default::default()
    }
}

fn dg_system<I: PairIntegrator>(n: usize, p: usize, quad: &I) -> DgSystem {
    let mesh = Arc::new(build_uniform_square_mesh(n).unwrap());
    let space = Arc::new(HpSpace::uniform(mesh, p, SpaceKind::Discontinuous).unwrap());
    assemble_dg(space, quad, &LoadFn::default(), None).unwrap()
}

fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn in_range(v: f64, (lo, hi): (f64, f64)) -> bool {
    (lo..=hi).contains(&v)
}

fn quadrature_agreement() -> Outcome {
    let t = Instant::now();
    let checks = validate_quadrature(&QuadratureValidation::default());
    let secs = t.elapsed().as_secs_f64();
    let checks = match checks {
        Ok(c) => c,
        Err(e) => return outcome(1, false, format!("validation failed: {e}")),
    };
    let classes = ["identical", "common_edge", "common_vertex", "disjoint_near", "disjoint_far"];
    let covered = classes
        .iter()
        .all(|c| (0..=3).all(|d| checks.iter().any(|k| k.entity == "panel_pair" && k.class == *c && k.degree == d)));
    let worst_touching = checks
        .iter()
        .filter(|c| !c.class.starts_with("disjoint"))
        .map(|c| c.rel_err)
        .fold(0.0, f64::max);
    let worst_disjoint = checks
        .iter()
        .filter(|c| c.class.starts_with("disjoint"))
        .map(|c| c.rel_err)
        .fold(0.0, f64::max);
    let pass = covered && checks.iter().all(|c| c.pass) && secs <= 60.0;
    outcome(
        1,
        pass,
        format!(
            "{} blocks at order {}, worst touching {worst_touching:.2e} (≤1e-6), worst disjoint {worst_disjoint:.2e} (≤1e-10), {secs:.1} s (≤60)",
            checks.len(),
            DEFAULT_VALIDATION_ORDER
        ),
    )
}

fn matrix_structure() -> Outcome {
    let sys = dg_system(4, 2, &GalerkinQuadrature::default());
    let sym = rel_frobenius(&sys.k.transpose(), &sys.k);
    let p_eigs = SymmetricEigen::new(sys.p.clone()).eigenvalues;
    let p_min = p_eigs.min() / p_eigs.amax();
    let kp_min = SymmetricEigen::new(&sys.k + &sys.p).eigenvalues.min();
    let nu = 1.0;
    let a = sys.matrix(nu);
    let split = rel_frobenius(&(&a + a.transpose()), &(2.0 * &sys.k + 2.0 * nu * &sys.p));
    let pass = sym <= 1e-10 && p_min >= -1e-12 && kp_min > 0.0 && split <= 1e-12;
    outcome(
        2,
        pass,
        format!("asym {sym:.1e}, min eig P/|P| {p_min:.1e}, min eig K+P {kp_min:.3e}, A+Aᵀ defect {split:.1e}"),
    )
}

fn orientation_invariance(defects: &mut Vec<f64>) -> Outcome {
    let quad = GalerkinQuadrature::default();
    let mesh = build_uniform_square_mesh(4).unwrap();
    let solve = |mesh| {
        let space = Arc::new(HpSpace::uniform(Arc::new(mesh), 2, SpaceKind::Discontinuous).unwrap());
        solve_dg(&assemble_dg(space, &quad, &LoadFn::default(), None).unwrap(), 10.0).unwrap()
    };
    let a = solve(mesh.clone());
    let b = solve(mesh.with_flipped_interior_edges());
    defects.extend([a.identity_defect, b.identity_defect]);
    let ca = &a.solution.coefficients;
    let diff = (ca - &b.solution.coefficients).amax() / ca.amax();
    outcome(4, diff <= 1e-8, format!("n=4 p=2 ν=10: relative coefficient change {diff:.2e} (≤1e-8)"))
}

fn nu_limit(defects: &mut Vec<f64>) -> Outcome {
    let cfg = NuSweep {
        n: 5,
        p: 3,
        nus: vec![0.1, 1.0, 10.0, 100.0],
        samples_per_side: 9,
        settings: StudySettings::default(),
    };
    let res = match run_nu_sweep(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(5, false, format!("sweep failed: {e}")),
    };
    defects.extend(res.fields.iter().map(|f| f.identity_defect));
    let dg: Vec<_> = res.fields.iter().filter(|f| f.method == Method::Dg).collect();
    let conf = res.fields.iter().find(|f| f.method == Method::Conforming).unwrap();
    let jumps: Vec<f64> = dg.iter().map(|f| f.jump_l2).collect();
    let decreasing = jumps.windows(2).all(|w| w[1] < w[0]);
    let last = dg.last().unwrap();
    let ratio = last.max_diff_to_conforming / conf.max_abs;
    outcome(
        5,
        decreasing && ratio < 0.05,
        format!(
            "jump_l2 over ν {:?}: {}, max diff at ν=100 is {:.2}% of the conforming max (<5%)",
            cfg.nus,
            jumps.iter().map(|j| format!("{j:.3e}")).collect::<Vec<_>>().join(" > "),
            100.0 * ratio
        ),
    )
}

fn slope(records: &[&StudyRecord], x: impl Fn(&StudyRecord) -> f64, y: impl Fn(&StudyRecord) -> f64) -> f64 {
    let xs: Vec<f64> = records.iter().map(|r| x(r)).collect();
    let ys: Vec<f64> = records.iter().map(|r| y(r)).collect();
    fit_rate(&xs, &ys, None).map(|f| f.slope).unwrap_or(f64::NAN)
}

fn h_rates(reference: &EnergyReference, reference_secs: f64, defects: &mut Vec<f64>) -> Outcome {
    let nus = [1.0, 20.0, 100.0];
    let cfg = HStudy {
        ps: vec![1],
        nus: nus.to_vec(),
        ns: H_NS.to_vec(),
        conforming_ps: Vec::new(),
        settings: single_thread(),
    };
    let t = Instant::now();
    let records = match run_h_study(&cfg, reference) {
        Ok(r) => r,
        Err(e) => return outcome(6, false, format!("h-study failed: {e}")),
    };
    let secs = t.elapsed().as_secs_f64() + reference_secs;
    defects.extend(records.iter().map(|r| r.identity_defect));
    let err = slope(&select(&records, Method::Dg, 1, Some(100.0)), |r| r.h, |r| r.err_h12);
    let jumps: Vec<f64> = nus
        .iter()
        .map(|&nu| slope(&select(&records, Method::Dg, 1, Some(nu)), |r| r.h, |r| r.jump_rel))
        .collect();
    let pass = in_range(err, RATE_H) && jumps.iter().all(|&s| in_range(s, RATE_H)) && secs <= 1200.0;
    outcome(
        6,
        pass,
        format!(
            "err_h12 slope {err:.3} at ν=100, jump_rel slopes {} for ν {nus:?} (in [0.4, 0.75]), {secs:.0} s (≤1200)",
            jumps.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn p_rates(reference: &EnergyReference, defects: &mut Vec<f64>) -> Outcome {
    let nus = [1.0, 10.0, 50.0, 100.0];
    let cfg = PStudy {
        n: 2,
        ps: (1..=8).collect(),
        nus: nus.to_vec(),
        settings: StudySettings::default(),
    };
    let t = Instant::now();
    let records = match run_p_study(&cfg, reference) {
        Ok(r) => r,
        Err(e) => return outcome(7, false, format!("p-study failed: {e}")),
    };
    let secs = t.elapsed().as_secs_f64();
    defects.extend(records.iter().map(|r| r.identity_defect));
    let by_nu = |nu: f64| {
        let mut v: Vec<&StudyRecord> = records.iter().filter(|r| r.nu == Some(nu)).collect();
        v.sort_by_key(|r| r.p);
        v
    };
    let err = slope(&by_nu(100.0), |r| r.p as f64, |r| r.err_h12);
    let jumps: Vec<f64> = nus.iter().map(|&nu| slope(&by_nu(nu), |r| r.p as f64, |r| r.jump_rel)).collect();
    let pass = in_range(err, RATE_P) && jumps.iter().all(|&s| in_range(s, RATE_P)) && secs <= 600.0;
    outcome(
        7,
        pass,
        format!(
            "err_h12 slope {err:.3} at ν=100, jump_rel slopes {} for ν {nus:?} (in [-1.4, -0.6]), {secs:.0} s (≤600)",
            jumps.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn oracle_equivalence(defects: &mut Vec<f64>) -> Outcome {
    let nu = 10.0;
    let production = dg_system(2, 1, &GalerkinQuadrature::exact_order(DEFAULT_VALIDATION_ORDER).unwrap());
    let oracle = dg_system(2, 1, &BruteForceOracle::new(1e-10).unwrap());
    let a = solve_dg(&production, nu).unwrap();
    let b = solve_dg(&oracle, nu).unwrap();
    defects.extend([a.identity_defect, b.identity_defect]);
    let cb = &b.solution.coefficients;
    let diff = (&a.solution.coefficients - cb).amax() / cb.amax();
    outcome(8, diff <= 1e-5, format!("n=2 p=1 ν=10: relative coefficient difference {diff:.2e} (≤1e-5)"))
}

fn main() -> ExitCode {
    let mut defects = Vec::new();
    let mut results = vec![quadrature_agreement(), matrix_structure()];
    results.push(orientation_invariance(&mut defects));
    results.push(nu_limit(&mut defects));

    let t = Instant::now();
    let reference = compute_energy_reference(1, &REFERENCE_NS, &single_thread());
    let reference_secs = t.elapsed().as_secs_f64();
    match &reference {
        Ok(r) => {
            eprintln!(
                "energy reference ‖u‖²_ex = {:.8} ± {:.1e} (α = {:.3}) from conforming p=1, n = {REFERENCE_NS:?}",
                r.u_ex_sq, r.tolerance, r.alpha
            );
            results.push(h_rates(r, reference_secs, &mut defects));
            results.push(p_rates(r, &mut defects));
        }
        Err(e) => {
            results.push(outcome(6, false, format!("no energy reference: {e}")));
            results.push(outcome(7, false, format!("no energy reference: {e}")));
        }
    }
    results.push(oracle_equivalence(&mut defects));

    let worst = defects.iter().copied().fold(0.0, f64::max);
    let finite = defects.iter().all(|d| d.is_finite());
    results.push(outcome(
        3,
        finite && worst <= IDENTITY_TOL,
        format!("{} solves, worst relative defect {worst:.2e} (≤1e-8)", defects.len()),
    ));

    results.sort_by_key(|o| o.id);
    let mut failed = 0;
    for o in &results {
        println!("criterion {}: {} {}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", results.len());
        ExitCode::FAILURE
    }
}
