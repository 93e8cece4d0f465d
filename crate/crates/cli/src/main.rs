//! `dgbem`: runs single solves and the convergence studies, writing CSV or JSON.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dgbem::assembly::{assemble_dg, LoadFn};
use dgbem::study::{
    compute_energy_reference, field_samples, run_h_study, run_nu_sweep, run_p_study, solve_conforming, solve_dg,
    validate_quadrature, EnergyReference, HStudy, NuSweep, PStudy, QuadratureValidation, StudySettings,
};
use dgbem::{build_uniform_square_mesh, FieldView, GalerkinQuadrature, HpSpace, Method, SpaceKind};

use report::{Output, Report};

#[derive(Parser, Debug)]
#[command(name = "dgbem", version, about = "DG boundary elements for the hypersingular operator on the unit square screen")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Gauss order of the production quadrature.
    #[arg(long, default_value_t = dgbem::quadrature::DEFAULT_ASSEMBLY_ORDER)]
    quad_order: usize,
    /// Worker threads for assembly and solves (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

impl Common {
    fn settings(&self, max_dofs: Option<usize>) -> StudySettings {
        StudySettings {
            quad_order: self.quad_order,
            threads: self.threads,
            max_dofs,
        }
    }

    fn output(&self) -> Result<Output> {
        Output::new(&self.out, self.format)
    }
}

#[derive(Args, Debug, Clone)]
struct Reference {
    /// Use this `‖u‖²_ex` instead of extrapolating one.
    #[arg(long)]
    u_ex_sq: Option<f64>,
    /// Conforming p=1 meshes for the extrapolated reference.
    #[arg(long = "ref-n", value_delimiter = ',', default_values_t = [4, 8, 16, 32, 64])]
    ref_ns: Vec<usize>,
}

impl Reference {
    fn resolve(&self, settings: &StudySettings) -> Result<EnergyReference> {
        match self.u_ex_sq {
            Some(v) if v > 0.0 && v.is_finite() => Ok(EnergyReference {
                u_ex_sq: v,
                tolerance: 0.0,
                levels: Vec::new(),
                alpha: 0.0,
                c: 0.0,
            }),
            Some(v) => bail!("--u-ex-sq must be positive, got {v}"),
            None => {
                log::info!("extrapolating the energy reference from conforming p=1, n = {:?}", self.ref_ns);
                Ok(compute_energy_reference(1, &self.ref_ns, settings)?)
            }
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one configuration and write panel-local solution samples.
    Solve {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long, default_value_t = 10.0)]
        nu: f64,
        /// Solve the conforming problem instead (ν is ignored).
        #[arg(long)]
        conforming: bool,
        /// Samples per panel side.
        #[arg(long, default_value_t = 9)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// h-version study: uniform refinement at fixed degrees.
    HStudy {
        #[arg(long = "n", value_delimiter = ',', default_values_t = [4, 8, 16, 32])]
        ns: Vec<usize>,
        #[arg(long = "p", value_delimiter = ',', default_values_t = [1, 3, 5])]
        ps: Vec<usize>,
        #[arg(long = "nu", value_delimiter = ',', default_values_t = [1.0, 20.0, 100.0])]
        nus: Vec<f64>,
        /// Degrees of the conforming comparison runs (empty to skip).
        #[arg(long = "conforming-p", value_delimiter = ',', default_values_t = [1])]
        conforming_ps: Vec<usize>,
        /// Skip configurations with more unknowns.
        #[arg(long)]
        max_dofs: Option<usize>,
        #[command(flatten)]
        reference: Reference,
        #[command(flatten)]
        common: Common,
    },
    /// p-version study on a fixed mesh.
    PStudy {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long = "p", value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5, 6, 7, 8])]
        ps: Vec<usize>,
        #[arg(long = "nu", value_delimiter = ',', default_values_t = [1.0, 10.0, 50.0, 100.0])]
        nus: Vec<f64>,
        #[arg(long)]
        max_dofs: Option<usize>,
        #[command(flatten)]
        reference: Reference,
        #[command(flatten)]
        common: Common,
    },
    /// Solution fields for several penalties next to the conforming solution.
    NuSweep {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        p: usize,
        #[arg(long = "nu", value_delimiter = ',', default_values_t = [0.1, 1.0, 10.0])]
        nus: Vec<f64>,
        #[arg(long, default_value_t = 9)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Compare production quadrature blocks with the brute-force oracle.
    ValidateQuadrature {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = dgbem::quadrature::DEFAULT_VALIDATION_ORDER)]
        quad_order: usize,
        #[arg(long, default_value_t = 3)]
        max_degree: usize,
        #[arg(long, default_value_t = 1e-9)]
        oracle_tol: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Extrapolate `‖u‖²_ex` from conforming solves.
    EnergyRef {
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long = "n", value_delimiter = ',', default_values_t = [4, 8, 16, 32, 64])]
        ns: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
}

fn solve(n: usize, p: usize, nu: f64, conforming: bool, samples: usize, common: &Common) -> Result<()> {
    let out = common.output()?;
    let settings = common.settings(None);
    let mesh = Arc::new(build_uniform_square_mesh(n)?);
    let (view, method, nu, energy, jump, defect) = if conforming {
        let o = solve_conforming(mesh, p, &settings)?;
        let view = FieldView::new(o.system.space.clone(), o.solution.coefficients.clone())?;
        (view, Method::Conforming, None, o.energy, o.jump_l2, o.identity_defect)
    } else {
        let space = Arc::new(HpSpace::uniform(mesh, p, SpaceKind::Discontinuous)?);
        let quad = GalerkinQuadrature::new(common.quad_order)?;
        let sys = assemble_dg(space.clone(), &quad, &LoadFn::default(), common.threads)?;
        let o = solve_dg(&sys, nu)?;
        (o.field(&space)?, Method::Dg, Some(nu), o.energy, o.jump_l2, o.identity_defect)
    };
    let rows = field_samples(&view, method, nu, samples)?;
    let path = out.write("solution", &rows)?;
    println!(
        "{} n={n} p={p}{}: {} dofs, energy {energy:.12e}, jump_l2 {jump:.6e}, identity defect {defect:.2e}",
        if conforming { "conforming" } else { "dg" },
        nu.map(|v| format!(" nu={v}")).unwrap_or_default(),
        view.coefficients.len(),
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve {
            n,
            p,
            nu,
            conforming,
            samples,
            common,
        } => solve(n, p, nu, conforming, samples, &common)?,
        Command::HStudy {
            ns,
            ps,
            nus,
            conforming_ps,
            max_dofs,
            reference,
            common,
        } => {
            let out = common.output()?;
            let settings = common.settings(max_dofs);
            let reference = reference.resolve(&settings)?;
            let cfg = HStudy {
                ps,
                nus,
                ns,
                conforming_ps,
                settings,
            };
            let records = run_h_study(&cfg, &reference)?;
            out.write_json("energy_ref", &reference)?;
            let path = out.write("h_study", &records)?;
            Report::h_version(&records, &reference).print();
            println!("wrote {}", path.display());
        }
        Command::PStudy {
            n,
            ps,
            nus,
            max_dofs,
            reference,
            common,
        } => {
            let out = common.output()?;
            let settings = common.settings(max_dofs);
            let reference = reference.resolve(&settings)?;
            let cfg = PStudy { n, ps, nus, settings };
            let records = run_p_study(&cfg, &reference)?;
            out.write_json("energy_ref", &reference)?;
            let path = out.write("p_study", &records)?;
            Report::p_version(&records, &reference).print();
            println!("wrote {}", path.display());
        }
        Command::NuSweep {
            n,
            p,
            nus,
            samples,
            common,
        } => {
            let out = common.output()?;
            let cfg = NuSweep {
                n,
                p,
                nus,
                samples_per_side: samples,
                settings: common.settings(None),
            };
            let res = run_nu_sweep(&cfg)?;
            let fields = out.write("nu_sweep_fields", &res.fields)?;
            let samples = out.write("nu_sweep_samples", &res.samples)?;
            Report::nu_sweep(&res.fields).print();
            println!("wrote {} and {}", fields.display(), samples.display());
        }
        Command::ValidateQuadrature {
            n,
            quad_order,
            max_degree,
            oracle_tol,
            out,
            format,
        } => {
            let output = Output::new(&out, format)?;
            let cfg = QuadratureValidation {
                n,
                order: quad_order,
                max_degree,
                oracle_tolerance: oracle_tol,
            };
            let checks = validate_quadrature(&cfg)?;
            let path = output.write("quadrature_validation", &checks)?;
            Report::quadrature(&checks).print();
            println!("wrote {}", path.display());
            return Ok(checks.iter().all(|c| c.pass));
        }
        Command::EnergyRef { p, ns, common } => {
            let out = common.output()?;
            let reference = compute_energy_reference(p, &ns, &common.settings(None))?;
            let path = out.write_json("energy_ref", &reference)?;
            println!(
                "u_ex_sq = {:.12e} ± {:.2e} (alpha {:.4}, C {:.4e})",
                reference.u_ex_sq, reference.tolerance, reference.alpha, reference.c
            );
            println!("wrote {}", path.display());
        }
    }
    Ok(true)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
