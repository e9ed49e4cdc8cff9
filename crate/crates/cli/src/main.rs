//! Command line front end for the convergence studies.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use nondivfem::adapt::{AdaptiveRecord, MarkingConvention};
use nondivfem::bench::{
    run_convergence, run_iteration_table, run_scheme_comparison, write_comparison_csv, write_convergence_csv,
    Refinement, RunConfig,
};
use nondivfem::operator::Experiment;
use nondivfem::solve::{GmresOptions, Scheme};
use nondivfem::Error;

#[derive(Parser)]
#[command(name = "nondivfem", version, about = "Finite element solver for A : D^2 u = f with Hessian recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence study on uniform or adaptive meshes.
    Run(RunArgs),
    /// Adaptive study with Dörfler marking.
    Adapt(AdaptArgs),
    /// GMRES iteration counts for exp1.
    Iters(ItersArgs),
    /// Errors of several schemes and degrees on shared uniform meshes.
    Compare(CompareArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// Problem key: exp1, exp2, exp3, exp4 or poly.
    #[arg(long, default_value = "exp1")]
    experiment: String,
    /// Off-diagonal coefficient of exp1.
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    /// Singularity exponent of exp2.
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
}

#[derive(Args)]
struct DiscretizationArgs {
    #[arg(long, default_value = "recovery-cg")]
    scheme: Scheme,
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// Gradient-jump penalty; chosen from the Cordes constant when omitted.
    #[arg(long)]
    eta1: Option<f64>,
    /// Hessian-jump penalty; chosen from the Cordes constant when omitted.
    #[arg(long)]
    eta2: Option<f64>,
    /// Quadrature degree override.
    #[arg(long)]
    quad_degree: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SolverArgs {
    /// Absolute and relative GMRES tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
}

impl SolverArgs {
    fn options(&self) -> GmresOptions {
        GmresOptions { tol_abs: self.tol, tol_rel: self.tol, max_iter: self.max_iter }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    disc: DiscretizationArgs,
    /// uniform or adaptive.
    #[arg(long, default_value = "uniform")]
    refine: String,
    /// The coarsest mesh has 2^k cells per side.
    #[arg(long, default_value_t = 2)]
    first_level: usize,
    /// Number of uniform levels.
    #[arg(long, default_value_t = 4)]
    levels: usize,
    #[arg(long, default_value_t = 100_000)]
    max_dofs: usize,
    #[arg(long, default_value_t = 0.9)]
    theta: f64,
    #[arg(long, default_value = "squared")]
    marking: MarkingConvention,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AdaptArgs {
    #[arg(long, default_value = "exp2")]
    experiment: String,
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
    #[command(flatten)]
    disc: DiscretizationArgs,
    #[arg(long, default_value_t = 0.9)]
    theta: f64,
    #[arg(long, default_value_t = 100_000)]
    max_dofs: usize,
    /// squared or linear bulk criterion.
    #[arg(long, default_value = "squared")]
    marking: MarkingConvention,
    /// The initial mesh has 2^k cells per side.
    #[arg(long, default_value_t = 1)]
    first_level: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ItersArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.9,0.99,0.999")]
    kappas: Vec<f64>,
    /// Mesh levels k with h = 2^-k.
    #[arg(long, value_delimiter = ',', default_value = "3,4,5,6,7,8")]
    levels: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    eta1: Vec<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    degrees: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "recovery-cg,recovery-dg,nsz")]
    schemes: Vec<Scheme>,
    #[arg(long)]
    eta1: Option<f64>,
    #[arg(long)]
    eta2: Option<f64>,
    #[arg(long, default_value_t = 2)]
    first_level: usize,
    #[arg(long, default_value_t = 4)]
    levels: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Parse(_) | Error::Io(_) => Failure::Config(e.to_string()),
            _ => Failure::Solver(e.to_string()),
        }
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => File::create(p)
            .map(|f| Box::new(f) as Box<dyn Write>)
            .map_err(|e| Failure::Config(format!("cannot create {}: {e}", p.display()))),
        None => Ok(Box::new(io::stdout())),
    }
}

fn config(experiment: &str, kappa: f64, alpha: f64, disc: &DiscretizationArgs) -> Result<RunConfig, Failure> {
    let mut c = RunConfig::new(Experiment::with_parameters(experiment, kappa, alpha)?);
    c.scheme = disc.scheme;
    c.degree = disc.degree;
    c.eta1 = disc.eta1;
    c.eta2 = disc.eta2;
    c.quad_degree = disc.quad_degree;
    c.gmres = disc.solver.options();
    Ok(c)
}

fn finish_convergence(c: &RunConfig, out: &Option<PathBuf>) -> Result<(), Failure> {
    c.validate()?;
    let sink = output(out)?;
    let records = run_convergence(c)?;
    write_convergence_csv(&records, sink)?;
    report(&records)
}

fn report(records: &[AdaptiveRecord]) -> Result<(), Failure> {
    for r in records {
        info!("level {}: dofs={} eta={:.4e} iterations={}", r.level, r.n_dofs, r.eta_global, r.iterations);
    }
    match records.iter().find(|r| !r.converged) {
        Some(r) => Err(Failure::Solver(format!("GMRES did not converge on level {} ({} dofs)", r.level, r.n_dofs))),
        None => Ok(()),
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run(a) => {
            let mut c = config(&a.problem.experiment, a.problem.kappa, a.problem.alpha, &a.disc)?;
            c.refinement = a.refine.parse::<Refinement>()?;
            c.first_level = a.first_level;
            c.levels = a.levels;
            c.max_dofs = a.max_dofs;
            c.theta = a.theta;
            c.convention = a.marking;
            finish_convergence(&c, &a.out)
        }
        Command::Adapt(a) => {
            let mut c = config(&a.experiment, a.kappa, a.alpha, &a.disc)?;
            c.refinement = Refinement::Adaptive;
            c.first_level = a.first_level;
            c.max_dofs = a.max_dofs;
            c.theta = a.theta;
            c.convention = a.marking;
            finish_convergence(&c, &a.out)
        }
        Command::Iters(a) => {
            if a.kappas.iter().any(|k| !(*k > -1.0 && *k < 1.0)) {
                return Err(Failure::Config("every kappa must lie in (-1, 1)".into()));
            }
            if a.eta1.iter().any(|e| !(*e >= 0.0)) || a.levels.iter().any(|&l| l == 0 || l > 11) {
                return Err(Failure::Config("eta1 must be nonnegative and levels in 1..=11".into()));
            }
            let sink = output(&a.out)?;
            let table = run_iteration_table(&a.kappas, &a.levels, &a.eta1, a.solver.options())?;
            table.write_csv(sink)?;
            if table.counts.iter().flatten().any(|&c| c < 0) {
                return Err(Failure::Solver("some runs failed; marked -1 in the table".into()));
            }
            Ok(())
        }
        Command::Compare(a) => {
            let mut configs = Vec::new();
            for &degree in &a.degrees {
                let mut c = RunConfig::new(Experiment::with_parameters(&a.problem.experiment, a.problem.kappa, a.problem.alpha)?);
                c.degree = degree;
                c.eta1 = a.eta1;
                c.eta2 = a.eta2;
                c.first_level = a.first_level;
                c.levels = a.levels;
                c.gmres = a.solver.options();
                // schemes are set per run; the broken Hessian scheme is left empty below degree 2
                c.scheme = Scheme::RecoveryCg;
                c.validate()?;
                configs.push(c);
            }
            let sink = output(&a.out)?;
            let mut rows = Vec::new();
            for c in &configs {
                rows.extend(run_scheme_comparison(c, &a.schemes)?);
            }
            write_comparison_csv(&rows, &a.schemes, sink)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("solver failure: {m}");
            ExitCode::from(3)
        }
    }
}
