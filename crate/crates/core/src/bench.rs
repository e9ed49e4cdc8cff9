//! Convergence studies, iteration tables and scheme comparisons with CSV output.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::adapt::{adaptive_loop, solve_level, AdaptiveOptions, AdaptiveRecord, MarkingConvention};
use crate::error::{Error, Result};
use crate::estimate::error_norms;
use crate::mesh::{build_rect_mesh, Mesh};
use crate::operator::{Experiment, ProblemData, Rect};
use crate::solve::{solve_problem, GmresOptions, Scheme, SolveOptions};

/// Header of convergence CSV files.
pub const CONVERGENCE_HEADER: [&str; 7] = ["Ndofs", "h_max", "L2_error", "H1_error", "H2h_error", "Eta_global", "iterations"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refinement {
    Uniform,
    Adaptive,
}

impl std::str::FromStr for Refinement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Refinement::Uniform),
            "adaptive" => Ok(Refinement::Adaptive),
            _ => Err(Error::InvalidArgument(format!("unknown refinement '{s}'"))),
        }
    }
}

/// One study.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub scheme: Scheme,
    pub degree: usize,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub refinement: Refinement,
    pub theta: f64,
    pub convention: MarkingConvention,
    /// Uniform studies use `2^k x 2^k` meshes for `k = first_level .. first_level + levels`.
    pub first_level: usize,
    pub levels: usize,
    pub max_dofs: usize,
    pub gmres: GmresOptions,
    pub quad_degree: Option<usize>,
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        RunConfig {
            experiment,
            scheme: Scheme::RecoveryCg,
            degree: 2,
            eta1: None,
            eta2: None,
            refinement: Refinement::Uniform,
            theta: 0.9,
            convention: MarkingConvention::Squared,
            first_level: 2,
            levels: 4,
            max_dofs: 100_000,
            gmres: GmresOptions::default(),
            quad_degree: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.degree == 0 || self.degree > 8 {
            return bad(format!("degree must lie in 1..=8, got {}", self.degree));
        }
        if self.scheme == Scheme::Nsz && self.degree < 2 {
            return bad("the broken Hessian scheme needs degree >= 2".into());
        }
        for (name, v) in [("eta1", self.eta1), ("eta2", self.eta2)] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be a nonnegative number, got {v}"));
                }
            }
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad(format!("theta must lie in (0, 1], got {}", self.theta));
        }
        if self.levels == 0 || self.first_level + self.levels > 12 {
            return bad("levels must be positive and the finest mesh at most 2^11 per side".into());
        }
        if self.max_dofs == 0 {
            return bad("max_dofs must be positive".into());
        }
        if !(self.gmres.tol_abs >= 0.0 && self.gmres.tol_rel >= 0.0) || self.gmres.max_iter == 0 {
            return bad("invalid solver tolerances".into());
        }
        Ok(())
    }

    pub fn problem(&self) -> ProblemData {
        self.experiment.problem()
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            degree: self.degree,
            scheme: self.scheme,
            eta1: self.eta1,
            eta2: self.eta2,
            gmres: self.gmres,
            quad_degree: self.quad_degree,
            recover_hessian: false,
            use_preconditioner: true,
        }
    }
}

/// Structured `n x n` mesh of the problem domain.
pub fn domain_mesh(domain: &Rect, n: usize) -> Result<Mesh> {
    build_rect_mesh(domain.x0, domain.x1, domain.y0, domain.y1, n, n)
}

/// Thread pool capped by `NONDIVFEM_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let n = match std::env::var("NONDIVFEM_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidArgument(format!("NONDIVFEM_THREADS must be a positive integer, got '{v}'")))?,
        Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Uniform or adaptive study as configured. Solver errors abort; records of
/// levels that did not converge are kept.
pub fn run_convergence(config: &RunConfig) -> Result<Vec<AdaptiveRecord>> {
    config.validate()?;
    let problem = config.problem();
    let opts = config.solve_options();
    match config.refinement {
        Refinement::Uniform => {
            let ks: Vec<usize> = (config.first_level..config.first_level + config.levels).collect();
            let pool = thread_pool()?;
            let results: Vec<Result<AdaptiveRecord>> = pool.install(|| {
                ks.par_iter()
                    .enumerate()
                    .map(|(level, &k)| {
                        let mesh = Arc::new(domain_mesh(&problem.domain, 1 << k)?);
                        solve_level(&problem, mesh, &opts, level).map(|r| r.0)
                    })
                    .collect()
            });
            results.into_iter().collect()
        }
        Refinement::Adaptive => {
            let mesh = domain_mesh(&problem.domain, 1 << config.first_level)?;
            let aopts = AdaptiveOptions {
                solve: opts,
                theta: config.theta,
                convention: config.convention,
                max_dofs: config.max_dofs,
                max_levels: 200,
            };
            let run = adaptive_loop(&problem, mesh, &aopts);
            match run.failure {
                Some(e) if run.records.is_empty() => Err(e),
                Some(e) => {
                    log::warn!("adaptive loop stopped early: {e}");
                    Ok(run.records)
                }
                None => Ok(run.records),
            }
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

/// Writes convergence records.
pub fn write_convergence_csv<W: Write>(records: &[AdaptiveRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CONVERGENCE_HEADER)?;
    for r in records {
        let e = r.errors;
        w.write_record([
            r.n_dofs.to_string(),
            format!("{:.12e}", r.h_max),
            fmt_opt(e.map(|e| e.l2)),
            fmt_opt(e.map(|e| e.h1)),
            fmt_opt(e.map(|e| e.h2h)),
            format!("{:.12e}", r.eta_global),
            r.iterations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// GMRES iteration counts; `-1` marks failed runs.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTable {
    /// Mesh levels `k` with `h = 2^-k`.
    pub levels: Vec<usize>,
    /// Column keys `(kappa, eta1)`.
    pub columns: Vec<(f64, f64)>,
    pub counts: Vec<Vec<i64>>,
}

impl IterationTable {
    pub fn get(&self, kappa: f64, eta1: f64, level: usize) -> Option<i64> {
        let c = self.columns.iter().position(|&(k, e)| k == kappa && e == eta1)?;
        let r = self.levels.iter().position(|&l| l == level)?;
        Some(self.counts[r][c])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["h".to_string()];
        header.extend(self.columns.iter().map(|(k, e)| format!("kappa={k}/eta1={e}")));
        w.write_record(&header)?;
        for (r, &l) in self.levels.iter().enumerate() {
            let mut row = vec![format!("2^-{l}")];
            row.extend(self.counts[r].iter().map(|c| c.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Iteration counts of the preconditioned recovery-CG solve of exp1 with `p = 2`, `eta2 = 0`.
pub fn run_iteration_table(kappas: &[f64], levels: &[usize], eta1s: &[f64], gmres: GmresOptions) -> Result<IterationTable> {
    let columns: Vec<(f64, f64)> = kappas.iter().flat_map(|&k| eta1s.iter().map(move |&e| (k, e))).collect();
    let jobs: Vec<(usize, usize)> = (0..levels.len()).flat_map(|r| (0..columns.len()).map(move |c| (r, c))).collect();
    let pool = thread_pool()?;
    let counts_flat: Vec<i64> = pool.install(|| {
        jobs.par_iter()
            .map(|&(r, c)| {
                let (kappa, eta1) = columns[c];
                let mut opts = SolveOptions::new(2, Scheme::RecoveryCg).penalties(eta1, 0.0);
                opts.gmres = gmres;
                let run = || -> Result<i64> {
                    let problem = Experiment::with_parameters("exp1", kappa, 0.0)?.problem();
                    let mesh = Arc::new(domain_mesh(&problem.domain, 1 << levels[r])?);
                    let sol = solve_problem(&problem, mesh, &opts)?;
                    Ok(if sol.report.converged { sol.report.iterations as i64 } else { -1 })
                };
                run().unwrap_or_else(|e| {
                    log::warn!("kappa={kappa} eta1={eta1} h=2^-{}: {e}", levels[r]);
                    -1
                })
            })
            .collect()
    });
    let counts = counts_flat.chunks(columns.len()).map(|c| c.to_vec()).collect();
    Ok(IterationTable { levels: levels.to_vec(), columns, counts })
}

/// Errors of several schemes on a shared sequence of uniform meshes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub degree: usize,
    pub level: usize,
    pub n_dofs: usize,
    pub h_max: f64,
    /// `(l2, h1, h2h)` per scheme; `None` where the scheme does not apply or failed.
    pub errors: Vec<Option<(f64, f64, f64)>>,
}

/// Runs every scheme on `2^k x 2^k` meshes for the configured levels.
/// The broken Hessian scheme uses `eta1 = 1` unless a positive value is configured.
pub fn run_scheme_comparison(config: &RunConfig, schemes: &[Scheme]) -> Result<Vec<ComparisonRow>> {
    config.validate()?;
    let problem = config.problem();
    let exact = problem
        .exact
        .clone()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no exact solution", problem.name)))?;
    let ks: Vec<usize> = (config.first_level..config.first_level + config.levels).collect();
    let jobs: Vec<(usize, usize)> = (0..ks.len()).flat_map(|r| (0..schemes.len()).map(move |s| (r, s))).collect();
    let pool = thread_pool()?;
    let results: Vec<Result<Option<(f64, f64, f64)>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(r, s)| {
                let scheme = schemes[s];
                if scheme == Scheme::Nsz && config.degree < 2 {
                    return Ok(None);
                }
                let mut opts = config.solve_options();
                opts.scheme = scheme;
                if scheme == Scheme::Nsz && !opts.eta1.is_some_and(|e| e > 0.0) {
                    opts.eta1 = Some(1.0);
                }
                let mesh = Arc::new(domain_mesh(&problem.domain, 1 << ks[r])?);
                let sol = solve_problem(&problem, mesh, &opts)?;
                if !sol.report.converged {
                    return Ok(None);
                }
                let e = error_norms(&sol.u, &exact, sol.quad_degree);
                Ok(Some((e.l2, e.h1, e.h2h)))
            })
            .collect()
    });
    let results: Vec<_> = results.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (r, &k) in ks.iter().enumerate() {
        let mesh = domain_mesh(&problem.domain, 1 << k)?;
        rows.push(ComparisonRow {
            degree: config.degree,
            level: r,
            n_dofs: crate::adapt::count_dofs(&mesh, config.degree),
            h_max: mesh.quality().h_max,
            errors: results[r * schemes.len()..(r + 1) * schemes.len()].to_vec(),
        });
    }
    Ok(rows)
}

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], schemes: &[Scheme], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["degree".to_string(), "Ndofs".to_string(), "h_max".to_string()];
    for s in schemes {
        for n in ["L2_error", "H1_error", "H2h_error"] {
            header.push(format!("{s}_{n}"));
        }
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.degree.to_string(), r.n_dofs.to_string(), format!("{:.12e}", r.h_max)];
        for e in &r.errors {
            rec.push(fmt_opt(e.map(|e| e.0)));
            rec.push(fmt_opt(e.map(|e| e.1)));
            rec.push(fmt_opt(e.map(|e| e.2)));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Numeric CSV table with empty fields as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Reads a table written by this module. Non-numeric cells other than the first
/// column are rejected.
pub fn read_csv<R: Read>(input: R) -> Result<CsvTable> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(i, f)| {
                if f.is_empty() {
                    Ok(None)
                } else if i == 0 && f.starts_with("2^-") {
                    f[3..].parse::<f64>().map(|k| Some(2f64.powf(-k))).map_err(|_| Error::Parse(f.to_string()))
                } else {
                    f.parse::<f64>().map(Some).map_err(|_| Error::Parse(f.to_string()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(CsvTable { headers, rows })
}

pub fn read_csv_file(path: &Path) -> Result<CsvTable> {
    read_csv(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut c = RunConfig::new(Experiment::Exp1 { kappa: 0.5 });
        assert!(c.validate().is_ok());
        c.theta = 0.0;
        assert!(c.validate().is_err());
        c.theta = 0.9;
        c.eta1 = Some(-1.0);
        assert!(c.validate().is_err());
        c.eta1 = None;
        c.scheme = Scheme::Nsz;
        c.degree = 1;
        assert!(c.validate().is_err());
        c.degree = 2;
        c.levels = 20;
        assert!(c.validate().is_err());
    }

    #[test]
    fn uniform_study_csv_round_trip() {
        let mut c = RunConfig::new(Experiment::Exp1 { kappa: 0.5 });
        c.first_level = 1;
        c.levels = 4;
        let recs = run_convergence(&c).unwrap();
        assert_eq!(recs.len(), 4);
        let mut buf = Vec::new();
        write_convergence_csv(&recs, &mut buf).unwrap();
        let t = read_csv(buf.as_slice()).unwrap();
        assert_eq!(t.headers, CONVERGENCE_HEADER);
        assert_eq!(t.rows.len(), 4);
        let n = t.column("Ndofs").unwrap();
        for w in n.windows(2) {
            assert!(w[1].unwrap() > w[0].unwrap());
        }
        let l2 = t.column("L2_error").unwrap();
        for (r, v) in recs.iter().zip(l2) {
            assert!((r.errors.unwrap().l2 - v.unwrap()).abs() <= 1e-11 * v.unwrap());
        }
        // determinism
        let mut buf2 = Vec::new();
        write_convergence_csv(&run_convergence(&c).unwrap(), &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn missing_exact_solution_leaves_error_columns_empty() {
        let mut c = RunConfig::new(Experiment::Exp4);
        c.first_level = 1;
        c.levels = 1;
        let recs = run_convergence(&c).unwrap();
        let mut buf = Vec::new();
        write_convergence_csv(&recs, &mut buf).unwrap();
        let t = read_csv(buf.as_slice()).unwrap();
        assert_eq!(t.column("L2_error").unwrap(), vec![None]);
        assert!(t.column("Eta_global").unwrap()[0].unwrap() > 0.0);
    }

    #[test]
    fn comparison_with_degree_one_leaves_nsz_empty() {
        let mut c = RunConfig::new(Experiment::Exp1 { kappa: 0.5 });
        c.degree = 1;
        c.first_level = 1;
        c.levels = 2;
        let schemes = Scheme::ALL;
        let rows = run_scheme_comparison(&c, &schemes).unwrap();
        assert!(rows.iter().all(|r| r.errors[2].is_none() && r.errors[0].is_some()));
        let mut buf = Vec::new();
        write_comparison_csv(&rows, &schemes, &mut buf).unwrap();
        let t = read_csv(buf.as_slice()).unwrap();
        assert_eq!(t.headers.len(), 3 + 9);
        assert_eq!(t.column("nsz_H2h_error").unwrap(), vec![None, None]);
    }

    #[test]
    fn iteration_table_layout() {
        let t = run_iteration_table(&[0.5], &[1, 2], &[0.0, 1.0], GmresOptions::default()).unwrap();
        assert_eq!(t.counts.len(), 2);
        assert!(t.counts.iter().flatten().all(|&c| c > 0));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let r = read_csv(buf.as_slice()).unwrap();
        assert_eq!(r.headers, vec!["h", "kappa=0.5/eta1=0", "kappa=0.5/eta1=1"]);
        assert_eq!(r.rows[1][0], Some(0.25));
        assert_eq!(t.get(0.5, 1.0, 2), Some(t.counts[1][1]));
    }
}
