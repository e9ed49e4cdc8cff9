//! Dörfler marking and the solve-estimate-mark-refine loop.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use log::info;

use crate::error::{Error, Result};
use crate::estimate::{error_norms, local_estimator, ErrorNorms, EstimatorField};
use crate::mesh::Mesh;
use crate::operator::ProblemData;
use crate::solve::{solve_problem, SolveOptions};

/// How the bulk criterion sums the indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarkingConvention {
    /// `sum_M eta_T^2 >= theta^2 eta^2`.
    #[default]
    Squared,
    /// `sum_M eta_T >= theta sum_T eta_T`.
    Linear,
}

impl FromStr for MarkingConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(MarkingConvention::Squared),
            "linear" => Ok(MarkingConvention::Linear),
            _ => Err(Error::InvalidArgument(format!("unknown marking convention '{s}'"))),
        }
    }
}

impl fmt::Display for MarkingConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarkingConvention::Squared => "squared",
            MarkingConvention::Linear => "linear",
        })
    }
}

// relative slack for the bulk threshold, so that theta chosen to hit a partial
// sum exactly is not defeated by rounding in theta^2
const BULK_SLACK: f64 = 1e-12;

/// Smallest prefix of the cells sorted by decreasing indicator (ties by cell id)
/// that carries the fraction `theta` of the estimator.
pub fn doerfler_mark(eta: &EstimatorField, theta: f64, convention: MarkingConvention) -> Result<Vec<usize>> {
    if eta.is_empty() {
        return Err(Error::InvalidArgument("empty estimator field".into()));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("theta must lie in (0, 1], got {theta}")));
    }
    let mut order: Vec<usize> = (0..eta.len()).collect();
    order.sort_by(|&a, &b| eta.local[b].total_cmp(&eta.local[a]).then(a.cmp(&b)));
    let weight = |c: usize| match convention {
        MarkingConvention::Squared => eta.local[c] * eta.local[c],
        MarkingConvention::Linear => eta.local[c],
    };
    let total: f64 = order.iter().map(|&c| weight(c)).sum();
    let fraction = match convention {
        MarkingConvention::Squared => theta * theta,
        MarkingConvention::Linear => theta,
    };
    let target = fraction * total * (1.0 - BULK_SLACK);
    let mut marked = Vec::new();
    let mut acc = 0.0;
    for c in order {
        if acc >= target || weight(c) == 0.0 {
            break;
        }
        acc += weight(c);
        marked.push(c);
    }
    Ok(marked)
}

/// Number of dofs of the continuous scalar degree-`p` space on `mesh`.
pub fn count_dofs(mesh: &Mesh, p: usize) -> usize {
    let interior = if p >= 3 { (p - 1) * (p - 2) / 2 } else { 0 };
    mesh.n_vertices() + mesh.n_facets() * (p - 1) + mesh.n_cells() * interior
}

/// Summary of one level of a refinement study.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveRecord {
    pub level: usize,
    pub n_dofs: usize,
    pub n_cells: usize,
    pub h_max: f64,
    pub errors: Option<ErrorNorms>,
    pub eta_global: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Whether the GMRES residual history never increased.
    pub residual_monotone: bool,
}

/// Settings of the adaptive loop.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveOptions {
    pub solve: SolveOptions,
    pub theta: f64,
    pub convention: MarkingConvention,
    /// Stop before solving on a mesh with more dofs than this.
    pub max_dofs: usize,
    pub max_levels: usize,
}

/// History of an adaptive run; on failure the levels solved so far are kept.
#[derive(Debug)]
pub struct AdaptiveRun {
    pub records: Vec<AdaptiveRecord>,
    pub mesh: Mesh,
    pub failure: Option<Error>,
}

/// Solves, estimates, errors and records one level.
pub fn solve_level(problem: &ProblemData, mesh: Arc<Mesh>, opts: &SolveOptions, level: usize) -> Result<(AdaptiveRecord, EstimatorField)> {
    let q = mesh.quality();
    let n_cells = mesh.n_cells();
    let sol = solve_problem(problem, mesh, opts)?;
    let eta = local_estimator(&sol.u, problem, sol.quad_degree);
    let errors = problem.exact.as_ref().map(|e| error_norms(&sol.u, e, sol.quad_degree));
    let rec = AdaptiveRecord {
        level,
        n_dofs: sol.n_dofs(),
        n_cells,
        h_max: q.h_max,
        errors,
        eta_global: eta.global,
        iterations: sol.report.iterations,
        converged: sol.report.converged,
        residual_monotone: sol.report.is_monotone(),
    };
    Ok((rec, eta))
}

/// Adaptive loop starting from `mesh`.
pub fn adaptive_loop(problem: &ProblemData, mesh: Mesh, opts: &AdaptiveOptions) -> AdaptiveRun {
    let mut mesh = mesh;
    let mut records = Vec::new();
    for level in 0..opts.max_levels {
        if count_dofs(&mesh, opts.solve.degree) > opts.max_dofs && level > 0 {
            break;
        }
        let shared = Arc::new(mesh.clone());
        let (rec, eta) = match solve_level(problem, shared, &opts.solve, level) {
            Ok(r) => r,
            Err(e) => return AdaptiveRun { records, mesh, failure: Some(e) },
        };
        info!("level {level}: dofs={} eta={:.4e}", rec.n_dofs, rec.eta_global);
        records.push(rec);
        if level + 1 == opts.max_levels {
            break;
        }
        let marked = match doerfler_mark(&eta, opts.theta, opts.convention) {
            Ok(m) => m,
            Err(e) => return AdaptiveRun { records, mesh, failure: Some(e) },
        };
        if marked.is_empty() {
            break;
        }
        mesh = match mesh.bisect(&marked) {
            Ok(m) => m,
            Err(e) => return AdaptiveRun { records, mesh, failure: Some(e) },
        };
    }
    AdaptiveRun { records, mesh, failure: None }
}
