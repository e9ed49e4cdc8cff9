//! Top-level solve for the recovery schemes and the broken Hessian scheme.

pub mod gmres;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::operator::{
    assemble_load, assemble_nsz, cordes_on_mesh, default_penalties, CordesInfo, ProblemData, SystemOperator,
};
use crate::space::{Continuity, FeFunction, FunctionSpace, ValueShape};
use crate::sparse::LuFactor;

pub use gmres::{gmres, GmresOptions, SolveReport};

/// Discretization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Hessian recovery into a continuous space.
    RecoveryCg,
    /// Hessian recovery into a discontinuous space.
    RecoveryDg,
    /// Cellwise exact Hessian with gradient-jump penalty.
    Nsz,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::RecoveryCg, Scheme::RecoveryDg, Scheme::Nsz];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::RecoveryCg => "recovery-cg",
            Scheme::RecoveryDg => "recovery-dg",
            Scheme::Nsz => "nsz",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recovery-cg" | "cg" => Ok(Scheme::RecoveryCg),
            "recovery-dg" | "dg" => Ok(Scheme::RecoveryDg),
            "nsz" => Ok(Scheme::Nsz),
            _ => Err(Error::InvalidArgument(format!("unknown scheme '{s}'"))),
        }
    }
}

/// Discretization and solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub degree: usize,
    pub scheme: Scheme,
    /// Penalties; `None` picks them from the Cordes constant.
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub gmres: GmresOptions,
    /// Overrides the problem's quadrature degree.
    pub quad_degree: Option<usize>,
    pub recover_hessian: bool,
    pub use_preconditioner: bool,
}

impl SolveOptions {
    pub fn new(degree: usize, scheme: Scheme) -> Self {
        SolveOptions {
            degree,
            scheme,
            eta1: None,
            eta2: None,
            gmres: GmresOptions::default(),
            quad_degree: None,
            recover_hessian: false,
            use_preconditioner: true,
        }
    }

    pub fn penalties(mut self, eta1: f64, eta2: f64) -> Self {
        self.eta1 = Some(eta1);
        self.eta2 = Some(eta2);
        self
    }
}

/// Discrete solution with diagnostics.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: FeFunction,
    /// Recovered Hessian `h_ij` (recovery schemes, on request).
    pub hessian: Option<[[FeFunction; 2]; 2]>,
    pub report: SolveReport,
    pub cordes: CordesInfo,
    pub eta1: f64,
    pub eta2: f64,
    pub quad_degree: usize,
}

impl Solution {
    pub fn n_dofs(&self) -> usize {
        self.u.space.n_dofs()
    }
}

/// Assembles and solves `A : D^2 u = f`, `u = 0` on the boundary, on `mesh`.
/// Non-convergence of GMRES is not an error; check `report.converged`.
pub fn solve_problem(problem: &ProblemData, mesh: Arc<Mesh>, opts: &SolveOptions) -> Result<Solution> {
    let p = opts.degree;
    if p == 0 {
        return Err(Error::InvalidArgument("degree must be at least 1".into()));
    }
    if opts.scheme == Scheme::Nsz && p < 2 {
        return Err(Error::InvalidArgument("the broken Hessian scheme needs degree >= 2".into()));
    }
    if p == 1 && opts.scheme != Scheme::Nsz {
        warn!("degree 1: the recovered Hessian is only piecewise linear and convergence in H2_h is not expected");
    }
    let qd = opts.quad_degree.unwrap_or_else(|| problem.quad_degree_for(p));
    let cordes = cordes_on_mesh(problem, &mesh, qd)?;
    let (d1, d2) = default_penalties(cordes.epsilon);
    let eta1 = opts.eta1.unwrap_or(d1);
    let eta2 = opts.eta2.unwrap_or(d2);
    let space = Arc::new(FunctionSpace::new(mesh, p, Continuity::Cg, ValueShape::Scalar)?);
    let n = space.n_dofs();
    debug!("{} p={p} dofs={n} eps={:.4} eta=({eta1},{eta2})", opts.scheme, cordes.epsilon);

    let (coeffs, report, hessian) = match opts.scheme {
        Scheme::Nsz => {
            let (a, rhs) = assemble_nsz(&space, problem, eta1, qd)?;
            let mut x = rhs.clone();
            LuFactor::new(&a)?.solve_in_place(&mut x);
            let ax = a.mul_vec(&x);
            let res = ax.iter().zip(&rhs).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let report = SolveReport {
                iterations: 0,
                residual_history: Vec::new(),
                converged: res.is_finite(),
                final_true_residual: res,
                breakdown: false,
            };
            (x, report, None)
        }
        Scheme::RecoveryCg | Scheme::RecoveryDg => {
            let mode = if opts.scheme == Scheme::RecoveryCg { Continuity::Cg } else { Continuity::Dg };
            let op = SystemOperator::new(Arc::clone(&space), mode, problem, eta1, eta2, qd)?;
            let fw = assemble_load(op.hessian().space_w(), problem, qd);
            let b = op.rhs(&fw);
            let apply = |u: &[f64], y: &mut [f64]| op.apply(u, y);
            let (x, report) = if opts.use_preconditioner {
                let pre = op.preconditioner()?;
                let pc = |v: &mut [f64]| pre.solve_in_place(v);
                gmres(apply, &b, Some(&pc), &opts.gmres)
            } else {
                gmres(apply, &b, None, &opts.gmres)
            };
            if !report.converged {
                warn!(
                    "GMRES stopped after {} iterations with residual {:.3e}",
                    report.iterations,
                    report.residual_history.last().copied().unwrap_or(f64::NAN)
                );
            }
            let mut x = x;
            for (xi, &bd) in x.iter_mut().zip(op.boundary_mask()) {
                if bd {
                    *xi = 0.0;
                }
            }
            let hessian = if opts.recover_hessian {
                let u = FeFunction::new(Arc::clone(&space), x.clone())?;
                Some(op.hessian().recover_hessian(&u)?)
            } else {
                None
            };
            (x, report, hessian)
        }
    };
    let mut coeffs = coeffs;
    for (ci, bd) in coeffs.iter_mut().zip(space.boundary_mask()?) {
        if bd {
            *ci = 0.0;
        }
    }
    Ok(Solution {
        u: FeFunction::new(space, coeffs)?,
        hessian,
        report,
        cordes,
        eta1,
        eta2,
        quad_degree: qd,
    })
}
