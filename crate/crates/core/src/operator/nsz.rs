//! Scheme with the cellwise exact Hessian, tested against the broken Laplacian:
//! `(gamma A : D_h^2 u, Delta_h v) + eta1 sum_F h_F^{-1} ([grad u . n], [grad v . n])_F = (gamma f, Delta_h v)`.

use crate::error::{Error, Result};
use crate::quadrature::quadrature;
use crate::space::{CellBasis, FunctionSpace};
use crate::sparse::{CsrMatrix, TripletBuilder};

use super::cordes::normalized;
use super::problem::ProblemData;
use super::system::assemble_stabilization;

/// Constrained system matrix and right-hand side (boundary rows are identity rows with zero data).
pub fn assemble_nsz(
    space_v: &FunctionSpace,
    problem: &ProblemData,
    eta1: f64,
    quad_degree: usize,
) -> Result<(CsrMatrix, Vec<f64>)> {
    if eta1 <= 0.0 {
        return Err(Error::ZeroPenalty);
    }
    if space_v.degree() < 2 {
        return Err(Error::InvalidArgument("the broken Hessian scheme needs degree >= 2".into()));
    }
    let mask = space_v.boundary_mask()?;
    let mesh = space_v.mesh();
    let n = space_v.n_local();
    let nd = space_v.n_scalar_dofs();
    let tab = space_v.element().tabulate(&quadrature(quad_degree));
    let mut basis = CellBasis::default();
    let mut b = TripletBuilder::with_capacity(nd, nd, mesh.n_cells() * n * n);
    let mut rhs = vec![0.0; nd];
    let mut local = vec![0.0; n * n];
    let mut lap = vec![0.0; n];
    let mut op = vec![0.0; n];
    for c in 0..mesh.n_cells() {
        basis.fill(&tab, &mesh.cell_map(c));
        local.fill(0.0);
        let dofs = space_v.cell_dofs(c);
        for q in 0..basis.n_points() {
            let x = basis.points[q];
            let a = (problem.coefficient)(x);
            let ga = normalized(&a);
            let gf = super::cordes::gamma(&a) * (problem.source)(x);
            let w = basis.weights[q];
            for i in 0..n {
                let h = basis.hess[q * n + i];
                lap[i] = h[0] + h[2];
                op[i] = ga.contract(h);
            }
            for k in 0..n {
                let wk = w * lap[k];
                rhs[dofs[k]] += wk * gf;
                for l in 0..n {
                    local[k * n + l] += wk * op[l];
                }
            }
        }
        for k in 0..n {
            for l in 0..n {
                b.push(dofs[k], dofs[l], local[k * n + l]);
            }
        }
    }
    let s = assemble_stabilization(space_v, eta1, 0.0)?;
    let matrix = b.build().add(1.0, &s, 1.0).constrain(&mask);
    for (r, &m) in rhs.iter_mut().zip(&mask) {
        if m {
            *r = 0.0;
        }
    }
    Ok((matrix, rhs))
}
