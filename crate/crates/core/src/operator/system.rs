//! Matrix-free operator of the recovery scheme and its preconditioner.
//!
//! With `L = C_11 + C_22` the discrete problem reads
//! `L^T M^{-1} (sum_ij B_ij M^{-1} C_ij) u + S u = L^T M^{-1} f_W`
//! on the interior dofs of `V_h`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hessian::{assemble_weighted_mass, HessianOperator};
use crate::quadrature::quadrature;
use crate::space::{facet_points_for_degree, CellBasis, Continuity, FacetBasis, FunctionSpace};
use crate::sparse::{CsrMatrix, LuFactor, TripletBuilder};

use super::cordes::normalized;
use super::problem::ProblemData;

/// Weighted mass matrices `(gamma A_ij psi_l, psi_k)`; `B_12` and `B_21` coincide.
pub fn assemble_b(space_w: &FunctionSpace, problem: &ProblemData, quad_degree: usize) -> [[CsrMatrix; 2]; 2] {
    let a = &problem.coefficient;
    let entry = |i: usize, j: usize| assemble_weighted_mass(space_w, quad_degree, |_, x| normalized(&a(x)).get(i, j));
    let b11 = entry(0, 0);
    let b12 = entry(0, 1);
    let b22 = entry(1, 1);
    [[b11, b12.clone()], [b12, b22]]
}

/// Load vector `(gamma f, psi_k)`.
pub fn assemble_load(space_w: &FunctionSpace, problem: &ProblemData, quad_degree: usize) -> Vec<f64> {
    let mesh = space_w.mesh();
    let n = space_w.n_local();
    let tab = space_w.element().tabulate(&quadrature(quad_degree));
    let mut basis = CellBasis::default();
    let mut out = vec![0.0; space_w.n_scalar_dofs()];
    for c in 0..mesh.n_cells() {
        basis.fill(&tab, &mesh.cell_map(c));
        let dofs = space_w.cell_dofs(c);
        for q in 0..basis.n_points() {
            let x = basis.points[q];
            let a = (problem.coefficient)(x);
            let w = basis.weights[q] * super::cordes::gamma(&a) * (problem.source)(x);
            for k in 0..n {
                out[dofs[k]] += w * basis.values[q * n + k];
            }
        }
    }
    out
}

/// Interior-facet penalty
/// `eta1 sum_F h_F^{-1} ([grad u . n], [grad v . n])_F + eta2 sum_F h_F ([D^2 u], [D^2 v])_F`
/// with the jump `[D^2 u] = D^2 u^+ n^+ + D^2 u^- n^-`.
pub fn assemble_stabilization(space_v: &FunctionSpace, eta1: f64, eta2: f64) -> Result<CsrMatrix> {
    if !(eta1 >= 0.0 && eta2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("penalties must be nonnegative, got {eta1}, {eta2}")));
    }
    let nd = space_v.n_scalar_dofs();
    let mut b = TripletBuilder::new(nd, nd);
    if eta1 == 0.0 && eta2 == 0.0 {
        return Ok(b.build());
    }
    let mesh = space_v.mesh();
    let n = space_v.n_local();
    let nq = facet_points_for_degree(2 * space_v.degree());
    let mut fb = FacetBasis::default();
    let mut local = vec![0.0; n * n];
    for f in 0..mesh.n_facets() {
        if mesh.facets()[f].is_boundary() {
            continue;
        }
        space_v.facet_basis(f, nq, &mut fb);
        let h = fb.length;
        for s in &fb.sides {
            for t in &fb.sides {
                local.fill(0.0);
                for q in 0..nq {
                    let w = fb.weights[q];
                    for k in 0..n {
                        let gk = s.grads[q * n + k];
                        let hk = hess_times(s.hess[q * n + k], s.normal);
                        let dk = gk[0] * s.normal[0] + gk[1] * s.normal[1];
                        for l in 0..n {
                            let gl = t.grads[q * n + l];
                            let hl = hess_times(t.hess[q * n + l], t.normal);
                            let dl = gl[0] * t.normal[0] + gl[1] * t.normal[1];
                            local[k * n + l] +=
                                w * (eta1 / h * dk * dl + eta2 * h * (hk[0] * hl[0] + hk[1] * hl[1]));
                        }
                    }
                }
                let (rows, cols) = (space_v.cell_dofs(s.cell), space_v.cell_dofs(t.cell));
                for k in 0..n {
                    for l in 0..n {
                        b.push(rows[k], cols[l], local[k * n + l]);
                    }
                }
            }
        }
    }
    Ok(b.build())
}

fn hess_times(h: [f64; 3], n: [f64; 2]) -> [f64; 2] {
    [h[0] * n[0] + h[1] * n[1], h[1] * n[0] + h[2] * n[1]]
}

/// The assembled pieces of the recovery scheme, applied matrix-free.
#[derive(Debug)]
pub struct SystemOperator {
    hessian: HessianOperator,
    b: [[CsrMatrix; 2]; 2],
    s: CsrMatrix,
    laplace_t: CsrMatrix,
    boundary: Vec<bool>,
    eta1: f64,
    eta2: f64,
}

impl SystemOperator {
    pub fn new(
        space_v: Arc<FunctionSpace>,
        mode: Continuity,
        problem: &ProblemData,
        eta1: f64,
        eta2: f64,
        quad_degree: usize,
    ) -> Result<Self> {
        let boundary = space_v.boundary_mask()?;
        let s = assemble_stabilization(&space_v, eta1, eta2)?;
        let hessian = HessianOperator::new(space_v, mode, quad_degree)?;
        let b = assemble_b(hessian.space_w(), problem, quad_degree);
        let laplace_t = hessian.laplace_matrix().transpose();
        Ok(SystemOperator { hessian, b, s, laplace_t, boundary, eta1, eta2 })
    }

    pub fn hessian(&self) -> &HessianOperator {
        &self.hessian
    }

    pub fn b(&self, i: usize, j: usize) -> &CsrMatrix {
        &self.b[i][j]
    }

    pub fn stabilization(&self) -> &CsrMatrix {
        &self.s
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn penalties(&self) -> (f64, f64) {
        (self.eta1, self.eta2)
    }

    pub fn dim(&self) -> usize {
        self.boundary.len()
    }

    /// `y = A u` with boundary entries of `u` ignored and boundary rows acting as the identity.
    pub fn apply(&self, u: &[f64], y: &mut [f64]) {
        let n = self.dim();
        assert_eq!(u.len(), n);
        assert_eq!(y.len(), n);
        let mut x = u.to_vec();
        for (xi, &b) in x.iter_mut().zip(&self.boundary) {
            if b {
                *xi = 0.0;
            }
        }
        let nw = self.hessian.space_w().n_scalar_dofs();
        let mut z = vec![0.0; nw];
        let mut t = vec![0.0; nw];
        for i in 0..2 {
            for j in 0..2 {
                self.hessian.c(i, j).matvec(&x, &mut t);
                self.hessian.mass_solve(&mut t);
                self.b[i][j].matvec_add(1.0, &t, &mut z);
            }
        }
        self.hessian.mass_solve(&mut z);
        self.laplace_t.matvec(&z, y);
        self.s.matvec_add(1.0, &x, y);
        for i in 0..n {
            if self.boundary[i] {
                y[i] = u[i];
            }
        }
    }

    pub fn apply_vec(&self, u: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; u.len()];
        self.apply(u, &mut y);
        y
    }

    /// `f_V = L^T M^{-1} f_W` with boundary entries set to zero.
    pub fn rhs(&self, f_w: &[f64]) -> Vec<f64> {
        let mut t = f_w.to_vec();
        self.hessian.mass_solve(&mut t);
        let mut y = self.laplace_t.mul_vec(&t);
        for (yi, &b) in y.iter_mut().zip(&self.boundary) {
            if b {
                *yi = 0.0;
            }
        }
        y
    }

    /// Explicit approximation `L^T sum_ij diag(B_ij) diag(M)^{-2} C_ij + S`
    /// with Dirichlet rows and columns replaced by the identity.
    pub fn preconditioner_matrix(&self) -> CsrMatrix {
        let m = self.hessian.mass().diagonal();
        let mut k: Option<CsrMatrix> = None;
        for i in 0..2 {
            for j in 0..2 {
                let d: Vec<f64> = self.b[i][j].diagonal().iter().zip(&m).map(|(b, m)| b / (m * m)).collect();
                let term = self.hessian.c(i, j).scale_rows(&d);
                k = Some(match k {
                    None => term,
                    Some(acc) => acc.add(1.0, &term, 1.0),
                });
            }
        }
        let p = self.laplace_t.matmul(&k.expect("four terms")).add(1.0, &self.s, 1.0);
        p.constrain(&self.boundary)
    }

    pub fn preconditioner(&self) -> Result<LuFactor> {
        LuFactor::new(&self.preconditioner_matrix())
    }
}
