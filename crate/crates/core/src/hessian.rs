//! Finite element Hessian recovery.
//!
//! For `u` in the continuous space `V_h` the recovered Hessian `H_h(u)` in
//! `W_h` solves `M_W h_ij = C_ij u` for each component, where `M_W` is the
//! mass matrix of the scalar space `W_h` and `C_ij` realizes a discrete
//! integration by parts:
//!
//! * continuous `W_h`: `(C_ij)_kl = -(d_i phi_l, d_j psi_k) + <d_i phi_l, psi_k n_j>_boundary`
//! * discontinuous `W_h`: broken volume term plus `sum_F <{d_i phi_l}, [psi_k]_j>_F`
//!   over all facets, with the one-sided trace on the boundary.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::quadrature;
use crate::space::{CellBasis, Continuity, FacetBasis, FeFunction, FunctionSpace, ValueShape};
use crate::sparse::{CsrMatrix, SpdFactor, TripletBuilder};

/// Mass matrix `(psi_l, psi_k)` of a scalar space.
pub fn assemble_mass(space: &FunctionSpace, quad_degree: usize) -> CsrMatrix {
    assemble_weighted_mass(space, quad_degree, |_, _| 1.0)
}

/// Weighted mass matrix `(w psi_l, psi_k)`; the weight gets the cell index and physical point.
pub fn assemble_weighted_mass(
    space: &FunctionSpace,
    quad_degree: usize,
    weight: impl Fn(usize, [f64; 2]) -> f64,
) -> CsrMatrix {
    let mesh = space.mesh();
    let n = space.n_local();
    let nd = space.n_scalar_dofs();
    let tab = space.element().tabulate(&quadrature(quad_degree));
    let mut basis = CellBasis::default();
    let mut b = TripletBuilder::with_capacity(nd, nd, mesh.n_cells() * n * n);
    let mut local = vec![0.0; n * n];
    for c in 0..mesh.n_cells() {
        basis.fill(&tab, &mesh.cell_map(c));
        local.fill(0.0);
        for q in 0..basis.n_points() {
            let w = basis.weights[q] * weight(c, basis.points[q]);
            if w == 0.0 {
                continue;
            }
            let v = &basis.values[q * n..(q + 1) * n];
            for k in 0..n {
                let wk = w * v[k];
                for l in 0..n {
                    local[k * n + l] += wk * v[l];
                }
            }
        }
        let dofs = space.cell_dofs(c);
        for k in 0..n {
            for l in 0..n {
                b.push(dofs[k], dofs[l], local[k * n + l]);
            }
        }
    }
    b.build()
}

fn facet_points(p: usize) -> usize {
    p + 2
}

/// Mixed stiffness matrices `C_ij` (rows: W dofs, columns: V dofs) for a
/// continuous `W_h`.
pub fn assemble_c_cg(space_v: &FunctionSpace, space_w: &FunctionSpace, quad_degree: usize) -> Result<[[CsrMatrix; 2]; 2]> {
    check_pair(space_v, space_w, Continuity::Cg)?;
    let mesh = space_v.mesh();
    let n = space_v.n_local();
    let (nw, nv) = (space_w.n_scalar_dofs(), space_v.n_scalar_dofs());
    let tab = space_v.element().tabulate(&quadrature(quad_degree));
    let mut basis = CellBasis::default();
    let mut builders: Vec<TripletBuilder> =
        (0..4).map(|_| TripletBuilder::with_capacity(nw, nv, mesh.n_cells() * n * n)).collect();
    let mut local = vec![0.0; 4 * n * n];
    for c in 0..mesh.n_cells() {
        basis.fill(&tab, &mesh.cell_map(c));
        local.fill(0.0);
        for q in 0..basis.n_points() {
            let w = basis.weights[q];
            let g = &basis.grads[q * n..(q + 1) * n];
            for k in 0..n {
                for l in 0..n {
                    for i in 0..2 {
                        for j in 0..2 {
                            local[((i * 2 + j) * n + k) * n + l] -= w * g[l][i] * g[k][j];
                        }
                    }
                }
            }
        }
        scatter(&mut builders, &local, space_w.cell_dofs(c), space_v.cell_dofs(c), n, 1.0);
    }
    let mut fb = FacetBasis::default();
    let nq = facet_points(space_v.degree());
    for f in 0..mesh.n_facets() {
        if !mesh.facets()[f].is_boundary() {
            continue;
        }
        space_v.facet_basis(f, nq, &mut fb);
        let side = &fb.sides[0];
        local.fill(0.0);
        for q in 0..nq {
            let w = fb.weights[q];
            let v = &side.values[q * n..(q + 1) * n];
            let g = &side.grads[q * n..(q + 1) * n];
            for k in 0..n {
                for l in 0..n {
                    for i in 0..2 {
                        for j in 0..2 {
                            local[((i * 2 + j) * n + k) * n + l] += w * g[l][i] * v[k] * side.normal[j];
                        }
                    }
                }
            }
        }
        scatter(&mut builders, &local, space_w.cell_dofs(side.cell), space_v.cell_dofs(side.cell), n, 1.0);
    }
    Ok(finish(builders))
}

/// Mixed matrices `C_ij` for a discontinuous `W_h`.
pub fn assemble_c_dg(space_v: &FunctionSpace, space_w: &FunctionSpace, quad_degree: usize) -> Result<[[CsrMatrix; 2]; 2]> {
    check_pair(space_v, space_w, Continuity::Dg)?;
    let mesh = space_v.mesh();
    let n = space_v.n_local();
    let (nw, nv) = (space_w.n_scalar_dofs(), space_v.n_scalar_dofs());
    let tab = space_v.element().tabulate(&quadrature(quad_degree));
    let mut basis = CellBasis::default();
    let mut builders: Vec<TripletBuilder> =
        (0..4).map(|_| TripletBuilder::with_capacity(nw, nv, 3 * mesh.n_cells() * n * n)).collect();
    let mut local = vec![0.0; 4 * n * n];
    for c in 0..mesh.n_cells() {
        basis.fill(&tab, &mesh.cell_map(c));
        local.fill(0.0);
        for q in 0..basis.n_points() {
            let w = basis.weights[q];
            let g = &basis.grads[q * n..(q + 1) * n];
            for k in 0..n {
                for l in 0..n {
                    for i in 0..2 {
                        for j in 0..2 {
                            local[((i * 2 + j) * n + k) * n + l] -= w * g[l][i] * g[k][j];
                        }
                    }
                }
            }
        }
        scatter(&mut builders, &local, space_w.cell_dofs(c), space_v.cell_dofs(c), n, 1.0);
    }
    let mut fb = FacetBasis::default();
    let nq = facet_points(space_v.degree());
    for f in 0..mesh.n_facets() {
        space_v.facet_basis(f, nq, &mut fb);
        let avg = if fb.sides.len() == 2 { 0.5 } else { 1.0 };
        // test side s carries psi_k, trial side t carries the gradient of phi_l
        for s in &fb.sides {
            for t in &fb.sides {
                local.fill(0.0);
                for q in 0..nq {
                    let w = fb.weights[q] * avg;
                    let v = &s.values[q * n..(q + 1) * n];
                    let g = &t.grads[q * n..(q + 1) * n];
                    for k in 0..n {
                        for l in 0..n {
                            for i in 0..2 {
                                for j in 0..2 {
                                    local[((i * 2 + j) * n + k) * n + l] += w * g[l][i] * v[k] * s.normal[j];
                                }
                            }
                        }
                    }
                }
                scatter(&mut builders, &local, space_w.cell_dofs(s.cell), space_v.cell_dofs(t.cell), n, 1.0);
            }
        }
    }
    Ok(finish(builders))
}

fn check_pair(space_v: &FunctionSpace, space_w: &FunctionSpace, mode: Continuity) -> Result<()> {
    if space_v.continuity() != Continuity::Cg || space_v.shape() != ValueShape::Scalar {
        return Err(Error::NotContinuous);
    }
    if space_w.continuity() != mode {
        return Err(Error::InvalidArgument(format!("W space must be {mode:?}")));
    }
    if space_w.degree() != space_v.degree() || !Arc::ptr_eq(space_v.mesh(), space_w.mesh()) {
        return Err(Error::InvalidArgument("V and W must share mesh and degree".into()));
    }
    Ok(())
}

fn scatter(builders: &mut [TripletBuilder], local: &[f64], rows: &[usize], cols: &[usize], n: usize, scale: f64) {
    for (ij, b) in builders.iter_mut().enumerate() {
        for k in 0..n {
            for l in 0..n {
                let v = local[(ij * n + k) * n + l];
                if v != 0.0 {
                    b.push(rows[k], cols[l], scale * v);
                }
            }
        }
    }
}

fn finish(builders: Vec<TripletBuilder>) -> [[CsrMatrix; 2]; 2] {
    let mut it = builders.into_iter().map(TripletBuilder::build);
    let c11 = it.next().unwrap();
    let c12 = it.next().unwrap();
    let c21 = it.next().unwrap();
    let c22 = it.next().unwrap();
    [[c11, c12], [c21, c22]]
}

/// Factored `M_W` together with the `C_ij` matrices of one recovery variant.
#[derive(Debug)]
pub struct HessianOperator {
    mode: Continuity,
    space_v: Arc<FunctionSpace>,
    space_w: Arc<FunctionSpace>,
    mass: CsrMatrix,
    mass_factor: SpdFactor,
    c: [[CsrMatrix; 2]; 2],
    quad_degree: usize,
}

impl HessianOperator {
    pub fn new(space_v: Arc<FunctionSpace>, mode: Continuity, quad_degree: usize) -> Result<Self> {
        let space_w = Arc::new(FunctionSpace::new(
            Arc::clone(space_v.mesh()),
            space_v.degree(),
            mode,
            ValueShape::Scalar,
        )?);
        let mass = assemble_mass(&space_w, quad_degree);
        let mass_factor = SpdFactor::new(&mass)?;
        let c = match mode {
            Continuity::Cg => assemble_c_cg(&space_v, &space_w, quad_degree)?,
            Continuity::Dg => assemble_c_dg(&space_v, &space_w, quad_degree)?,
        };
        Ok(HessianOperator {
            mode,
            space_v,
            space_w,
            mass,
            mass_factor,
            c,
            quad_degree,
        })
    }

    pub fn mode(&self) -> Continuity {
        self.mode
    }

    pub fn space_v(&self) -> &Arc<FunctionSpace> {
        &self.space_v
    }

    pub fn space_w(&self) -> &Arc<FunctionSpace> {
        &self.space_w
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn c(&self, i: usize, j: usize) -> &CsrMatrix {
        &self.c[i][j]
    }

    pub fn quad_degree(&self) -> usize {
        self.quad_degree
    }

    /// `M_W^{-1} rhs` in place.
    pub fn mass_solve(&self, rhs: &mut [f64]) {
        self.mass_factor.solve_in_place(rhs);
    }

    /// `C_11 + C_22`, the matrix of the finite element Laplacian before the mass solve.
    pub fn laplace_matrix(&self) -> CsrMatrix {
        self.c[0][0].add(1.0, &self.c[1][1], 1.0)
    }

    /// Coefficients of `h_ij` for a coefficient vector `u` of `V_h`.
    pub fn recover_coeffs(&self, u: &[f64]) -> [[Vec<f64>; 2]; 2] {
        let solve = |i: usize, j: usize| {
            let mut h = self.c[i][j].mul_vec(u);
            self.mass_solve(&mut h);
            h
        };
        [[solve(0, 0), solve(0, 1)], [solve(1, 0), solve(1, 1)]]
    }

    fn check_input(&self, u: &FeFunction) -> Result<()> {
        if !Arc::ptr_eq(&u.space, &self.space_v) && u.space.n_dofs() != self.space_v.n_dofs() {
            return Err(Error::InvalidArgument("function does not live in V_h".into()));
        }
        Ok(())
    }

    /// Recovered Hessian as four scalar functions in `W_h`.
    pub fn recover_hessian(&self, u: &FeFunction) -> Result<[[FeFunction; 2]; 2]> {
        self.check_input(u)?;
        let [[h11, h12], [h21, h22]] = self.recover_coeffs(&u.coeffs);
        let f = |c| FeFunction::new(Arc::clone(&self.space_w), c);
        Ok([[f(h11)?, f(h12)?], [f(h21)?, f(h22)?]])
    }

    /// Finite element Laplacian `L_h(v)`, the trace of the recovered Hessian.
    pub fn fe_laplacian(&self, v: &FeFunction) -> Result<FeFunction> {
        self.check_input(v)?;
        let mut w = self.c[0][0].mul_vec(&v.coeffs);
        self.c[1][1].matvec_add(1.0, &v.coeffs, &mut w);
        self.mass_solve(&mut w);
        FeFunction::new(Arc::clone(&self.space_w), w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rect_mesh, Mesh};

    fn v_space(n: usize, p: usize) -> Arc<FunctionSpace> {
        let m = Arc::new(build_rect_mesh(0.0, 1.0, 0.0, 1.0, n, n).unwrap());
        Arc::new(FunctionSpace::new(m, p, Continuity::Cg, ValueShape::Scalar).unwrap())
    }

    #[test]
    fn p1_mass_on_reference_triangle() {
        let m = Arc::new(Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap());
        let s = FunctionSpace::new(m, 1, Continuity::Cg, ValueShape::Scalar).unwrap();
        let mm = assemble_mass(&s, 2).to_dense();
        let area: f64 = 0.5;
        for (i, row) in mm.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let e = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert!((v - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mass_entry_sum_is_area_and_dg_is_block_diagonal() {
        let v = v_space(3, 2);
        let m = assemble_mass(&v, 6);
        let s: f64 = m.values().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(m.asymmetry() < 1e-15);
        let dg = FunctionSpace::new(v.mesh().clone(), 2, Continuity::Dg, ValueShape::Scalar).unwrap();
        let md = assemble_mass(&dg, 6);
        let n = dg.n_local();
        for i in 0..md.nrows() {
            let (idx, _) = md.row(i);
            assert!(idx.iter().all(|&j| j / n == i / n));
        }
    }

    fn all_components(h: &[[FeFunction; 2]; 2], f: impl Fn(usize, usize, &[f64])) {
        for i in 0..2 {
            for j in 0..2 {
                f(i, j, &h[i][j].coeffs);
            }
        }
    }

    #[test]
    fn quadratics_recovered_exactly() {
        for mode in [Continuity::Cg, Continuity::Dg] {
            for p in [2, 3] {
                let v = v_space(3, p);
                let op = HessianOperator::new(v.clone(), mode, 2 * p + 2).unwrap();
                let h = op.recover_hessian(&v.interpolate(|x| x[0] * x[0])).unwrap();
                all_components(&h, |i, j, c| {
                    let e = if i == 0 && j == 0 { 2.0 } else { 0.0 };
                    assert!(c.iter().all(|v| (v - e).abs() < 1e-10), "{mode:?} p={p} ({i},{j})");
                });
                let h = op.recover_hessian(&v.interpolate(|x| x[0] * x[1])).unwrap();
                all_components(&h, |i, j, c| {
                    let e = if i != j { 1.0 } else { 0.0 };
                    assert!(c.iter().all(|v| (v - e).abs() < 1e-10));
                });
                let c = v.interpolate(|_| 2.5);
                for i in 0..2 {
                    for j in 0..2 {
                        assert!(op.c(i, j).mul_vec(&c.coeffs).iter().all(|v| v.abs() < 1e-12));
                    }
                }
                let lap = op.fe_laplacian(&v.interpolate(|x| x[0] * x[0] + x[1] * x[1])).unwrap();
                assert!(lap.coeffs.iter().all(|v| (v - 4.0).abs() < 1e-10));
                let zero = op.fe_laplacian(&FeFunction::zero(v.clone())).unwrap();
                assert!(zero.coeffs.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn matrix_shapes() {
        let v = v_space(2, 2);
        for mode in [Continuity::Cg, Continuity::Dg] {
            let op = HessianOperator::new(v.clone(), mode, 6).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(op.c(i, j).nrows(), op.space_w().n_dofs());
                    assert_eq!(op.c(i, j).ncols(), v.n_dofs());
                }
            }
            assert!(op.mass().asymmetry() <= 1e-13 * op.mass().max_abs());
        }
    }

    #[test]
    fn trace_of_hessian_matches_laplacian() {
        let v = v_space(3, 3);
        for mode in [Continuity::Cg, Continuity::Dg] {
            let op = HessianOperator::new(v.clone(), mode, 8).unwrap();
            let coeffs: Vec<f64> = (0..v.n_dofs()).map(|i| ((i * 31) % 17) as f64 - 8.0).collect();
            let u = FeFunction::new(v.clone(), coeffs).unwrap();
            let h = op.recover_hessian(&u).unwrap();
            let l = op.fe_laplacian(&u).unwrap();
            for k in 0..l.coeffs.len() {
                let t = h[0][0].coeffs[k] + h[1][1].coeffs[k];
                assert!((t - l.coeffs[k]).abs() < 1e-10 * (1.0 + t.abs()));
            }
        }
    }

    #[test]
    fn rejects_wrong_space_pairs() {
        let v = v_space(1, 2);
        let w = FunctionSpace::new(v.mesh().clone(), 2, Continuity::Dg, ValueShape::Scalar).unwrap();
        assert!(assemble_c_cg(&v, &w, 6).is_err());
        assert!(assemble_c_dg(&w, &w, 6).is_err());
    }
}
