//! Error norms against exact solutions and the residual a posteriori estimator.

use crate::error::{Error, Result};
use crate::operator::cordes::gamma;
use crate::operator::{ExactSolution, ProblemData};
use crate::quadrature::quadrature;
use crate::space::{facet_points_for_degree, CellBasis, FacetBasis, FeFunction, PointValues};

/// Squared jump of the normal derivative on every interior facet, integrated and
/// scaled by `1 / h_F`; zero on boundary facets.
pub fn facet_jump_terms(u_h: &FeFunction) -> Vec<f64> {
    let space = &u_h.space;
    let mesh = space.mesh();
    let nq = facet_points_for_degree(2 * space.degree());
    let mut fb = FacetBasis::default();
    let mut vals = [PointValues::default(), PointValues::default()];
    let mut out = vec![0.0; mesh.n_facets()];
    for (f, o) in out.iter_mut().enumerate() {
        if mesh.facets()[f].is_boundary() {
            continue;
        }
        space.facet_basis(f, nq, &mut fb);
        for (side, v) in fb.sides.iter().zip(vals.iter_mut()) {
            u_h.eval_facet_side(side, nq, 0, v);
        }
        let (n0, n1) = (fb.sides[0].normal, fb.sides[1].normal);
        let mut s = 0.0;
        for q in 0..nq {
            let g0 = vals[0].grads[q];
            let g1 = vals[1].grads[q];
            let j = g0[0] * n0[0] + g0[1] * n0[1] + g1[0] * n1[0] + g1[1] * n1[1];
            s += fb.weights[q] * j * j;
        }
        *o = s / fb.length;
    }
    out
}

/// `L2`, full `H1` and broken `H2_h` norms of `u - u_h`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1: f64,
    /// Broken Hessian norm plus `sum_F h_F^{-1} |[grad u_h . n]|^2` over interior facets.
    pub h2h: f64,
}

/// Per-cell squared error contributions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellErrors {
    pub l2_sq: Vec<f64>,
    pub grad_sq: Vec<f64>,
    pub hess_sq: Vec<f64>,
}

// singular points of the exact derivatives are skipped inside this radius
const SINGULAR_RADIUS: f64 = 1e-12;

fn cell_errors(u_h: &FeFunction, exact: &ExactSolution, quad_degree: usize) -> CellErrors {
    let space = &u_h.space;
    let mesh = space.mesh();
    let tab = space.element().tabulate(&quadrature(quad_degree));
    let mut basis = CellBasis::default();
    let mut pv = PointValues::default();
    let nc = mesh.n_cells();
    let mut out = CellErrors { l2_sq: vec![0.0; nc], grad_sq: vec![0.0; nc], hess_sq: vec![0.0; nc] };
    for c in 0..nc {
        basis.fill(&tab, &mesh.cell_map(c));
        u_h.eval_cell(c, &basis, 0, &mut pv);
        for q in 0..basis.n_points() {
            let x = basis.points[q];
            let w = basis.weights[q];
            let e = (exact.u)(x) - pv.values[q];
            out.l2_sq[c] += w * e * e;
            if x[0].hypot(x[1]) < SINGULAR_RADIUS {
                continue;
            }
            let g = (exact.grad)(x);
            let (gx, gy) = (g[0] - pv.grads[q][0], g[1] - pv.grads[q][1]);
            out.grad_sq[c] += w * (gx * gx + gy * gy);
            let h = (exact.hess)(x);
            let d = [h[0] - pv.hess[q][0], h[1] - pv.hess[q][1], h[2] - pv.hess[q][2]];
            out.hess_sq[c] += w * (d[0] * d[0] + 2.0 * d[1] * d[1] + d[2] * d[2]);
        }
    }
    out
}

/// Global error norms.
pub fn error_norms(u_h: &FeFunction, exact: &ExactSolution, quad_degree: usize) -> ErrorNorms {
    let ce = cell_errors(u_h, exact, quad_degree);
    let l2 = ce.l2_sq.iter().sum::<f64>();
    let g = ce.grad_sq.iter().sum::<f64>();
    let h = ce.hess_sq.iter().sum::<f64>();
    let j = facet_jump_terms(u_h).iter().sum::<f64>();
    ErrorNorms { l2: l2.sqrt(), h1: (l2 + g).sqrt(), h2h: (h + j).sqrt() }
}

/// Per-cell `H2_h` errors: the Hessian error on `T` plus the jump terms of the
/// interior facets of `T` (each facet counted for both neighbours).
pub fn local_h2h_errors(u_h: &FeFunction, exact: &ExactSolution, quad_degree: usize) -> Vec<f64> {
    let ce = cell_errors(u_h, exact, quad_degree);
    let jumps = facet_jump_terms(u_h);
    let mesh = u_h.space.mesh();
    (0..mesh.n_cells())
        .map(|c| {
            let j: f64 = mesh.cell_facets(c).iter().map(|&f| jumps[f]).sum();
            (ce.hess_sq[c] + j).sqrt()
        })
        .collect()
}

/// Per-cell indicators `eta_T` and `eta = (sum eta_T^2)^{1/2}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimatorField {
    pub local: Vec<f64>,
    pub global: f64,
}

impl EstimatorField {
    pub fn from_local(local: Vec<f64>) -> Self {
        let global = local.iter().map(|e| e * e).sum::<f64>().sqrt();
        EstimatorField { local, global }
    }

    pub fn len(&self) -> usize {
        self.local.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local.is_empty()
    }
}

/// `eta_T^2 = |gamma (f - A : D^2 u_h)|_T^2 + sum_{F in T, interior} h_F^{-1} |[grad u_h . n]|_F^2`.
pub fn local_estimator(u_h: &FeFunction, problem: &ProblemData, quad_degree: usize) -> EstimatorField {
    let space = &u_h.space;
    let mesh = space.mesh();
    let tab = space.element().tabulate(&quadrature(quad_degree));
    let mut basis = CellBasis::default();
    let mut pv = PointValues::default();
    let jumps = facet_jump_terms(u_h);
    let local = (0..mesh.n_cells())
        .map(|c| {
            basis.fill(&tab, &mesh.cell_map(c));
            u_h.eval_cell(c, &basis, 0, &mut pv);
            let mut r = 0.0;
            for q in 0..basis.n_points() {
                let x = basis.points[q];
                let a = (problem.coefficient)(x);
                let res = gamma(&a) * ((problem.source)(x) - a.contract(pv.hess[q]));
                r += basis.weights[q] * res * res;
            }
            let j: f64 = mesh.cell_facets(c).iter().map(|&f| jumps[f]).sum();
            (r + j).sqrt()
        })
        .collect();
    EstimatorField::from_local(local)
}

/// Experimental orders `log(e_k / e_{k+1}) / log(h_k / h_{k+1})`.
pub fn eoc(h: &[f64], errors: &[f64]) -> Result<Vec<f64>> {
    if h.len() != errors.len() || h.len() < 2 {
        return Err(Error::InvalidArgument("need at least two matching (h, error) pairs".into()));
    }
    if h.iter().chain(errors).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("mesh sizes and errors must be positive".into()));
    }
    Ok((0..h.len() - 1)
        .map(|k| (errors[k] / errors[k + 1]).ln() / (h[k] / h[k + 1]).ln())
        .collect())
}

/// Orders with respect to `h ~ N^{-1/2}` from dof counts.
pub fn eoc_dofs(dofs: &[usize], errors: &[f64]) -> Result<Vec<f64>> {
    let h: Vec<f64> = dofs.iter().map(|&n| (n as f64).powf(-0.5)).collect();
    eoc(&h, errors)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("need at least two matching points".into()));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("values must be positive".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("x values must not all coincide".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rect_mesh;
    use crate::operator::problem::{exp1, poisson_polynomial, Rect, Sym2};
    use crate::space::{Continuity, FunctionSpace, ValueShape};
    use std::sync::Arc;

    fn unit_space(n: usize, p: usize) -> Arc<FunctionSpace> {
        let m = Arc::new(build_rect_mesh(0.0, 1.0, 0.0, 1.0, n, n).unwrap());
        Arc::new(FunctionSpace::new(m, p, Continuity::Cg, ValueShape::Scalar).unwrap())
    }

    #[test]
    fn interpolant_in_space_has_zero_error() {
        let p = poisson_polynomial();
        let e = p.exact.as_ref().unwrap();
        let v = unit_space(3, 4);
        let u = v.interpolate(|x| (e.u)(x));
        let n = error_norms(&u, e, 10);
        assert!(n.l2 < 1e-10 && n.h1 < 1e-10 && n.h2h < 1e-10, "{n:?}");
        let eta = local_estimator(&u, &p, 10);
        assert!(eta.global < 1e-8);
    }

    #[test]
    fn zero_function_against_exp1() {
        let p = exp1(0.5);
        let v = unit_space(4, 2);
        let n = error_norms(&FeFunction::zero(v), p.exact.as_ref().unwrap(), 12);
        assert!((n.l2 - 0.5).abs() < 1e-6, "{}", n.l2);
        // |grad u|^2 integrates to 2 pi^2, |D^2 u|^2 to (2 pi)^4
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((n.h1 - (0.25 + 2.0 * pi2).sqrt()).abs() < 1e-5);
        assert!((n.h2h - (16.0 * pi2 * pi2).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn kink_has_jump_and_smooth_function_does_not() {
        let v = unit_space(4, 2);
        let smooth = v.interpolate(|x| x[0] * x[0] + x[0] * x[1]);
        assert!(facet_jump_terms(&smooth).iter().all(|&j| j.abs() < 1e-20));
        let kink = v.interpolate(|x| (x[0] - 0.5).abs());
        let total: f64 = facet_jump_terms(&kink).iter().sum();
        // |[d_n u]| = 2 on the line x = 1/2 of length 1, h_F = 1/4
        assert!((total - 4.0 * 4.0).abs() < 1e-10, "{total}");
    }

    #[test]
    fn constant_residual_estimator() {
        let v = unit_space(3, 2);
        let p = ProblemData::new("one", Rect::UNIT, |_| Sym2::IDENTITY, |_| 1.0);
        let eta = local_estimator(&FeFunction::zero(Arc::clone(&v)), &p, 4);
        for (c, e) in eta.local.iter().enumerate() {
            assert!((e * e - v.mesh().cell_area(c)).abs() < 1e-14);
        }
        let s: f64 = eta.local.iter().map(|e| e * e).sum();
        assert!((eta.global * eta.global - s).abs() < 1e-12 * s);
    }

    #[test]
    fn local_errors_sum_bounds_global() {
        let p = exp1(0.5);
        let e = p.exact.as_ref().unwrap();
        let v = unit_space(4, 2);
        let u = v.interpolate(|x| (e.u)(x));
        let loc = local_h2h_errors(&u, e, 6);
        let g = error_norms(&u, e, 6).h2h;
        let s: f64 = loc.iter().map(|x| x * x).sum();
        // interior jumps counted twice locally
        assert!(s >= g * g - 1e-12 && s <= 2.0 * g * g + 1e-12);
    }

    #[test]
    fn eoc_examples() {
        assert!((eoc(&[1.0, 0.5], &[1.0, 0.25]).unwrap()[0] - 2.0).abs() < 1e-14);
        assert!((eoc(&[1.0, 0.5], &[1.0, 0.125]).unwrap()[0] - 3.0).abs() < 1e-14);
        assert_eq!(eoc(&[1.0, 0.5], &[0.3, 0.3]).unwrap()[0], 0.0);
        assert!(eoc(&[1.0], &[1.0]).is_err());
        assert!(eoc(&[1.0, 0.5], &[0.0, 1.0]).is_err());
        assert!((eoc_dofs(&[100, 400], &[1.0, 0.25]).unwrap()[0] - 2.0).abs() < 1e-12);
        assert!((loglog_slope(&[1.0, 2.0, 4.0], &[1.0, 0.5, 0.25]).unwrap() + 1.0).abs() < 1e-14);
    }
}
