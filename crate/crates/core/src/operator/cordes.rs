//! Cordes condition and the normalization coefficient `gamma = tr(A) / |A|_F^2`.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::quadrature::quadrature;

use super::problem::{ProblemData, Sym2};

/// Pointwise normalization coefficient.
pub fn gamma(a: &Sym2) -> f64 {
    a.trace() / a.frobenius_sq()
}

/// `gamma(x) A(x)`.
pub fn normalized(a: &Sym2) -> Sym2 {
    a.scale(gamma(a))
}

/// Result of sampling the Cordes condition `|A|_F^2 / tr(A)^2 <= 1 / (1 + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CordesInfo {
    /// Largest admissible `eps` in `(0, 1]` over the samples.
    pub epsilon: f64,
    /// Largest ratio `|A|_F^2 / tr(A)^2` and where it occurs.
    pub max_ratio: f64,
    pub worst_point: Point,
    /// Smallest sampled eigenvalue of `A`.
    pub min_eigenvalue: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub n_samples: usize,
}

/// Samples `A` at `points`, checks ellipticity and the Cordes condition.
pub fn cordes_analyze(problem: &ProblemData, points: &[Point]) -> Result<CordesInfo> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("no sample points".into()));
    }
    let mut info = CordesInfo {
        epsilon: 1.0,
        max_ratio: f64::NEG_INFINITY,
        worst_point: points[0],
        min_eigenvalue: f64::INFINITY,
        gamma_min: f64::INFINITY,
        gamma_max: f64::NEG_INFINITY,
        n_samples: points.len(),
    };
    for &x in points {
        let a = (problem.coefficient)(x);
        // in 2D the ratio reaches 1 exactly when det(A) <= 0
        let ratio = a.frobenius_sq() / (a.trace() * a.trace());
        if !(ratio < 1.0) {
            return Err(Error::CordesViolated { x: x[0], y: x[1], ratio });
        }
        let lam = a.min_eigenvalue();
        if !(lam > 0.0) {
            return Err(Error::NotElliptic { x: x[0], y: x[1], eigenvalue: lam });
        }
        info.min_eigenvalue = info.min_eigenvalue.min(lam);
        if ratio > info.max_ratio {
            info.max_ratio = ratio;
            info.worst_point = x;
        }
        let g = gamma(&a);
        info.gamma_min = info.gamma_min.min(g);
        info.gamma_max = info.gamma_max.max(g);
    }
    info.epsilon = (1.0 / info.max_ratio - 1.0).min(1.0);
    Ok(info)
}

/// Physical quadrature points of every cell.
pub fn quadrature_points(mesh: &Mesh, degree: usize) -> Vec<Point> {
    let rule = quadrature(degree);
    let mut out = Vec::with_capacity(mesh.n_cells() * rule.len());
    for c in 0..mesh.n_cells() {
        let map = mesh.cell_map(c);
        out.extend(rule.points.iter().map(|&xi| map.to_physical(xi)));
    }
    out
}

/// Cordes analysis at the quadrature points of `mesh`.
pub fn cordes_on_mesh(problem: &ProblemData, mesh: &Mesh, degree: usize) -> Result<CordesInfo> {
    cordes_analyze(problem, &quadrature_points(mesh, degree))
}

/// Penalties used when none are given: no stabilization for `eps >= 0.5`,
/// otherwise `eta1 = 1`, `eta2 = 0`.
pub fn default_penalties(epsilon: f64) -> (f64, f64) {
    if epsilon >= 0.5 {
        (0.0, 0.0)
    } else {
        (1.0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rect_mesh;
    use crate::operator::problem::{exp1, exp3, exp4, Rect};

    fn constant(a: Sym2) -> ProblemData {
        ProblemData::new("const", Rect::UNIT, move |_| a, |_| 0.0)
    }

    fn check(a: Sym2, eps: f64, g: f64) {
        let info = cordes_analyze(&constant(a), &[[0.5, 0.5]]).unwrap();
        assert!((info.epsilon - eps).abs() < 1e-12, "{a:?}: {}", info.epsilon);
        assert!((info.gamma_min - g).abs() < 1e-15);
    }

    #[test]
    fn hand_computed_values() {
        check(Sym2::IDENTITY, 1.0, 1.0);
        check(Sym2::new(1.0, 0.5, 1.0), 0.6, 0.8);
        check(Sym2::new(2.0, 1.0, 2.0), 0.6, 0.4);
    }

    #[test]
    fn violations_are_reported() {
        let r = cordes_analyze(&constant(Sym2::new(1.0, 1.0, 1.0)), &[[0.1, 0.2]]);
        assert!(matches!(r, Err(Error::CordesViolated { .. })));
        let r = cordes_analyze(&constant(Sym2::new(1.0, 2.0, 1.0)), &[[0.1, 0.2]]);
        assert!(matches!(r, Err(Error::CordesViolated { ratio, .. }) if ratio > 1.0));
        let r = cordes_analyze(&constant(Sym2::new(-1.0, 0.0, -1.0)), &[[0.1, 0.2]]);
        assert!(matches!(r, Err(Error::NotElliptic { .. })));
        assert!(cordes_analyze(&constant(Sym2::IDENTITY), &[]).is_err());
    }

    #[test]
    fn scaling_invariance() {
        let p = exp1(0.7);
        let mesh = build_rect_mesh(0.0, 1.0, 0.0, 1.0, 3, 3).unwrap();
        let a = cordes_on_mesh(&p, &mesh, 4).unwrap();
        let b = cordes_on_mesh(&p.scaled(3.5), &mesh, 4).unwrap();
        assert!((a.epsilon - b.epsilon).abs() < 1e-14);
        assert!((a.gamma_min / 3.5 - b.gamma_min).abs() < 1e-14);
        let x = [0.3, 0.4];
        let n1 = normalized(&(p.coefficient)(x));
        let n2 = normalized(&(p.coefficient)(x).scale(3.5));
        assert!((n1.xx - n2.xx).abs() < 1e-15 && (n1.xy - n2.xy).abs() < 1e-15);
    }

    #[test]
    fn normalized_matrix_close_to_identity() {
        let mesh = build_rect_mesh(-1.0, 1.0, -1.0, 1.0, 8, 8).unwrap();
        for p in [exp1(0.5), exp1(0.99), exp3(), exp4()] {
            let pts = quadrature_points(&mesh, 6);
            let info = cordes_analyze(&p, &pts).unwrap();
            for &x in &pts {
                let g = normalized(&(p.coefficient)(x));
                let d = Sym2::new(g.xx - 1.0, g.xy, g.yy - 1.0).frobenius_sq().sqrt();
                assert!(d <= (1.0 - info.epsilon).sqrt() + 1e-12, "{}", p.name);
            }
        }
    }

    #[test]
    fn exp3_and_exp4_epsilon() {
        let mesh = build_rect_mesh(-1.0, 1.0, -1.0, 1.0, 4, 4).unwrap();
        let info = cordes_on_mesh(&exp3(), &mesh, 6).unwrap();
        assert!((info.epsilon - 0.6).abs() < 1e-12);
        assert!((info.gamma_min - 0.4).abs() < 1e-15 && (info.gamma_max - 0.4).abs() < 1e-15);
        let info = cordes_on_mesh(&exp4(), &mesh, 6).unwrap();
        // A22 = 2 gives the smallest eps: 1/ratio - 1 with ratio = 4.0006 / 4.0804
        assert!((info.epsilon - (4.0804 / 4.0006 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn penalty_defaults() {
        assert_eq!(default_penalties(0.6), (0.0, 0.0));
        assert_eq!(default_penalties(0.02), (1.0, 0.0));
    }
}
