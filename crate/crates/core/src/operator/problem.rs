//! Problem data and the experiment catalog.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Point;

/// Symmetric 2x2 matrix given by its upper triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 { xx: 1.0, xy: 0.0, yy: 1.0 };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.xx * self.xx + 2.0 * self.xy * self.xy + self.yy * self.yy
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = 0.5 * self.trace();
        let d = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        m - d
    }

    pub fn scale(&self, s: f64) -> Sym2 {
        Sym2::new(s * self.xx, s * self.xy, s * self.yy)
    }

    /// Frobenius product with a symmetric Hessian `[xx, xy, yy]`.
    pub fn contract(&self, h: [f64; 3]) -> f64 {
        self.xx * h[0] + 2.0 * self.xy * h[1] + self.yy * h[2]
    }

    /// Entry `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.xx,
            (1, 1) => self.yy,
            _ => self.xy,
        }
    }
}

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
/// Hessian-valued field `[xx, xy, yy]`.
pub type HessianField = Arc<dyn Fn(Point) -> [f64; 3] + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(Point) -> Sym2 + Send + Sync>;

/// Exact solution with its first and second derivatives.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarField,
    pub grad: VectorField,
    pub hess: HessianField,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ExactSolution")
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };
    pub const CENTERED: Rect = Rect { x0: -1.0, x1: 1.0, y0: -1.0, y1: 1.0 };

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Coefficient field `A`, source `f` and optionally the exact solution of
/// `A : D^2 u = f` with `u = 0` on the boundary.
#[derive(Clone)]
pub struct ProblemData {
    pub name: String,
    pub domain: Rect,
    pub coefficient: MatrixField,
    pub source: ScalarField,
    pub exact: Option<ExactSolution>,
    /// Quadrature degree override for coefficients not resolved by the mesh.
    pub quad_degree: Option<usize>,
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("has_exact", &self.exact.is_some())
            .field("quad_degree", &self.quad_degree)
            .finish()
    }
}

impl ProblemData {
    pub fn new(
        name: impl Into<String>,
        domain: Rect,
        coefficient: impl Fn(Point) -> Sym2 + Send + Sync + 'static,
        source: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ProblemData {
            name: name.into(),
            domain,
            coefficient: Arc::new(coefficient),
            source: Arc::new(source),
            exact: None,
            quad_degree: None,
        }
    }

    pub fn with_exact(mut self, exact: ExactSolution) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn with_quad_degree(mut self, degree: usize) -> Self {
        self.quad_degree = Some(degree);
        self
    }

    /// Problem `A : D^2 u = A : D^2 u_exact` built from a coefficient and an exact solution.
    pub fn manufactured(
        name: impl Into<String>,
        domain: Rect,
        coefficient: impl Fn(Point) -> Sym2 + Send + Sync + 'static,
        exact: ExactSolution,
    ) -> Self {
        let a: MatrixField = Arc::new(coefficient);
        let h = Arc::clone(&exact.hess);
        let a2 = Arc::clone(&a);
        ProblemData {
            name: name.into(),
            domain,
            coefficient: a,
            source: Arc::new(move |x| a2(x).contract(h(x))),
            exact: Some(exact),
            quad_degree: None,
        }
    }

    /// Same problem with `A` multiplied by `c` (and `f` accordingly).
    pub fn scaled(&self, c: f64) -> Self {
        let a = Arc::clone(&self.coefficient);
        let f = Arc::clone(&self.source);
        ProblemData {
            name: format!("{}*{c}", self.name),
            coefficient: Arc::new(move |x| a(x).scale(c)),
            source: Arc::new(move |x| c * f(x)),
            ..self.clone()
        }
    }

    pub fn quad_degree_for(&self, p: usize) -> usize {
        self.quad_degree.unwrap_or(2 * p + 2)
    }
}

/// `u = x(1-x) y(1-y)` on the unit square with `A = I`.
pub fn poisson_polynomial() -> ProblemData {
    let exact = ExactSolution {
        u: Arc::new(|x: Point| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])),
        grad: Arc::new(|x: Point| {
            [
                (1.0 - 2.0 * x[0]) * x[1] * (1.0 - x[1]),
                x[0] * (1.0 - x[0]) * (1.0 - 2.0 * x[1]),
            ]
        }),
        hess: Arc::new(|x: Point| {
            [
                -2.0 * x[1] * (1.0 - x[1]),
                (1.0 - 2.0 * x[0]) * (1.0 - 2.0 * x[1]),
                -2.0 * x[0] * (1.0 - x[0]),
            ]
        }),
    };
    ProblemData::manufactured("poisson-polynomial", Rect::UNIT, |_| Sym2::IDENTITY, exact)
}

/// Smooth solution `sin(2 pi x) sin(2 pi y)` with `A = [[1, kappa], [kappa, 1]]`.
pub fn exp1(kappa: f64) -> ProblemData {
    let k2 = 2.0 * PI;
    let exact = ExactSolution {
        u: Arc::new(move |x: Point| (k2 * x[0]).sin() * (k2 * x[1]).sin()),
        grad: Arc::new(move |x: Point| {
            [
                k2 * (k2 * x[0]).cos() * (k2 * x[1]).sin(),
                k2 * (k2 * x[0]).sin() * (k2 * x[1]).cos(),
            ]
        }),
        hess: Arc::new(move |x: Point| {
            let ss = (k2 * x[0]).sin() * (k2 * x[1]).sin();
            let cc = (k2 * x[0]).cos() * (k2 * x[1]).cos();
            [-k2 * k2 * ss, k2 * k2 * cc, -k2 * k2 * ss]
        }),
    };
    let mut p = ProblemData::manufactured("exp1", Rect::UNIT, move |_| Sym2::new(1.0, kappa, 1.0), exact);
    // closed form of A : D^2 u
    p.source = Arc::new(move |x: Point| {
        let ss = (k2 * x[0]).sin() * (k2 * x[1]).sin();
        let cc = (k2 * x[0]).cos() * (k2 * x[1]).cos();
        -8.0 * PI * PI * ss + 8.0 * PI * PI * kappa * cc
    });
    p
}

/// Singular solution `r^alpha sin(2 phi) (1-x)(1-y)` of the Poisson problem on the unit square.
pub fn exp2(alpha: f64) -> ProblemData {
    // r^alpha sin(2 phi) = 2 x y r^beta with beta = alpha - 2
    let beta = alpha - 2.0;
    let g = move |x: Point| {
        let s = x[0] * x[0] + x[1] * x[1];
        let (px, py) = (x[0], x[1]);
        let rb = s.powf(0.5 * beta);
        let rb2 = s.powf(0.5 * beta - 1.0);
        let rb4 = s.powf(0.5 * beta - 2.0);
        let val = px * py * rb;
        let gx = py * rb + beta * px * px * py * rb2;
        let gy = px * rb + beta * px * py * py * rb2;
        let gxx = 3.0 * beta * px * py * rb2 + beta * (beta - 2.0) * px.powi(3) * py * rb4;
        let gyy = 3.0 * beta * px * py * rb2 + beta * (beta - 2.0) * px * py.powi(3) * rb4;
        let gxy = (1.0 + beta) * rb + beta * (beta - 2.0) * px * px * py * py * rb4;
        (val, [gx, gy], [gxx, gxy, gyy])
    };
    let exact = ExactSolution {
        u: Arc::new(move |x: Point| 2.0 * g(x).0 * (1.0 - x[0]) * (1.0 - x[1])),
        grad: Arc::new(move |x: Point| {
            let (v, d, _) = g(x);
            let q = (1.0 - x[0]) * (1.0 - x[1]);
            [
                2.0 * (d[0] * q - v * (1.0 - x[1])),
                2.0 * (d[1] * q - v * (1.0 - x[0])),
            ]
        }),
        hess: Arc::new(move |x: Point| {
            let (v, d, h) = g(x);
            let q = (1.0 - x[0]) * (1.0 - x[1]);
            let qx = -(1.0 - x[1]);
            let qy = -(1.0 - x[0]);
            [
                2.0 * (h[0] * q + 2.0 * d[0] * qx),
                2.0 * (h[1] * q + d[0] * qy + d[1] * qx + v),
                2.0 * (h[2] * q + 2.0 * d[1] * qy),
            ]
        }),
    };
    ProblemData::manufactured("exp2", Rect::UNIT, |_| Sym2::IDENTITY, exact)
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Discontinuous coefficient `[[2, sgn(xy)], [sgn(xy), 2]]` on `(-1,1)^2` with
/// `u = x y (1 - e^{1-|x|})(1 - e^{1-|y|})`.
pub fn exp3() -> ProblemData {
    // u = a(x) a(y) with a(t) = t (1 - e^{1-|t|})
    let a = |t: f64| t * (1.0 - (1.0 - t.abs()).exp());
    let da = |t: f64| 1.0 - (1.0 - t.abs()).exp() + t.abs() * (1.0 - t.abs()).exp();
    let dda = |t: f64| sgn(t) * (1.0 - t.abs()).exp() * (2.0 - t.abs());
    let exact = ExactSolution {
        u: Arc::new(move |x: Point| a(x[0]) * a(x[1])),
        grad: Arc::new(move |x: Point| [da(x[0]) * a(x[1]), a(x[0]) * da(x[1])]),
        hess: Arc::new(move |x: Point| {
            [
                dda(x[0]) * a(x[1]),
                da(x[0]) * da(x[1]),
                a(x[0]) * dda(x[1]),
            ]
        }),
    };
    ProblemData::manufactured(
        "exp3",
        Rect::CENTERED,
        |x: Point| Sym2::new(2.0, sgn(x[0] * x[1]), 2.0),
        exact,
    )
}

/// Anisotropic discontinuous coefficient with `f = -1`; no exact solution.
pub fn exp4() -> ProblemData {
    ProblemData::new(
        "exp4",
        Rect::CENTERED,
        |x: Point| {
            let jump = if x[0].powi(3) - x[1] > 0.0 { 1.0 } else { 0.0 };
            Sym2::new(0.02, 0.01, 1.0 + jump)
        },
        |_| -1.0,
    )
    .with_quad_degree(20)
}

/// Catalog key with its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Experiment {
    Exp1 { kappa: f64 },
    Exp2 { alpha: f64 },
    Exp3,
    Exp4,
    /// Poisson problem with a polynomial solution in `P_4`.
    Poly,
}

impl Experiment {
    pub fn problem(&self) -> ProblemData {
        match *self {
            Experiment::Exp1 { kappa } => exp1(kappa),
            Experiment::Exp2 { alpha } => exp2(alpha),
            Experiment::Exp3 => exp3(),
            Experiment::Exp4 => exp4(),
            Experiment::Poly => poisson_polynomial(),
        }
    }

    pub fn key(&self) -> &'static str {
        match self {
            Experiment::Exp1 { .. } => "exp1",
            Experiment::Exp2 { .. } => "exp2",
            Experiment::Exp3 => "exp3",
            Experiment::Exp4 => "exp4",
            Experiment::Poly => "poly",
        }
    }

    pub fn with_parameters(key: &str, kappa: f64, alpha: f64) -> Result<Self> {
        let e = key.parse::<Experiment>()?;
        Ok(match e {
            Experiment::Exp1 { .. } => {
                if !(kappa > -1.0 && kappa < 1.0) {
                    return Err(Error::InvalidArgument(format!("kappa must lie in (-1, 1), got {kappa}")));
                }
                Experiment::Exp1 { kappa }
            }
            Experiment::Exp2 { .. } => {
                if alpha <= 1.0 {
                    return Err(Error::InvalidArgument(format!("alpha must exceed 1, got {alpha}")));
                }
                Experiment::Exp2 { alpha }
            }
            other => other,
        })
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp1" => Ok(Experiment::Exp1 { kappa: 0.5 }),
            "exp2" => Ok(Experiment::Exp2 { alpha: 1.5 }),
            "exp3" => Ok(Experiment::Exp3),
            "exp4" => Ok(Experiment::Exp4),
            "poly" => Ok(Experiment::Poly),
            _ => Err(Error::InvalidArgument(format!("unknown experiment '{s}'"))),
        }
    }
}
