//! Lagrange finite element spaces on triangular meshes.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::{CellMap, Mesh, Point};
use crate::quadrature::{gauss_legendre, QuadratureRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Continuity {
    Cg,
    Dg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueShape {
    Scalar,
    /// 2x2 matrix, stored componentwise in the order 11, 12, 21, 22.
    Matrix,
}

impl ValueShape {
    pub fn components(self) -> usize {
        match self {
            ValueShape::Scalar => 1,
            ValueShape::Matrix => 4,
        }
    }
}

/// Position of a local Lagrange node within the reference triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Vertex(usize),
    /// Node `index` (0-based, counted from the edge's first vertex) on local edge `edge`.
    Edge { edge: usize, index: usize },
    Interior(usize),
}

/// Equispaced Lagrange element of degree `p` on the reference triangle.
///
/// Node order: the three vertices, the `p-1` nodes of each edge (edge `k`
/// runs from vertex `k+1` to vertex `k+2`), then interior nodes.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    degree: usize,
    nodes: Vec<Point>,
    kinds: Vec<NodeKind>,
    exponents: Vec<(i32, i32)>,
    /// `coeffs[m * n + i]`: coefficient of monomial `m` in basis function `i`.
    coeffs: Vec<f64>,
}

const REF_VERTICES: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

impl ReferenceElement {
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidArgument("polynomial degree must be >= 1".into()));
        }
        let p = degree;
        let mut nodes = Vec::new();
        let mut kinds = Vec::new();
        for (k, v) in REF_VERTICES.iter().enumerate() {
            nodes.push(*v);
            kinds.push(NodeKind::Vertex(k));
        }
        for e in 0..3 {
            let a = REF_VERTICES[(e + 1) % 3];
            let b = REF_VERTICES[(e + 2) % 3];
            for j in 1..p {
                let t = j as f64 / p as f64;
                nodes.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                kinds.push(NodeKind::Edge { edge: e, index: j - 1 });
            }
        }
        let mut interior = 0;
        for j in 1..p {
            for i in 1..p - j {
                nodes.push([i as f64 / p as f64, j as f64 / p as f64]);
                kinds.push(NodeKind::Interior(interior));
                interior += 1;
            }
        }
        let mut exponents = Vec::new();
        for total in 0..=p as i32 {
            for b in 0..=total {
                exponents.push((total - b, b));
            }
        }
        let n = nodes.len();
        debug_assert_eq!(n, exponents.len());
        let vand = DMatrix::from_fn(n, n, |i, m| {
            let (a, b) = exponents[m];
            nodes[i][0].powi(a) * nodes[i][1].powi(b)
        });
        let inv = vand
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("singular Vandermonde matrix".into()))?;
        let mut coeffs = vec![0.0; n * n];
        for m in 0..n {
            for i in 0..n {
                coeffs[m * n + i] = inv[(m, i)];
            }
        }
        Ok(ReferenceElement {
            degree,
            nodes,
            kinds,
            exponents,
            coeffs,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_basis(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node_kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn n_interior(&self) -> usize {
        let p = self.degree;
        if p < 3 {
            0
        } else {
            (p - 1) * (p - 2) / 2
        }
    }

    /// Basis values, reference gradients and reference Hessians `[11, 12, 22]` at `xi`.
    pub fn eval(&self, xi: Point, values: &mut [f64], grads: &mut [[f64; 2]], hess: &mut [[f64; 3]]) {
        let n = self.n_basis();
        values[..n].fill(0.0);
        grads[..n].fill([0.0; 2]);
        hess[..n].fill([0.0; 3]);
        let pw = |x: f64, k: i32| if k < 0 { 0.0 } else { x.powi(k) };
        let (x, y) = (xi[0], xi[1]);
        for (m, &(a, b)) in self.exponents.iter().enumerate() {
            let af = a as f64;
            let bf = b as f64;
            let v = pw(x, a) * pw(y, b);
            let dx = af * pw(x, a - 1) * pw(y, b);
            let dy = bf * pw(x, a) * pw(y, b - 1);
            let dxx = af * (af - 1.0) * pw(x, a - 2) * pw(y, b);
            let dxy = af * bf * pw(x, a - 1) * pw(y, b - 1);
            let dyy = bf * (bf - 1.0) * pw(x, a) * pw(y, b - 2);
            let row = &self.coeffs[m * n..(m + 1) * n];
            for i in 0..n {
                let c = row[i];
                if c == 0.0 {
                    continue;
                }
                values[i] += c * v;
                grads[i][0] += c * dx;
                grads[i][1] += c * dy;
                hess[i][0] += c * dxx;
                hess[i][1] += c * dxy;
                hess[i][2] += c * dyy;
            }
        }
    }

    pub fn tabulate(&self, rule: &QuadratureRule) -> Tabulation {
        let n = self.n_basis();
        let nq = rule.len();
        let mut t = Tabulation {
            n_basis: n,
            weights: rule.weights.clone(),
            points: rule.points.clone(),
            values: vec![0.0; nq * n],
            grads: vec![[0.0; 2]; nq * n],
            hess: vec![[0.0; 3]; nq * n],
        };
        for q in 0..nq {
            let r = q * n..(q + 1) * n;
            let (v, g, h) = (&mut t.values[r.clone()], &mut t.grads[r.clone()], &mut t.hess[r]);
            self.eval(rule.points[q], v, g, h);
        }
        t
    }
}

/// Basis data of a reference element at the points of a quadrature rule.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub n_basis: usize,
    pub weights: Vec<f64>,
    pub points: Vec<Point>,
    /// `values[q * n + i]`
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    pub hess: Vec<[f64; 3]>,
}

impl Tabulation {
    pub fn n_points(&self) -> usize {
        self.weights.len()
    }
}

/// Basis data pushed forward to a physical cell.
#[derive(Debug, Clone, Default)]
pub struct CellBasis {
    pub n_basis: usize,
    /// Physical weights (reference weight times |det J|).
    pub weights: Vec<f64>,
    pub points: Vec<Point>,
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    /// Physical Hessians `[xx, xy, yy]`.
    pub hess: Vec<[f64; 3]>,
}

impl CellBasis {
    pub fn fill(&mut self, tab: &Tabulation, map: &CellMap) {
        let n = tab.n_basis;
        let nq = tab.n_points();
        self.n_basis = n;
        self.weights.clear();
        self.weights.extend(tab.weights.iter().map(|w| w * map.det.abs()));
        self.points.clear();
        self.points.extend(tab.points.iter().map(|&xi| map.to_physical(xi)));
        self.values.clear();
        self.values.extend_from_slice(&tab.values);
        self.grads.resize(nq * n, [0.0; 2]);
        self.hess.resize(nq * n, [0.0; 3]);
        for k in 0..nq * n {
            self.grads[k] = map.push_gradient(tab.grads[k]);
            self.hess[k] = map.push_hessian(tab.hess[k]);
        }
    }

    pub fn n_points(&self) -> usize {
        self.weights.len()
    }
}

/// Basis data of the cell on one side of a facet, at the facet quadrature points.
#[derive(Debug, Clone, Default)]
pub struct FacetSideBasis {
    pub cell: usize,
    /// Outward normal of `cell` on the facet.
    pub normal: [f64; 2],
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    pub hess: Vec<[f64; 3]>,
}

/// Gauss quadrature on a facet with basis data from both incident cells.
#[derive(Debug, Clone, Default)]
pub struct FacetBasis {
    pub facet: usize,
    pub length: f64,
    pub points: Vec<Point>,
    /// Physical weights (summing to the facet length).
    pub weights: Vec<f64>,
    pub sides: Vec<FacetSideBasis>,
}

/// A Lagrange space on a mesh.
#[derive(Debug, Clone)]
pub struct FunctionSpace {
    mesh: Arc<Mesh>,
    element: Arc<ReferenceElement>,
    continuity: Continuity,
    shape: ValueShape,
    cell_dofs: Vec<usize>,
    n_scalar: usize,
}

impl FunctionSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize, continuity: Continuity, shape: ValueShape) -> Result<Self> {
        let element = Arc::new(ReferenceElement::new(degree)?);
        let n = element.n_basis();
        let nc = mesh.n_cells();
        let mut cell_dofs = vec![0; nc * n];
        let n_scalar = match continuity {
            Continuity::Dg => {
                for (k, d) in cell_dofs.iter_mut().enumerate() {
                    *d = k;
                }
                nc * n
            }
            Continuity::Cg => {
                let p = degree;
                let nv = mesh.n_vertices();
                let nf = mesh.n_facets();
                let ni = element.n_interior();
                for c in 0..nc {
                    let verts = mesh.cells()[c];
                    let facets = mesh.cell_facets(c);
                    for (i, kind) in element.node_kinds().iter().enumerate() {
                        cell_dofs[c * n + i] = match *kind {
                            NodeKind::Vertex(k) => verts[k],
                            NodeKind::Edge { edge, index } => {
                                let a = verts[(edge + 1) % 3];
                                let b = verts[(edge + 2) % 3];
                                let offset = if a < b { index } else { p - 2 - index };
                                nv + facets[edge] * (p - 1) + offset
                            }
                            NodeKind::Interior(j) => nv + nf * (p - 1) + c * ni + j,
                        };
                    }
                }
                nv + nf * (p - 1) + nc * ni
            }
        };
        Ok(FunctionSpace {
            mesh,
            element,
            continuity,
            shape,
            cell_dofs,
            n_scalar,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn element(&self) -> &ReferenceElement {
        &self.element
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    pub fn shape(&self) -> ValueShape {
        self.shape
    }

    pub fn n_local(&self) -> usize {
        self.element.n_basis()
    }

    /// Number of dofs per component.
    pub fn n_scalar_dofs(&self) -> usize {
        self.n_scalar
    }

    /// Total number of dofs over all components.
    pub fn n_dofs(&self) -> usize {
        self.n_scalar * self.shape.components()
    }

    /// Scalar (component 0) dofs of a cell, in local node order.
    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let n = self.n_local();
        &self.cell_dofs[cell * n..(cell + 1) * n]
    }

    /// Scalar version of this space (same mesh, degree and continuity).
    pub fn scalar(&self) -> FunctionSpace {
        FunctionSpace {
            shape: ValueShape::Scalar,
            ..self.clone()
        }
    }

    /// Physical coordinates of the Lagrange node of each scalar dof.
    pub fn dof_coordinates(&self) -> Vec<Point> {
        let mut out = vec![[0.0; 2]; self.n_scalar];
        for c in 0..self.mesh.n_cells() {
            let map = self.mesh.cell_map(c);
            for (i, &d) in self.cell_dofs(c).iter().enumerate() {
                out[d] = map.to_physical(self.element.nodes()[i]);
            }
        }
        out
    }

    /// Dofs whose Lagrange nodes lie on the boundary (continuous scalar spaces only).
    pub fn boundary_dofs(&self) -> Result<Vec<usize>> {
        Ok(self
            .boundary_mask()?
            .iter()
            .enumerate()
            .filter_map(|(d, &b)| b.then_some(d))
            .collect())
    }

    pub fn boundary_mask(&self) -> Result<Vec<bool>> {
        if self.continuity != Continuity::Cg || self.shape != ValueShape::Scalar {
            return Err(Error::NotContinuous);
        }
        let mut mask = vec![false; self.n_scalar];
        for c in 0..self.mesh.n_cells() {
            let verts = self.mesh.cells()[c];
            let facets = self.mesh.cell_facets(c);
            for (i, kind) in self.element.node_kinds().iter().enumerate() {
                let on = match *kind {
                    NodeKind::Vertex(k) => self.mesh.is_boundary_vertex(verts[k]),
                    NodeKind::Edge { edge, .. } => self.mesh.facets()[facets[edge]].is_boundary(),
                    NodeKind::Interior(_) => false,
                };
                if on {
                    mask[self.cell_dofs(c)[i]] = true;
                }
            }
        }
        Ok(mask)
    }

    /// Nodal interpolant of a scalar function.
    pub fn interpolate(self: &Arc<Self>, f: impl Fn(Point) -> f64) -> FeFunction {
        let coords = self.dof_coordinates();
        let mut coeffs = vec![0.0; self.n_dofs()];
        for comp in 0..self.shape.components() {
            for (d, x) in coords.iter().enumerate() {
                coeffs[comp * self.n_scalar + d] = f(*x);
            }
        }
        FeFunction {
            space: Arc::clone(self),
            coeffs,
        }
    }

    /// Nodal interpolant of a matrix-valued function given as `[11, 12, 21, 22]`.
    pub fn interpolate_matrix(self: &Arc<Self>, f: impl Fn(Point) -> [f64; 4]) -> Result<FeFunction> {
        if self.shape != ValueShape::Matrix {
            return Err(Error::InvalidArgument("matrix interpolation on a scalar space".into()));
        }
        let coords = self.dof_coordinates();
        let mut coeffs = vec![0.0; self.n_dofs()];
        for (d, x) in coords.iter().enumerate() {
            let v = f(*x);
            for (comp, val) in v.iter().enumerate() {
                coeffs[comp * self.n_scalar + d] = *val;
            }
        }
        Ok(FeFunction {
            space: Arc::clone(self),
            coeffs,
        })
    }

    /// Gauss rule with `n_points` points on `facet`, with basis data of each incident cell.
    pub fn facet_basis(&self, facet: usize, n_points: usize, out: &mut FacetBasis) {
        let mesh = &self.mesh;
        let f = &mesh.facets()[facet];
        let a = mesh.vertices()[f.vertices[0]];
        let b = mesh.vertices()[f.vertices[1]];
        let length = mesh.facet_length(facet);
        let (t, w) = gauss_legendre(n_points);
        out.facet = facet;
        out.length = length;
        out.points.clear();
        out.points
            .extend(t.iter().map(|&s| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]));
        out.weights.clear();
        out.weights.extend(w.iter().map(|w| w * length));
        let n = self.n_local();
        let sides: Vec<_> = std::iter::once(f.first).chain(f.second).collect();
        out.sides.resize_with(sides.len(), Default::default);
        for (side, s) in sides.iter().zip(out.sides.iter_mut()) {
            let map = mesh.cell_map(side.cell);
            s.cell = side.cell;
            s.normal = mesh.outward_normal(side.cell, side.local);
            s.values.resize(n_points * n, 0.0);
            s.grads.resize(n_points * n, [0.0; 2]);
            s.hess.resize(n_points * n, [0.0; 3]);
            for (q, x) in out.points.iter().enumerate() {
                let xi = map.to_reference(*x);
                let r = q * n..(q + 1) * n;
                self.element.eval(
                    xi,
                    &mut s.values[r.clone()],
                    &mut s.grads[r.clone()],
                    &mut s.hess[r.clone()],
                );
                for k in r {
                    s.grads[k] = map.push_gradient(s.grads[k]);
                    s.hess[k] = map.push_hessian(s.hess[k]);
                }
            }
        }
    }
}

/// Values and physical derivatives of a function at a set of points.
#[derive(Debug, Clone, Default)]
pub struct PointValues {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    pub hess: Vec<[f64; 3]>,
}

/// A finite element function: a space plus a coefficient vector.
#[derive(Debug, Clone)]
pub struct FeFunction {
    pub space: Arc<FunctionSpace>,
    pub coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn new(space: Arc<FunctionSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(Error::InvalidArgument(format!(
                "coefficient vector has length {}, space has {} dofs",
                coeffs.len(),
                space.n_dofs()
            )));
        }
        Ok(FeFunction { space, coeffs })
    }

    pub fn zero(space: Arc<FunctionSpace>) -> Self {
        let n = space.n_dofs();
        FeFunction {
            space,
            coeffs: vec![0.0; n],
        }
    }

    /// Coefficients of component `comp` (0 for scalar spaces).
    pub fn component(&self, comp: usize) -> &[f64] {
        let n = self.space.n_scalar_dofs();
        &self.coeffs[comp * n..(comp + 1) * n]
    }

    /// Values, gradients and Hessians of component `comp` at the points of a cell basis.
    pub fn eval_cell(&self, cell: usize, basis: &CellBasis, comp: usize, out: &mut PointValues) {
        let dofs = self.space.cell_dofs(cell);
        let c = self.component(comp);
        combine(dofs, c, basis.n_points(), basis.n_basis, &basis.values, &basis.grads, &basis.hess, out);
    }

    /// Same as [`FeFunction::eval_cell`] but from one side of a facet basis.
    pub fn eval_facet_side(&self, side: &FacetSideBasis, n_points: usize, comp: usize, out: &mut PointValues) {
        let dofs = self.space.cell_dofs(side.cell);
        let c = self.component(comp);
        let n = self.space.n_local();
        combine(dofs, c, n_points, n, &side.values, &side.grads, &side.hess, out);
    }

    /// Values, physical gradients and Hessians at the points of `quad` on `cell`.
    pub fn evaluate(&self, cell: usize, quad: &QuadratureRule) -> PointValues {
        let tab = self.space.element().tabulate(quad);
        let mut basis = CellBasis::default();
        basis.fill(&tab, &self.space.mesh().cell_map(cell));
        let mut out = PointValues::default();
        self.eval_cell(cell, &basis, 0, &mut out);
        out
    }

    /// Value, gradient and Hessian of component 0 at a physical point inside `cell`.
    pub fn eval_at(&self, cell: usize, x: Point) -> (f64, [f64; 2], [f64; 3]) {
        let map = self.space.mesh().cell_map(cell);
        let xi = map.to_reference(x);
        let n = self.space.n_local();
        let mut v = vec![0.0; n];
        let mut g = vec![[0.0; 2]; n];
        let mut h = vec![[0.0; 3]; n];
        self.space.element().eval(xi, &mut v, &mut g, &mut h);
        let dofs = self.space.cell_dofs(cell);
        let c = self.component(0);
        let mut out = (0.0, [0.0; 2], [0.0; 3]);
        for i in 0..n {
            let u = c[dofs[i]];
            let gi = map.push_gradient(g[i]);
            let hi = map.push_hessian(h[i]);
            out.0 += u * v[i];
            out.1[0] += u * gi[0];
            out.1[1] += u * gi[1];
            for k in 0..3 {
                out.2[k] += u * hi[k];
            }
        }
        out
    }
}

#[allow(clippy::too_many_arguments)]
fn combine(
    dofs: &[usize],
    c: &[f64],
    nq: usize,
    n: usize,
    values: &[f64],
    grads: &[[f64; 2]],
    hess: &[[f64; 3]],
    out: &mut PointValues,
) {
    out.values.clear();
    out.values.resize(nq, 0.0);
    out.grads.clear();
    out.grads.resize(nq, [0.0; 2]);
    out.hess.clear();
    out.hess.resize(nq, [0.0; 3]);
    for q in 0..nq {
        for i in 0..n {
            let u = c[dofs[i]];
            let k = q * n + i;
            out.values[q] += u * values[k];
            out.grads[q][0] += u * grads[k][0];
            out.grads[q][1] += u * grads[k][1];
            out.hess[q][0] += u * hess[k][0];
            out.hess[q][1] += u * hess[k][1];
            out.hess[q][2] += u * hess[k][2];
        }
    }
}

/// Number of Gauss points per facet for integrands of polynomial degree `degree`.
pub fn facet_points_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}
