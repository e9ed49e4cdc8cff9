//! Conforming triangulations of rectangles with facet topology and
//! newest-vertex bisection.
//!
//! Local conventions: local facet `k` of a cell is the edge opposite local
//! vertex `k`, i.e. it runs from vertex `k+1` to vertex `k+2` (mod 3). The
//! refinement edge of a cell is stored as such a local facet index.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// One side of a facet: the incident cell and the facet's local index in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FacetSide {
    pub cell: usize,
    pub local: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub vertices: [usize; 2],
    pub first: FacetSide,
    pub second: Option<FacetSide>,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.second.is_none()
    }
}

/// Affine map from the reference triangle `(0,0),(1,0),(0,1)` onto a cell.
#[derive(Debug, Clone, Copy)]
pub struct CellMap {
    pub origin: Point,
    /// Column-major Jacobian: `jac[c][r]` = d x_r / d xi_c.
    pub jac: [[f64; 2]; 2],
    /// `inv[r][c]` = d xi_r / d x_c.
    pub inv: [[f64; 2]; 2],
    pub det: f64,
}

impl CellMap {
    pub fn new(v: [Point; 3]) -> Self {
        let a = [v[1][0] - v[0][0], v[1][1] - v[0][1]];
        let b = [v[2][0] - v[0][0], v[2][1] - v[0][1]];
        let det = a[0] * b[1] - b[0] * a[1];
        let inv = [[b[1] / det, -b[0] / det], [-a[1] / det, a[0] / det]];
        CellMap {
            origin: v[0],
            jac: [a, b],
            inv,
            det,
        }
    }

    pub fn to_physical(&self, xi: Point) -> Point {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[1][0] * xi[1],
            self.origin[1] + self.jac[0][1] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, x: Point) -> Point {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [
            self.inv[0][0] * d[0] + self.inv[0][1] * d[1],
            self.inv[1][0] * d[0] + self.inv[1][1] * d[1],
        ]
    }

    /// Physical gradient from a reference gradient.
    #[inline]
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv[0][0] * g[0] + self.inv[1][0] * g[1],
            self.inv[0][1] * g[0] + self.inv[1][1] * g[1],
        ]
    }

    /// Physical Hessian `[xx, xy, yy]` from a reference Hessian `[11, 12, 22]`.
    #[inline]
    pub fn push_hessian(&self, h: [f64; 3]) -> [f64; 3] {
        let k = &self.inv;
        let href = [[h[0], h[1]], [h[1], h[2]]];
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, o) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        s += k[a][i] * href[a][b] * k[b][j];
                    }
                }
                *o = s;
            }
        }
        [out[0][0], out[0][1], out[1][1]]
    }
}

/// Unit normal, length and adjacency of a facet.
///
/// On interior facets `normal` is the outward normal of `minus_cell`, so it
/// points towards `plus_cell`. On boundary facets only `plus_cell` is set and
/// `normal` points out of the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetGeometry {
    pub normal: [f64; 2],
    pub length: f64,
    pub plus_cell: usize,
    pub minus_cell: Option<usize>,
}

impl FacetGeometry {
    /// Same facet with the plus/minus labels exchanged.
    pub fn flipped(&self) -> Self {
        match self.minus_cell {
            Some(m) => FacetGeometry {
                normal: [-self.normal[0], -self.normal[1]],
                length: self.length,
                plus_cell: m,
                minus_cell: Some(self.plus_cell),
            },
            None => *self,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    pub h_max: f64,
    pub h_min: f64,
    pub max_aspect_ratio: f64,
    pub neighbor_size_variation: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    refinement_edges: Vec<usize>,
    facets: Vec<Facet>,
    cell_facets: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds a mesh, orienting cells counter-clockwise and choosing the
    /// longest edge of each cell as its refinement edge.
    pub fn new(vertices: Vec<Point>, cells: Vec<[usize; 3]>) -> Result<Self> {
        let mut oriented = Vec::with_capacity(cells.len());
        let mut refinement = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let mut cell = *cell;
            for &v in &cell {
                if v >= vertices.len() {
                    return Err(Error::InvalidMesh(format!(
                        "cell {c} references vertex {v} of {}",
                        vertices.len()
                    )));
                }
            }
            let area = signed_area(vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]);
            if area < 0.0 {
                cell.swap(1, 2);
            }
            let mut best = 0;
            let mut best_len = -1.0;
            for k in 0..3 {
                let l = dist(vertices[cell[(k + 1) % 3]], vertices[cell[(k + 2) % 3]]);
                if l > best_len * (1.0 + 1e-12) {
                    best = k;
                    best_len = l;
                }
            }
            oriented.push(cell);
            refinement.push(best);
        }
        Self::with_refinement_edges(vertices, oriented, refinement)
    }

    /// Builds a mesh from positively oriented cells with given refinement edges.
    pub fn with_refinement_edges(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        refinement_edges: Vec<usize>,
    ) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidMesh("no cells".into()));
        }
        if refinement_edges.len() != cells.len() {
            return Err(Error::InvalidMesh("refinement edge count mismatch".into()));
        }
        let mut facets: Vec<Facet> = Vec::with_capacity(cells.len() * 3 / 2 + 8);
        let mut cell_facets = vec![[usize::MAX; 3]; cells.len()];
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(cells.len() * 2);
        for (c, cell) in cells.iter().enumerate() {
            if cell.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("cell {c} has an invalid vertex")));
            }
            if refinement_edges[c] > 2 {
                return Err(Error::InvalidMesh(format!("cell {c} has invalid refinement edge")));
            }
            let area = signed_area(vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]);
            if area <= 0.0 {
                return Err(Error::InvalidMesh(format!("cell {c} has non-positive area {area}")));
            }
            for k in 0..3 {
                let a = cell[(k + 1) % 3];
                let b = cell[(k + 2) % 3];
                let side = FacetSide { cell: c, local: k };
                match lookup.get(&edge_key(a, b)) {
                    Some(&f) => {
                        if facets[f].second.is_some() {
                            return Err(Error::InvalidMesh(format!(
                                "edge ({a},{b}) shared by more than two cells"
                            )));
                        }
                        facets[f].second = Some(side);
                        cell_facets[c][k] = f;
                    }
                    None => {
                        lookup.insert(edge_key(a, b), facets.len());
                        cell_facets[c][k] = facets.len();
                        facets.push(Facet {
                            vertices: [a, b],
                            first: side,
                            second: None,
                        });
                    }
                }
            }
        }
        let mut boundary_vertex = vec![false; vertices.len()];
        for f in facets.iter().filter(|f| f.is_boundary()) {
            boundary_vertex[f.vertices[0]] = true;
            boundary_vertex[f.vertices[1]] = true;
        }
        Ok(Mesh {
            vertices,
            cells,
            refinement_edges,
            facets,
            cell_facets,
            boundary_vertex,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn cell_facets(&self, cell: usize) -> [usize; 3] {
        self.cell_facets[cell]
    }

    pub fn refinement_edges(&self) -> &[usize] {
        &self.refinement_edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn n_boundary_facets(&self) -> usize {
        self.facets.iter().filter(|f| f.is_boundary()).count()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn cell_vertices(&self, cell: usize) -> [Point; 3] {
        let c = self.cells[cell];
        [self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]]
    }

    pub fn cell_map(&self, cell: usize) -> CellMap {
        CellMap::new(self.cell_vertices(cell))
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        let v = self.cell_vertices(cell);
        signed_area(v[0], v[1], v[2])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_area(c)).sum()
    }

    pub fn cell_centroid(&self, cell: usize) -> Point {
        let v = self.cell_vertices(cell);
        [
            (v[0][0] + v[1][0] + v[2][0]) / 3.0,
            (v[0][1] + v[1][1] + v[2][1]) / 3.0,
        ]
    }

    /// Cell diameter (longest edge).
    pub fn cell_diameter(&self, cell: usize) -> f64 {
        let v = self.cell_vertices(cell);
        dist(v[0], v[1]).max(dist(v[1], v[2])).max(dist(v[2], v[0]))
    }

    /// Diameter of the inscribed circle.
    pub fn cell_inscribed_diameter(&self, cell: usize) -> f64 {
        let v = self.cell_vertices(cell);
        let s = 0.5 * (dist(v[0], v[1]) + dist(v[1], v[2]) + dist(v[2], v[0]));
        2.0 * self.cell_area(cell) / s
    }

    /// Outward unit normal of local facet `local` of `cell`.
    pub fn outward_normal(&self, cell: usize, local: usize) -> [f64; 2] {
        let c = self.cells[cell];
        let a = self.vertices[c[(local + 1) % 3]];
        let b = self.vertices[c[(local + 2) % 3]];
        let t = [b[0] - a[0], b[1] - a[1]];
        let l = (t[0] * t[0] + t[1] * t[1]).sqrt();
        // counter-clockwise cells: the outward normal is the tangent rotated clockwise
        [t[1] / l, -t[0] / l]
    }

    pub fn facet_length(&self, facet: usize) -> f64 {
        let f = &self.facets[facet];
        dist(self.vertices[f.vertices[0]], self.vertices[f.vertices[1]])
    }

    pub fn facet_geometry(&self, facet: usize) -> Result<FacetGeometry> {
        let f = self.facets.get(facet).ok_or(Error::OutOfBounds {
            index: facet,
            len: self.facets.len(),
        })?;
        let length = self.facet_length(facet);
        Ok(match f.second {
            None => FacetGeometry {
                normal: self.outward_normal(f.first.cell, f.first.local),
                length,
                plus_cell: f.first.cell,
                minus_cell: None,
            },
            Some(second) => FacetGeometry {
                normal: self.outward_normal(f.first.cell, f.first.local),
                length,
                plus_cell: second.cell,
                minus_cell: Some(f.first.cell),
            },
        })
    }

    pub fn quality(&self) -> MeshQuality {
        let diam: Vec<f64> = (0..self.n_cells()).map(|c| self.cell_diameter(c)).collect();
        let mut q = MeshQuality {
            h_max: 0.0,
            h_min: f64::INFINITY,
            max_aspect_ratio: 0.0,
            neighbor_size_variation: 1.0,
        };
        for (c, &h) in diam.iter().enumerate() {
            q.h_max = q.h_max.max(h);
            q.h_min = q.h_min.min(h);
            q.max_aspect_ratio = q.max_aspect_ratio.max(h / self.cell_inscribed_diameter(c));
        }
        // cells touching at a vertex
        let mut vmax = vec![0.0f64; self.n_vertices()];
        let mut vmin = vec![f64::INFINITY; self.n_vertices()];
        for (c, cell) in self.cells.iter().enumerate() {
            for &v in cell {
                vmax[v] = vmax[v].max(diam[c]);
                vmin[v] = vmin[v].min(diam[c]);
            }
        }
        for (hi, lo) in vmax.iter().zip(&vmin) {
            if lo.is_finite() {
                q.neighbor_size_variation = q.neighbor_size_variation.max(hi / lo);
            }
        }
        q
    }

    /// Checks the topological and geometric invariants. Intended for tests.
    pub fn check_invariants(&self) -> Result<()> {
        let mut interior = 0;
        let mut boundary = 0;
        for (fi, f) in self.facets.iter().enumerate() {
            for side in std::iter::once(f.first).chain(f.second) {
                if self.cell_facets[side.cell][side.local] != fi {
                    return Err(Error::InvalidMesh(format!("facet {fi} adjacency not symmetric")));
                }
            }
            if f.is_boundary() {
                boundary += 1;
            } else {
                interior += 1;
            }
        }
        if 3 * self.n_cells() != 2 * interior + boundary {
            return Err(Error::InvalidMesh("facet count inconsistent".into()));
        }
        for c in 0..self.n_cells() {
            if self.cell_area(c) <= 0.0 {
                return Err(Error::InvalidMesh(format!("cell {c} not positively oriented")));
            }
        }
        // rectangular domains only: a facet with a single incident cell inside
        // the domain would show up as extra boundary length
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let perimeter = 2.0 * (hi[0] - lo[0] + hi[1] - lo[1]);
        let boundary_len: f64 = (0..self.n_facets())
            .filter(|&f| self.facets[f].is_boundary())
            .map(|f| self.facet_length(f))
            .sum();
        if (boundary_len - perimeter).abs() > 1e-10 * perimeter {
            return Err(Error::InvalidMesh(format!(
                "boundary length {boundary_len} differs from perimeter {perimeter}"
            )));
        }
        // hanging vertices: a vertex lying strictly inside some facet
        let mut on_edge: HashMap<(i64, i64), usize> = HashMap::new();
        let scale = 1e9;
        for (i, v) in self.vertices.iter().enumerate() {
            on_edge.insert(((v[0] * scale).round() as i64, (v[1] * scale).round() as i64), i);
        }
        for f in &self.facets {
            let a = self.vertices[f.vertices[0]];
            let b = self.vertices[f.vertices[1]];
            let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            let key = ((m[0] * scale).round() as i64, (m[1] * scale).round() as i64);
            if let Some(&v) = on_edge.get(&key) {
                if self.cells.iter().any(|c| c.contains(&v)) {
                    return Err(Error::InvalidMesh(format!(
                        "vertex {v} hangs on facet {:?}",
                        f.vertices
                    )));
                }
            }
        }
        Ok(())
    }

    /// Plain-text dump: `vertices N cells M`, then vertex and cell lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vertices {} cells {}", self.n_vertices(), self.n_cells());
        for v in &self.vertices {
            let _ = writeln!(s, "{:e} {:e}", v[0], v[1]);
        }
        for c in &self.cells {
            let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty mesh file".into()))?;
        let tok: Vec<&str> = header.split_whitespace().collect();
        if tok.len() != 4 || tok[0] != "vertices" || tok[2] != "cells" {
            return Err(Error::Parse(format!("bad header: {header}")));
        }
        let parse_usize =
            |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s}: {e}")));
        let parse_f64 = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")));
        let nv = parse_usize(tok[1])?;
        let nc = parse_usize(tok[3])?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let l = lines.next().ok_or_else(|| Error::Parse("missing vertex line".into()))?;
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 2 {
                return Err(Error::Parse(format!("bad vertex line: {l}")));
            }
            vertices.push([parse_f64(t[0])?, parse_f64(t[1])?]);
        }
        let mut cells = Vec::with_capacity(nc);
        for _ in 0..nc {
            let l = lines.next().ok_or_else(|| Error::Parse("missing cell line".into()))?;
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 3 {
                return Err(Error::Parse(format!("bad cell line: {l}")));
            }
            cells.push([parse_usize(t[0])?, parse_usize(t[1])?, parse_usize(t[2])?]);
        }
        Mesh::new(vertices, cells)
    }

    /// Newest-vertex bisection of the marked cells with conforming closure.
    ///
    /// Marking a cell marks its refinement edge. The marked edge set is closed
    /// under "a cell with any marked edge has its refinement edge marked";
    /// every cell is then bisected on its refinement edge and each child is
    /// bisected once more if its own refinement edge (an edge of the parent)
    /// is marked.
    pub fn bisect(&self, marked: &[usize]) -> Result<Mesh> {
        let mut edge_marked = vec![false; self.n_facets()];
        for &c in marked {
            if c >= self.n_cells() {
                return Err(Error::OutOfBounds {
                    index: c,
                    len: self.n_cells(),
                });
            }
            edge_marked[self.cell_facets[c][self.refinement_edges[c]]] = true;
        }
        let mut queue: Vec<usize> = (0..self.n_facets()).filter(|&f| edge_marked[f]).collect();
        while let Some(f) = queue.pop() {
            let facet = &self.facets[f];
            for side in std::iter::once(facet.first).chain(facet.second) {
                let r = self.cell_facets[side.cell][self.refinement_edges[side.cell]];
                if !edge_marked[r] {
                    edge_marked[r] = true;
                    queue.push(r);
                }
            }
        }

        let mut vertices = self.vertices.clone();
        let mut midpoint = vec![usize::MAX; self.n_facets()];
        for (f, facet) in self.facets.iter().enumerate() {
            if edge_marked[f] {
                let a = self.vertices[facet.vertices[0]];
                let b = self.vertices[facet.vertices[1]];
                midpoint[f] = vertices.len();
                vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            }
        }

        let mut cells = Vec::with_capacity(self.n_cells() * 2);
        let mut refine = Vec::with_capacity(self.n_cells() * 2);
        for (c, cell) in self.cells.iter().enumerate() {
            let k = self.refinement_edges[c];
            let rf = self.cell_facets[c][k];
            if !edge_marked[rf] {
                cells.push(*cell);
                refine.push(k);
                continue;
            }
            let apex = cell[k];
            let p = cell[(k + 1) % 3];
            let q = cell[(k + 2) % 3];
            let m = midpoint[rf];
            // child (apex, p, m): refinement edge (apex, p) is local 2, the parent's facet k+2
            // child (apex, m, q): refinement edge (q, apex) is local 1, the parent's facet k+1
            let children = [
                ([apex, p, m], 2, self.cell_facets[c][(k + 2) % 3]),
                ([apex, m, q], 1, self.cell_facets[c][(k + 1) % 3]),
            ];
            for (child, local, parent_edge) in children {
                if edge_marked[parent_edge] {
                    let mm = midpoint[parent_edge];
                    let a = child[local];
                    let b = child[(local + 1) % 3];
                    let d = child[(local + 2) % 3];
                    cells.push([a, b, mm]);
                    refine.push(2);
                    cells.push([a, mm, d]);
                    refine.push(1);
                } else {
                    cells.push(child);
                    refine.push(local);
                }
            }
        }
        Mesh::with_refinement_edges(vertices, cells, refine)
    }

    /// Bisects every cell `rounds` times (each round marks all cells).
    pub fn refine_uniform(&self, rounds: usize) -> Result<Mesh> {
        let mut mesh = self.clone();
        for _ in 0..rounds {
            let all: Vec<usize> = (0..mesh.n_cells()).collect();
            mesh = mesh.bisect(&all)?;
        }
        Ok(mesh)
    }
}

/// Structured triangulation of `[x0,x1] x [y0,y1]`; every grid square is split
/// along its bottom-left to top-right diagonal.
pub fn build_rect_mesh(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if !(x1 > x0 && y1 > y0) || !x0.is_finite() || !x1.is_finite() || !y0.is_finite() || !y1.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "invalid rectangle [{x0},{x1}]x[{y0},{y1}]"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument("subdivision counts must be positive".into()));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([
                x0 + (x1 - x0) * i as f64 / nx as f64,
                y0 + (y1 - y0) * j as f64 / ny as f64,
            ]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let a = id(i, j);
            let b = id(i + 1, j);
            let c = id(i + 1, j + 1);
            let d = id(i, j + 1);
            cells.push([a, b, c]);
            cells.push([a, c, d]);
        }
    }
    Mesh::new(vertices, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Mesh {
        build_rect_mesh(0.0, 1.0, 0.0, 1.0, 1, 1).unwrap()
    }

    #[test]
    fn single_square_counts() {
        let m = unit_square();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_cells(), 2);
        assert_eq!(m.n_facets(), 5);
        assert_eq!(m.n_boundary_facets(), 4);
        m.check_invariants().unwrap();
    }

    #[test]
    fn two_by_two_counts() {
        let m = build_rect_mesh(0.0, 1.0, 0.0, 1.0, 2, 2).unwrap();
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.n_cells(), 8);
        assert_eq!(m.n_facets(), 16);
        assert_eq!(m.n_facets() - m.n_boundary_facets(), 8);
    }

    #[test]
    fn tiling_area() {
        let m = build_rect_mesh(-1.0, 1.0, -1.0, 1.0, 4, 4).unwrap();
        assert!((m.total_area() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_rectangles_rejected() {
        assert!(build_rect_mesh(1.0, 0.0, 0.0, 1.0, 1, 1).is_err());
        assert!(build_rect_mesh(0.0, 1.0, 0.0, 1.0, 0, 1).is_err());
        assert!(build_rect_mesh(0.0, 1.0, 0.0, 0.0, 1, 1).is_err());
    }

    #[test]
    fn facet_geometry_examples() {
        let m = unit_square();
        let mut seen_bottom = false;
        let mut seen_diag = false;
        for f in 0..m.n_facets() {
            let g = m.facet_geometry(f).unwrap();
            assert!(((g.normal[0].powi(2) + g.normal[1].powi(2)).sqrt() - 1.0).abs() < 1e-14);
            let vs = m.facets()[f].vertices;
            let a = m.vertices()[vs[0]];
            let b = m.vertices()[vs[1]];
            if a[1] == 0.0 && b[1] == 0.0 {
                assert_eq!(g.normal, [0.0, -1.0]);
                assert!((g.length - 1.0).abs() < 1e-15);
                assert!(g.minus_cell.is_none());
                seen_bottom = true;
            }
            if let Some(minus) = g.minus_cell {
                assert!((g.length - 2f64.sqrt()).abs() < 1e-14);
                // normal is the outward normal of the minus cell
                let c = m.centroid_direction(minus, f);
                assert!(c < 0.0);
                let fl = g.flipped();
                assert_eq!(fl.normal, [-g.normal[0], -g.normal[1]]);
                assert_eq!(fl.plus_cell, minus);
                seen_diag = true;
            }
        }
        assert!(seen_bottom && seen_diag);
        assert!(m.facet_geometry(99).is_err());
    }

    impl Mesh {
        // sign of (centroid - facet midpoint) . normal
        fn centroid_direction(&self, cell: usize, facet: usize) -> f64 {
            let g = self.facet_geometry(facet).unwrap();
            let vs = self.facets()[facet].vertices;
            let a = self.vertices()[vs[0]];
            let b = self.vertices()[vs[1]];
            let c = self.cell_centroid(cell);
            (c[0] - 0.5 * (a[0] + b[0])) * g.normal[0] + (c[1] - 0.5 * (a[1] + b[1])) * g.normal[1]
        }
    }

    #[test]
    fn bisect_all_of_unit_square() {
        let m = unit_square().bisect(&[0, 1]).unwrap();
        assert_eq!(m.n_cells(), 4);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        m.check_invariants().unwrap();
    }

    #[test]
    fn bisect_one_cell_closes_neighbor() {
        let m = unit_square().bisect(&[0]).unwrap();
        // the refinement edge is the shared diagonal, so both cells split
        assert_eq!(m.n_cells(), 4);
        m.check_invariants().unwrap();
    }

    #[test]
    fn bisect_closure_propagates() {
        let m = build_rect_mesh(0.0, 1.0, 0.0, 1.0, 4, 4).unwrap().bisect(&[0]).unwrap();
        let m2 = m.bisect(&[0]).unwrap();
        m2.check_invariants().unwrap();
        assert!(m2.n_cells() > m.n_cells());
        assert!((m2.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aspect_ratio_bounded_under_uniform_bisection() {
        let m0 = build_rect_mesh(0.0, 1.0, 0.0, 1.0, 2, 2).unwrap();
        let k0 = m0.quality().max_aspect_ratio;
        let mut m = m0;
        for _ in 0..5 {
            m = m.refine_uniform(1).unwrap();
            assert!(m.quality().max_aspect_ratio <= 2.0 * k0 + 1e-12);
        }
        m.check_invariants().unwrap();
    }

    #[test]
    fn quality_right_isosceles() {
        let m = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        assert!((m.cell_diameter(0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((m.cell_inscribed_diameter(0) - (2.0 - 2f64.sqrt())).abs() < 1e-15);
        let q = m.quality();
        assert!((q.max_aspect_ratio - 2f64.sqrt() / (2.0 - 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn quality_uniform_mesh() {
        let q = build_rect_mesh(0.0, 1.0, 0.0, 1.0, 8, 8).unwrap().quality();
        assert!(q.neighbor_size_variation >= 1.0 && q.neighbor_size_variation <= 1.0 + 1e-12);
    }

    #[test]
    fn equilateral_has_smallest_aspect_ratio() {
        let eq = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let scalene = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.3, 0.6]], vec![[0, 1, 2]]).unwrap();
        let k_eq = eq.quality().max_aspect_ratio;
        assert!((k_eq - 3f64.sqrt()).abs() < 1e-12);
        assert!(scalene.quality().max_aspect_ratio > k_eq);
    }

    #[test]
    fn text_round_trip() {
        let m = build_rect_mesh(0.0, 1.0, 0.0, 2.0, 3, 2).unwrap();
        let back = Mesh::from_text(&m.to_text()).unwrap();
        assert_eq!(back.cells(), m.cells());
        assert_eq!(back.vertices(), m.vertices());
        assert!(Mesh::from_text("vertices 1 cells").is_err());
    }

    #[test]
    fn orientation_fixed_on_input() {
        let m = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 2, 1]]).unwrap();
        assert!(m.cell_area(0) > 0.0);
        assert!(Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], vec![[0, 1, 2]]).is_err());
    }
}
