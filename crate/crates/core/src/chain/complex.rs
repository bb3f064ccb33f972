use std::collections::HashMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::polyline::{cross, sub, Point};
use crate::error::{Error, Result};

/// Coefficient vector on the edges (dimension 1) or triangles (dimension 2)
/// of a complex. Edge coefficients refer to the edge oriented from its lower
/// to its higher vertex index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub dim: u8,
    pub coeffs: Vec<f64>,
}

impl Chain {
    pub fn zeros(dim: u8, len: usize) -> Self {
        Self {
            dim,
            coeffs: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|c| alpha * c).collect(),
        }
    }

    pub fn add(&self, other: &Chain) -> Result<Self> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Chain) -> Result<Self> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &Chain, s: f64) -> Result<Self> {
        if self.dim != other.dim || self.len() != other.len() {
            return Err(Error::Dimension(format!(
                "cannot combine {}-chain of length {} with {}-chain of length {}",
                self.dim,
                self.len(),
                other.dim,
                other.len()
            )));
        }
        Ok(Self {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + s * b)
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &Chain) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// How each grid square is split into triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPattern {
    /// Two triangles per square, cut along the lower-left to upper-right diagonal.
    Diagonal,
    /// Two triangles per square, cut along the upper-left to lower-right diagonal.
    AntiDiagonal,
    /// Four triangles per square around an added centre vertex.
    Crossed,
}

impl GridPattern {
    pub const NAMES: [&'static str; 3] = ["diagonal", "anti_diagonal", "crossed"];
}

impl FromStr for GridPattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal" => Ok(Self::Diagonal),
            "anti_diagonal" => Ok(Self::AntiDiagonal),
            "crossed" => Ok(Self::Crossed),
            _ => Err(Error::UnknownStrategy {
                kind: "grid pattern",
                name: s.to_string(),
                valid: Self::NAMES.join(", "),
            }),
        }
    }
}

/// Planar triangulated domain with oriented edges and triangles.
///
/// Triangles are stored counter-clockwise. Edge `e = (u, v)` always has
/// `u < v`; the incidence sign of `e` in triangle `t` is `+1` when the
/// counter-clockwise boundary of `t` runs from `u` to `v`.
#[derive(Debug, Clone)]
pub struct SimplicialComplex2 {
    vertices: Vec<Point>,
    edges: Vec<[usize; 2]>,
    triangles: Vec<[usize; 3]>,
    tri_edges: Vec<[(usize, f64); 3]>,
    edge_tris: Vec<Vec<(usize, f64)>>,
    edge_len: Vec<f64>,
    tri_area: Vec<f64>,
    /// `(neighbour, edge)` pairs sorted by edge index.
    adjacency: Vec<Vec<(usize, usize)>>,
    locator: Locator,
    hull: Vec<Point>,
}

impl SimplicialComplex2 {
    pub fn from_triangles(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::validation("non-finite vertex coordinate"));
        }
        let nv = vertices.len();
        let mut edge_id: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_tris: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut tris = Vec::with_capacity(triangles.len());
        let mut tri_edges = Vec::with_capacity(triangles.len());
        let mut tri_area = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::validation(format!("triangle {t} references a missing vertex")));
            }
            let [a, b, c] = *tri;
            let signed = 0.5 * cross(sub(vertices[b], vertices[a]), sub(vertices[c], vertices[a]));
            if signed.abs() <= 1e-300 {
                return Err(Error::validation(format!("triangle {t} is degenerate")));
            }
            let tri = if signed > 0.0 { [a, b, c] } else { [a, c, b] };
            let mut te = [(0usize, 0.0f64); 3];
            for k in 0..3 {
                let (u, v) = (tri[k], tri[(k + 1) % 3]);
                let key = [u.min(v), u.max(v)];
                let e = *edge_id.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_tris.push(Vec::new());
                    edges.len() - 1
                });
                let sign = if u < v { 1.0 } else { -1.0 };
                edge_tris[e].push((t, sign));
                te[k] = (e, sign);
            }
            tris.push(tri);
            tri_edges.push(te);
            tri_area.push(signed.abs());
        }
        for (e, inc) in edge_tris.iter().enumerate() {
            if inc.len() > 2 {
                return Err(Error::validation(format!("edge {e} is shared by {} triangles", inc.len())));
            }
            if inc.len() == 2 && inc[0].1 == inc[1].1 {
                return Err(Error::validation(format!(
                    "triangles {} and {} overlap across edge {e}",
                    inc[0].0, inc[1].0
                )));
            }
        }
        let edge_len = edges
            .iter()
            .map(|[u, v]| super::polyline::dist(vertices[*u], vertices[*v]))
            .collect::<Vec<_>>();
        let mut adjacency = vec![Vec::new(); nv];
        for (e, [u, v]) in edges.iter().enumerate() {
            adjacency[*u].push((*v, e));
            adjacency[*v].push((*u, e));
        }
        let mean_len = if edge_len.is_empty() {
            1.0
        } else {
            edge_len.iter().sum::<f64>() / edge_len.len() as f64
        };
        let used: Vec<bool> = {
            let mut u = vec![false; nv];
            tris.iter().flatten().for_each(|&v| u[v] = true);
            u
        };
        let locator = Locator::new(&vertices, &used, mean_len);
        let hull = convex_hull(
            vertices
                .iter()
                .zip(&used)
                .filter(|(_, u)| **u)
                .map(|(p, _)| *p)
                .collect(),
        );
        Ok(Self {
            vertices,
            edges,
            triangles: tris,
            tri_edges,
            edge_tris,
            edge_len,
            tri_area,
            adjacency,
            locator,
            hull,
        })
    }

    /// Regular grid of `nx` by `ny` squares with side `spacing` anchored at `origin`.
    pub fn grid(origin: Point, nx: usize, ny: usize, spacing: f64, pattern: GridPattern) -> Result<Self> {
        if nx == 0 || ny == 0 || !(spacing > 0.0) {
            return Err(Error::validation("grid needs positive size and spacing"));
        }
        let corner = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices: Vec<Point> = (0..=ny)
            .flat_map(|j| {
                (0..=nx).map(move |i| [origin[0] + i as f64 * spacing, origin[1] + j as f64 * spacing])
            })
            .collect();
        let mut triangles = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (corner(i, j), corner(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1));
                match pattern {
                    GridPattern::Diagonal => {
                        triangles.push([a, b, c]);
                        triangles.push([a, c, d]);
                    }
                    GridPattern::AntiDiagonal => {
                        triangles.push([a, b, d]);
                        triangles.push([b, c, d]);
                    }
                    GridPattern::Crossed => {
                        let m = vertices.len();
                        vertices.push([
                            origin[0] + (i as f64 + 0.5) * spacing,
                            origin[1] + (j as f64 + 0.5) * spacing,
                        ]);
                        triangles.extend([[a, b, m], [b, c, m], [c, d, m], [d, a, m]]);
                    }
                }
            }
        }
        Self::from_triangles(vertices, triangles)
    }

    /// Grid covering `[lo, hi]` with squares no wider than `spacing`.
    pub fn grid_covering(lo: Point, hi: Point, spacing: f64, pattern: GridPattern) -> Result<Self> {
        let nx = (((hi[0] - lo[0]) / spacing).ceil() as usize).max(1);
        let ny = (((hi[1] - lo[1]) / spacing).ceil() as usize).max(1);
        Self::grid(lo, nx, ny, spacing, pattern)
    }

    /// Copy with every vertex mapped by `x -> factor * x`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::validation(format!("scale factor must be positive, got {factor}")));
        }
        let vertices = self.vertices.iter().map(|p| [p[0] * factor, p[1] * factor]).collect();
        Self::from_triangles(vertices, self.triangles.clone())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }
    pub fn edge_lengths(&self) -> &[f64] {
        &self.edge_len
    }
    pub fn triangle_areas(&self) -> &[f64] {
        &self.tri_area
    }
    /// Signed edges bounding each triangle.
    pub fn triangle_edges(&self) -> &[[(usize, f64); 3]] {
        &self.tri_edges
    }
    /// Triangles incident to each edge with their incidence sign.
    pub fn edge_triangles(&self) -> &[Vec<(usize, f64)>] {
        &self.edge_tris
    }
    pub fn adjacency(&self) -> &[Vec<(usize, usize)>] {
        &self.adjacency
    }
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }
    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn zero_chain(&self, dim: u8) -> Chain {
        match dim {
            1 => Chain::zeros(1, self.num_edges()),
            _ => Chain::zeros(2, self.num_triangles()),
        }
    }

    pub fn check_chain(&self, c: &Chain) -> Result<()> {
        let want = match c.dim {
            1 => self.num_edges(),
            2 => self.num_triangles(),
            d => return Err(Error::Dimension(format!("unsupported chain dimension {d}"))),
        };
        if c.len() != want {
            return Err(Error::Dimension(format!(
                "{}-chain has {} coefficients, complex has {want} cells",
                c.dim,
                c.len()
            )));
        }
        if c.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("chain has non-finite coefficients"));
        }
        Ok(())
    }

    /// `Σ |c| · length` for 1-chains, `Σ |c| · area` for 2-chains.
    pub fn mass(&self, c: &Chain) -> f64 {
        let w = if c.dim == 1 { &self.edge_len } else { &self.tri_area };
        c.coeffs.iter().zip(w).map(|(a, l)| a.abs() * l).sum()
    }

    /// Boundary of a 2-chain.
    pub fn boundary(&self, t: &Chain) -> Result<Chain> {
        if t.dim != 2 {
            return Err(Error::Dimension(format!("boundary expects a 2-chain, got dimension {}", t.dim)));
        }
        self.check_chain(t)?;
        let mut out = self.zero_chain(1);
        for (tri, &c) in self.tri_edges.iter().zip(&t.coeffs) {
            if c != 0.0 {
                for &(e, s) in tri {
                    out.coeffs[e] += s * c;
                }
            }
        }
        Ok(out)
    }

    /// Boundary of a 1-chain as a vector over vertices (head minus tail).
    pub fn vertex_boundary(&self, x: &Chain) -> Result<Vec<f64>> {
        if x.dim != 1 {
            return Err(Error::Dimension("vertex boundary expects a 1-chain".into()));
        }
        self.check_chain(x)?;
        let mut out = vec![0.0; self.vertices.len()];
        for (&[u, v], &c) in self.edges.iter().zip(&x.coeffs) {
            out[u] -= c;
            out[v] += c;
        }
        Ok(out)
    }

    pub fn nearest_vertex(&self, p: Point) -> Option<usize> {
        self.locator.nearest(&self.vertices, p)
    }

    /// Whether `p` lies in the convex hull of the complex, up to `tol`.
    pub fn hull_contains(&self, p: Point, tol: f64) -> bool {
        let n = self.hull.len();
        if n < 3 {
            return false;
        }
        (0..n).all(|k| {
            let (a, b) = (self.hull[k], self.hull[(k + 1) % n]);
            let e = sub(b, a);
            cross(e, sub(p, a)) >= -tol * e[0].hypot(e[1])
        })
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [u, v] = self.edges[e];
        let (a, b) = (self.vertices[u], self.vertices[v]);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    pub fn triangle_centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }
}

/// Bucket grid for nearest-vertex queries.
#[derive(Debug, Clone)]
struct Locator {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    fn new(vertices: &[Point], used: &[bool], cell: f64) -> Self {
        let pts: Vec<usize> = (0..vertices.len()).filter(|&v| used[v]).collect();
        if pts.is_empty() {
            return Self {
                origin: [0.0, 0.0],
                cell: 1.0,
                nx: 0,
                ny: 0,
                buckets: Vec::new(),
            };
        }
        let mut lo = vertices[pts[0]];
        let mut hi = lo;
        for &v in &pts {
            let p = vertices[v];
            lo = [lo[0].min(p[0]), lo[1].min(p[1])];
            hi = [hi[0].max(p[0]), hi[1].max(p[1])];
        }
        let cell = cell.max(1e-12);
        let nx = ((hi[0] - lo[0]) / cell) as usize + 1;
        let ny = ((hi[1] - lo[1]) / cell) as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for &v in &pts {
            let (i, j) = Self::cell_of(lo, cell, nx, ny, vertices[v]);
            buckets[j * nx + i].push(v);
        }
        Self {
            origin: lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    fn cell_of(origin: Point, cell: f64, nx: usize, ny: usize, p: Point) -> (usize, usize) {
        let fi = ((p[0] - origin[0]) / cell).floor().clamp(0.0, (nx - 1) as f64);
        let fj = ((p[1] - origin[1]) / cell).floor().clamp(0.0, (ny - 1) as f64);
        (fi as usize, fj as usize)
    }

    /// Ties resolve to the lower vertex index.
    fn nearest(&self, vertices: &[Point], p: Point) -> Option<usize> {
        if self.buckets.is_empty() {
            return None;
        }
        let (ci, cj) = Self::cell_of(self.origin, self.cell, self.nx, self.ny, p);
        let mut best: Option<(f64, usize)> = None;
        let max_ring = self.nx.max(self.ny);
        for ring in 0..=max_ring {
            // unvisited cells are at least `ring - 1` cells away from the query
            if let Some((d, _)) = best {
                if (ring as f64 - 1.0) * self.cell > d.sqrt() {
                    break;
                }
            }
            let (i0, i1) = (ci.saturating_sub(ring), (ci + ring).min(self.nx - 1));
            let (j0, j1) = (cj.saturating_sub(ring), (cj + ring).min(self.ny - 1));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let on_ring = i + ring == ci || i == ci + ring || j + ring == cj || j == cj + ring;
                    if !on_ring {
                        continue;
                    }
                    for &v in &self.buckets[j * self.nx + i] {
                        let q = vertices[v];
                        let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
                        let better = match best {
                            None => true,
                            Some((bd, bv)) => d < bd || (d == bd && v < bv),
                        };
                        if better {
                            best = Some((d, v));
                        }
                    }
                }
            }
        }
        best.map(|(_, v)| v)
    }
}

/// Andrew's monotone chain; counter-clockwise without collinear points.
fn convex_hull(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 {
                let n = hull.len();
                if cross(sub(hull[n - 1], hull[n - 2]), sub(p, hull[n - 2])) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle() -> SimplicialComplex2 {
        SimplicialComplex2::from_triangles(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 2, 1]]).unwrap()
    }

    #[test]
    fn triangle_boundary_is_a_cycle() {
        let k = unit_triangle();
        let mut t = k.zero_chain(2);
        t.coeffs[0] = 1.0;
        let b = k.boundary(&t).unwrap();
        assert!(b.coeffs.iter().all(|c| c.abs() == 1.0));
        assert!(k.vertex_boundary(&b).unwrap().iter().all(|v| *v == 0.0));
        assert!((k.mass(&b) - (2.0 + 2f64.sqrt())).abs() < 1e-12);
        assert!((k.mass(&t) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn shared_edge_cancels() {
        let k = SimplicialComplex2::grid([0.0, 0.0], 1, 1, 1.0, GridPattern::Diagonal).unwrap();
        let t = Chain {
            dim: 2,
            coeffs: vec![1.0, 1.0],
        };
        let b = k.boundary(&t).unwrap();
        let diag = k.edges().iter().position(|e| *e == [0, 3]).unwrap();
        assert_eq!(b.coeffs[diag], 0.0);
        assert!((k.mass(&b) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_rejects_wrong_dimension() {
        let k = unit_triangle();
        assert!(k.boundary(&k.zero_chain(1)).is_err());
        assert!(k
            .boundary(&Chain {
                dim: 2,
                coeffs: vec![1.0, 2.0]
            })
            .is_err());
    }

    #[test]
    fn grids_have_expected_counts() {
        for (p, tris, edges) in [
            (GridPattern::Diagonal, 2 * 12, 16 + 15 + 12),
            (GridPattern::AntiDiagonal, 2 * 12, 16 + 15 + 12),
            (GridPattern::Crossed, 4 * 12, 16 + 15 + 4 * 12),
        ] {
            let k = SimplicialComplex2::grid([0.0, 0.0], 4, 3, 0.5, p).unwrap();
            assert_eq!(k.num_triangles(), tris);
            assert_eq!(k.num_edges(), edges);
            let area: f64 = k.triangle_areas().iter().sum();
            assert!((area - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nearest_vertex_and_hull() {
        let k = SimplicialComplex2::grid([0.0, 0.0], 10, 10, 0.1, GridPattern::Crossed).unwrap();
        let v = k.nearest_vertex([0.52, 0.31]).unwrap();
        assert!(super::super::polyline::dist(k.vertices()[v], [0.5, 0.3]) < 1e-12);
        let v = k.nearest_vertex([5.0, 5.0]).unwrap();
        assert!(super::super::polyline::dist(k.vertices()[v], [1.0, 1.0]) < 1e-12);
        let v = k.nearest_vertex([0.55, 0.55]).unwrap();
        assert!((k.vertices()[v][0] - 0.55).abs() < 1e-12);
        assert!(k.hull_contains([0.5, 0.5], 0.0));
        assert!(k.hull_contains([1.0, 0.0], 1e-9));
        assert!(!k.hull_contains([1.1, 0.5], 1e-9));
    }

    #[test]
    fn pattern_names_parse() {
        for n in GridPattern::NAMES {
            n.parse::<GridPattern>().unwrap();
        }
        assert!("hex".parse::<GridPattern>().is_err());
    }
}
