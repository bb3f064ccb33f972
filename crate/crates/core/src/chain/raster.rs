//! Routing polyline currents onto the edges of a complex.
//!
//! Each polyline vertex snaps to its nearest complex vertex. Segments whose
//! ends snap to the same vertex are merged into the next piece with a
//! length-weighted multiplicity, and every piece is routed along a shortest
//! edge path. Among paths of equal length the one closest to the original
//! segment wins; remaining ties go to the lower edge index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::complex::{Chain, SimplicialComplex2};
use super::polyline::{dist, segment_distance, Point, PolylineCurrent};
use crate::error::{Error, Result};

/// Weight of the distance-to-segment penalty relative to edge length.
const DEVIATION_WEIGHT: f64 = 1e-4;

pub fn rasterize_to_chain(c: &PolylineCurrent, k: &SimplicialComplex2) -> Result<Chain> {
    let mut router = Router::new(k);
    let mut out = k.zero_chain(1);
    let tol = 1e-9 * k.edge_lengths().iter().cloned().fold(0.0, f64::max).max(1e-300);
    let outside: Vec<Point> = c
        .polylines
        .iter()
        .flat_map(|p| p.vertices.iter())
        .filter(|v| !k.hull_contains(**v, tol))
        .copied()
        .collect();
    if !outside.is_empty() {
        return Err(Error::OutsideComplex(outside));
    }
    for p in &c.polylines {
        let snaps: Vec<usize> = p
            .vertices
            .iter()
            .map(|v| k.nearest_vertex(*v).expect("hull check guarantees vertices"))
            .collect();
        let n = p.vertices.len();
        let mut pieces: Vec<Piece> = Vec::new();
        let mut acc = Piece {
            from: snaps[0],
            to: snaps[0],
            a: p.vertices[0],
            b: p.vertices[0],
            weighted: 0.0,
            length: 0.0,
        };
        for s in 0..p.segment_count() {
            let len = p.segment_length(s);
            acc.weighted += p.multiplicity[s] * len;
            acc.length += len;
            let end = (s + 1) % n;
            if snaps[end] != acc.from {
                acc.to = snaps[end];
                acc.b = p.vertices[end];
                pieces.push(acc);
                acc = Piece {
                    from: snaps[end],
                    to: snaps[end],
                    a: p.vertices[end],
                    b: p.vertices[end],
                    weighted: 0.0,
                    length: 0.0,
                };
            }
        }
        // segments that collapsed onto the final vertex join the last piece
        if acc.length > 0.0 {
            if let Some(last) = pieces.last_mut() {
                last.weighted += acc.weighted;
                last.length += acc.length;
            }
        }
        for piece in &pieces {
            let m = piece.weighted / piece.length;
            if m == 0.0 {
                continue;
            }
            // route from the lower vertex so that reversal negates the chain exactly
            let (path, flip) = if piece.from <= piece.to {
                (router.route(piece.from, piece.to, piece.a, piece.b), 1.0)
            } else {
                (router.route(piece.to, piece.from, piece.b, piece.a), -1.0)
            };
            for (e, s) in path {
                out.coeffs[e] += flip * s * m;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    from: usize,
    to: usize,
    a: Point,
    b: Point,
    weighted: f64,
    length: f64,
}

#[derive(PartialEq)]
struct Entry {
    f: f64,
    node: usize,
}
impl Eq for Entry {}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.node.cmp(&self.node))
    }
}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A* over the edge graph with scratch buffers reused between queries.
struct Router<'a> {
    k: &'a SimplicialComplex2,
    cost: Vec<f64>,
    pred: Vec<(usize, usize)>,
    done: Vec<bool>,
    touched: Vec<usize>,
}

impl<'a> Router<'a> {
    fn new(k: &'a SimplicialComplex2) -> Self {
        let n = k.vertices().len();
        Self {
            k,
            cost: vec![f64::INFINITY; n],
            pred: vec![(usize::MAX, usize::MAX); n],
            done: vec![false; n],
            touched: Vec::new(),
        }
    }

    /// Signed edges of the chosen path from `s` to `t`.
    fn route(&mut self, s: usize, t: usize, a: Point, b: Point) -> Vec<(usize, f64)> {
        for &v in &self.touched {
            self.cost[v] = f64::INFINITY;
            self.pred[v] = (usize::MAX, usize::MAX);
            self.done[v] = false;
        }
        self.touched.clear();
        let verts = self.k.vertices();
        let target = verts[t];
        let mut heap = BinaryHeap::new();
        self.cost[s] = 0.0;
        self.touched.push(s);
        heap.push(Entry {
            f: dist(verts[s], target),
            node: s,
        });
        while let Some(Entry { node: u, .. }) = heap.pop() {
            if self.done[u] {
                continue;
            }
            self.done[u] = true;
            if u == t {
                break;
            }
            for &(w, e) in &self.k.adjacency()[u] {
                if self.done[w] {
                    continue;
                }
                let mid = self.k.edge_midpoint(e);
                let step = self.k.edge_lengths()[e]
                    + DEVIATION_WEIGHT * segment_distance(mid, a, b);
                let c = self.cost[u] + step;
                if c < self.cost[w] {
                    if self.cost[w].is_infinite() {
                        self.touched.push(w);
                    }
                    self.cost[w] = c;
                    self.pred[w] = (u, e);
                    heap.push(Entry {
                        f: c + dist(verts[w], target),
                        node: w,
                    });
                }
            }
        }
        let mut path = Vec::new();
        let mut v = t;
        while v != s {
            let (u, e) = self.pred[v];
            assert!(u != usize::MAX, "complex edge graph is disconnected");
            let sign = if self.k.edges()[e][0] == u { 1.0 } else { -1.0 };
            path.push((e, sign));
            v = u;
        }
        path.reverse();
        path
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::complex::GridPattern;
    use crate::chain::polyline::{regular_polygon, Polyline};

    fn seg(a: Point, b: Point, m: f64) -> PolylineCurrent {
        PolylineCurrent::single(Polyline::new(vec![a, b], false, vec![m]).unwrap())
    }

    #[test]
    fn axis_aligned_segment_is_exact() {
        let k = SimplicialComplex2::grid([0.0, 0.0], 8, 8, 0.125, GridPattern::Diagonal).unwrap();
        let c = seg([0.25, 0.5], [0.875, 0.5], 2.0);
        let x = rasterize_to_chain(&c, &k).unwrap();
        assert!((k.mass(&x) - c.mass()).abs() < 1e-12);
        let vb = k.vertex_boundary(&x).unwrap();
        let tail = k.nearest_vertex([0.25, 0.5]).unwrap();
        let head = k.nearest_vertex([0.875, 0.5]).unwrap();
        assert!((vb[tail] + 2.0).abs() < 1e-12 && (vb[head] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn matching_diagonal_is_exact() {
        let k = SimplicialComplex2::grid([0.0, 0.0], 8, 8, 0.125, GridPattern::Diagonal).unwrap();
        let c = seg([0.125, 0.125], [0.875, 0.875], 1.0);
        let x = rasterize_to_chain(&c, &k).unwrap();
        assert!((k.mass(&x) - c.mass()).abs() < 1e-12);
        assert_eq!(x.coeffs.iter().filter(|v| **v != 0.0).count(), 6);
    }

    #[test]
    fn empty_current_gives_zero_chain() {
        let k = SimplicialComplex2::grid([0.0, 0.0], 2, 2, 1.0, GridPattern::Crossed).unwrap();
        assert!(rasterize_to_chain(&PolylineCurrent::default(), &k).unwrap().is_zero());
    }

    #[test]
    fn outside_vertices_are_listed() {
        let k = SimplicialComplex2::grid([0.0, 0.0], 2, 2, 1.0, GridPattern::Crossed).unwrap();
        match rasterize_to_chain(&seg([0.5, 0.5], [3.0, 0.5], 1.0), &k) {
            Err(Error::OutsideComplex(v)) => assert_eq!(v, vec![[3.0, 0.5]]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn closed_curve_rasterizes_to_cycle_with_bounded_mass() {
        let k = SimplicialComplex2::grid([0.0, 0.0], 64, 64, 1.0 / 64.0, GridPattern::Crossed).unwrap();
        let c = PolylineCurrent::single(regular_polygon([0.5, 0.5], 0.3, 64, 1.0));
        let x = rasterize_to_chain(&c, &k).unwrap();
        assert!(k.vertex_boundary(&x).unwrap().iter().all(|v| v.abs() < 1e-12));
        let ratio = k.mass(&x) / c.mass();
        assert!((ratio - 1.0).abs() < 0.15, "{ratio}");
    }

    #[test]
    fn reversed_current_negates_chain() {
        let k = SimplicialComplex2::grid([0.0, 0.0], 16, 16, 1.0 / 16.0, GridPattern::Crossed).unwrap();
        let p = regular_polygon([0.5, 0.5], 0.3, 24, 1.5);
        let x = rasterize_to_chain(&PolylineCurrent::single(p.clone()), &k).unwrap();
        let y = rasterize_to_chain(&PolylineCurrent::single(p.reversed()), &k).unwrap();
        assert!(x.add(&y).unwrap().coeffs.iter().all(|v| v.abs() < 1e-12));
    }
}
