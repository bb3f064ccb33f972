//! Jump sets: curves across which the field changes abruptly.
//!
//! Candidate jumps are pixel edges whose one-sided difference quotient
//! reaches the threshold and is a local maximum across the edge. Connected
//! runs on the pixel-corner lattice are simplified to polylines, oriented so
//! that the higher side lies on the left, and annotated with one-sided traces.

use std::collections::HashMap;

use serde::Serialize;

use crate::chain::polyline::{dist, dot, simplify_vertices, sub};
use crate::chain::{Point, Polyline, PolylineCurrent};
use crate::error::{Error, Result};
use crate::field::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpParams {
    /// Curves shorter than this (domain units) are discarded.
    pub min_length: f64,
    /// Trace sampling offset from the curve, in pixels.
    pub trace_offset_px: f64,
    /// Douglas-Peucker tolerance for straightening lattice staircases, in pixels.
    pub simplify_px: f64,
}

impl Default for JumpParams {
    fn default() -> Self {
        Self {
            min_length: 0.0,
            trace_offset_px: 1.0,
            simplify_px: 1.0,
        }
    }
}

/// The discontinuity carrier with one-sided traces per segment; `f1` is the
/// value on the left of travel, `f2` on the right.
#[derive(Debug, Clone, Default, Serialize)]
pub struct JumpSet {
    pub curves: PolylineCurrent,
    pub f1: Vec<Vec<f64>>,
    pub f2: Vec<Vec<f64>>,
}

impl JumpSet {
    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.curves.polylines.iter().map(Polyline::length).sum()
    }

    /// `|f1 - f2|` per segment.
    pub fn heights(&self) -> Vec<Vec<f64>> {
        self.f1
            .iter()
            .zip(&self.f2)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect())
            .collect()
    }

    /// Re-samples traces on `f` and drops segments whose jump fell below
    /// `min_height`, splitting polylines where needed.
    pub fn resample(&self, f: &ScalarField, offset_px: f64, min_height: f64) -> JumpSet {
        let mut out = JumpSet::default();
        for p in &self.curves.polylines {
            let (a, b) = traces(f, p, offset_px);
            let keep: Vec<bool> = a.iter().zip(&b).map(|(x, y)| (x - y).abs() >= min_height.max(1e-12)).collect();
            out.push_runs(p, &a, &b, &keep);
        }
        out
    }

    fn push_runs(&mut self, p: &Polyline, a: &[f64], b: &[f64], keep: &[bool]) {
        let segs = p.segment_count();
        if keep.iter().all(|k| *k) {
            self.curves.polylines.push(p.clone());
            self.f1.push(a.to_vec());
            self.f2.push(b.to_vec());
            return;
        }
        // start after a dropped segment so closed curves unroll into open runs
        let start = if p.closed { (0..segs).find(|&k| !keep[k]).map_or(0, |k| k + 1) } else { 0 };
        let mut run: Vec<usize> = Vec::new();
        let flush = |run: &mut Vec<usize>, out: &mut JumpSet| {
            if !run.is_empty() {
                let mut verts: Vec<Point> = run.iter().map(|&k| p.segment(k).0).collect();
                verts.push(p.segment(*run.last().unwrap()).1);
                out.curves.polylines.push(Polyline {
                    vertices: verts,
                    closed: false,
                    multiplicity: vec![1.0; run.len()],
                });
                out.f1.push(run.iter().map(|&k| a[k]).collect());
                out.f2.push(run.iter().map(|&k| b[k]).collect());
                run.clear();
            }
        };
        for off in 0..segs {
            let k = (start + off) % segs;
            if keep[k] {
                run.push(k);
            } else {
                flush(&mut run, self);
            }
        }
        flush(&mut run, self);
    }

    pub fn extend(&mut self, other: JumpSet) {
        self.curves.extend(other.curves);
        self.f1.extend(other.f1);
        self.f2.extend(other.f2);
    }

    /// Per-pixel weight that is 0 within `radius_px` pixels of a jump and 1
    /// elsewhere; derivative-based integrands are multiplied by it.
    pub fn pixel_mask(&self, width: usize, height: usize, spacing: f64, radius_px: f64) -> Vec<f64> {
        let mut mask = vec![1.0; width * height];
        let r = radius_px * spacing;
        for p in &self.curves.polylines {
            for k in 0..p.segment_count() {
                let (a, b) = p.segment(k);
                for_pixels_near(a, b, r, width, height, spacing, |i, j, d| {
                    if d <= r {
                        mask[j * width + i] = 0.0;
                    }
                });
            }
        }
        mask
    }

    /// Minimum distance from `q` to any jump segment.
    pub fn distance_to(&self, q: Point) -> f64 {
        let mut best = f64::INFINITY;
        for p in &self.curves.polylines {
            for k in 0..p.segment_count() {
                let (a, b) = p.segment(k);
                best = best.min(point_segment(q, a, b).0);
            }
        }
        best
    }
}

/// Distance from `q` to segment `ab`, the foot point, and the side
/// (`+1` left of travel, `-1` right).
pub(crate) fn point_segment(q: Point, a: Point, b: Point) -> (f64, Point, f64) {
    let ab = sub(b, a);
    let l2 = dot(ab, ab);
    let t = (dot(sub(q, a), ab) / l2).clamp(0.0, 1.0);
    let foot = [a[0] + t * ab[0], a[1] + t * ab[1]];
    let side = if crate::chain::polyline::cross(ab, sub(q, a)) >= 0.0 { 1.0 } else { -1.0 };
    (dist(q, foot), foot, side)
}

/// Calls `visit(i, j, distance)` for pixels whose centre may lie within `r` of segment `ab`.
pub(crate) fn for_pixels_near(
    a: Point,
    b: Point,
    r: f64,
    width: usize,
    height: usize,
    h: f64,
    mut visit: impl FnMut(usize, usize, f64),
) {
    let lo = |v: f64| ((v / h - 0.5).floor().max(0.0)) as usize;
    let hi = |v: f64, n: usize| (((v / h - 0.5).ceil()).max(0.0) as usize).min(n - 1);
    let (i0, i1) = (lo(a[0].min(b[0]) - r), hi(a[0].max(b[0]) + r, width));
    let (j0, j1) = (lo(a[1].min(b[1]) - r), hi(a[1].max(b[1]) + r, height));
    for j in j0..=j1 {
        for i in i0..=i1 {
            let c = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
            visit(i, j, point_segment(c, a, b).0);
        }
    }
}

fn traces(f: &ScalarField, p: &Polyline, offset_px: f64) -> (Vec<f64>, Vec<f64>) {
    let off = offset_px * f.spacing();
    (0..p.segment_count())
        .map(|k| {
            let (a, b) = p.segment(k);
            let d = sub(b, a);
            let l = d[0].hypot(d[1]);
            let n = [-d[1] / l, d[0] / l];
            let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            (
                f.sample(m[0] + off * n[0], m[1] + off * n[1]),
                f.sample(m[0] - off * n[0], m[1] - off * n[1]),
            )
        })
        .unzip()
}

/// Pixel-edge jump candidates with non-maximum suppression across the edge.
/// Returns lattice edges as pairs of corner ids `j * (w + 1) + i`.
fn candidate_edges(f: &ScalarField, grad_threshold: f64) -> Vec<(usize, usize)> {
    let (w, hgt, h) = (f.width(), f.height(), f.spacing());
    let cid = |i: usize, j: usize| j * (w + 1) + i;
    let dx = |i: usize, j: usize| (f.get(i + 1, j) - f.get(i, j)).abs();
    let dy = |i: usize, j: usize| (f.get(i, j + 1) - f.get(i, j)).abs();
    let mut out = Vec::new();
    for j in 0..hgt {
        for i in 0..w - 1 {
            let d = dx(i, j);
            if d / h < grad_threshold {
                continue;
            }
            let left = if i > 0 { dx(i - 1, j) } else { 0.0 };
            let right = if i + 2 < w { dx(i + 1, j) } else { 0.0 };
            if d >= left && d > right {
                out.push((cid(i + 1, j), cid(i + 1, j + 1)));
            }
        }
    }
    for j in 0..hgt - 1 {
        for i in 0..w {
            let d = dy(i, j);
            if d / h < grad_threshold {
                continue;
            }
            let below = if j > 0 { dy(i, j - 1) } else { 0.0 };
            let above = if j + 2 < hgt { dy(i, j + 1) } else { 0.0 };
            if d >= below && d > above {
                out.push((cid(i, j + 1), cid(i + 1, j + 1)));
            }
        }
    }
    out
}

/// Splits an edge set into maximal chains between branch or end nodes, then cycles.
fn chains(edges: &[(usize, usize)]) -> Vec<(Vec<usize>, bool)> {
    let mut adj: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
    for (k, &(a, b)) in edges.iter().enumerate() {
        adj.entry(a).or_default().push((b, k));
        adj.entry(b).or_default().push((a, k));
    }
    let mut used = vec![false; edges.len()];
    let mut nodes: Vec<usize> = adj.keys().copied().collect();
    nodes.sort_unstable();
    let mut out = Vec::new();
    let walk = |start: usize, first: (usize, usize), used: &mut Vec<bool>| -> (Vec<usize>, bool) {
        let mut path = vec![start];
        let (mut cur, mut e) = first;
        loop {
            used[e] = true;
            path.push(cur);
            if cur == start {
                path.pop();
                return (path, true);
            }
            let nbrs = &adj[&cur];
            if nbrs.len() != 2 {
                return (path, false);
            }
            match nbrs.iter().find(|(_, k)| !used[*k]) {
                Some(&(n, k)) => {
                    cur = n;
                    e = k;
                }
                None => return (path, false),
            }
        }
    };
    for &v in &nodes {
        if adj[&v].len() == 2 {
            continue;
        }
        for &(n, k) in &adj[&v].clone() {
            if !used[k] {
                out.push(walk(v, (n, k), &mut used));
            }
        }
    }
    for &v in &nodes {
        for &(n, k) in &adj[&v].clone() {
            if !used[k] {
                out.push(walk(v, (n, k), &mut used));
            }
        }
    }
    out
}

/// Jump curves from thresholded, non-max-suppressed pixel-edge differences,
/// oriented so the higher trace lies on the left.
pub fn extract_jump_set(f: &ScalarField, grad_threshold: f64, params: &JumpParams) -> Result<JumpSet> {
    if !(grad_threshold > 0.0) {
        return Err(Error::validation(format!("gradient threshold must be positive, got {grad_threshold}")));
    }
    let (w, h) = (f.width(), f.spacing());
    let corner = |id: usize| [(id % (w + 1)) as f64 * h, (id / (w + 1)) as f64 * h];
    let tol = params.simplify_px * h;
    let mut out = JumpSet::default();
    for (ids, closed) in chains(&candidate_edges(f, grad_threshold)) {
        let pts: Vec<Point> = ids.iter().map(|&id| corner(id)).collect();
        let verts = simplify_vertices(&pts, closed, tol);
        let Ok(mut poly) = Polyline::uniform(verts, closed, 1.0) else {
            continue;
        };
        if poly.length() < params.min_length {
            continue;
        }
        let (a, b) = traces(f, &poly, params.trace_offset_px);
        let lift: f64 = a.iter().zip(&b).zip(0..).map(|((x, y), k)| (x - y) * poly.segment_length(k)).sum();
        let (a, b) = if lift < 0.0 {
            poly = poly.reversed();
            traces(f, &poly, params.trace_offset_px)
        } else {
            (a, b)
        };
        let keep: Vec<bool> = a.iter().zip(&b).map(|(x, y)| x != y).collect();
        out.push_runs(&poly, &a, &b, &keep);
    }
    Ok(out)
}

/// Replaces `f` inside a band of `band_px` pixels around `cut` by the value
/// found just outside the band on the same side, producing a sharp step.
pub fn sharpen_across(f: &ScalarField, cut: &Polyline, band_px: f64) -> ScalarField {
    let (w, hgt, h) = (f.width(), f.height(), f.spacing());
    let r = band_px * h;
    // nearest (distance, foot, side, segment direction) per pixel in the band
    let mut best: HashMap<usize, (f64, Point, f64, Point)> = HashMap::new();
    for k in 0..cut.segment_count() {
        let (a, b) = cut.segment(k);
        let d = sub(b, a);
        let l = d[0].hypot(d[1]);
        let n = [-d[1] / l, d[0] / l];
        for_pixels_near(a, b, r, w, hgt, h, |i, j, _| {
            let c = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
            let (dd, foot, side) = point_segment(c, a, b);
            if dd <= r {
                let e = best.entry(j * w + i).or_insert((f64::INFINITY, foot, side, n));
                if dd < e.0 {
                    *e = (dd, foot, side, n);
                }
            }
        });
    }
    let mut out = f.clone();
    let reach = r + 0.5 * h;
    let mut keys: Vec<usize> = best.keys().copied().collect();
    keys.sort_unstable();
    for idx in keys {
        let (_, foot, side, n) = best[&idx];
        let q = [foot[0] + side * reach * n[0], foot[1] + side * reach * n[1]];
        out.set(idx % w, idx / w, f.sample(q[0], q[1]));
    }
    out
}

/// Outcome of [`introduce_discontinuity`].
#[derive(Debug, Clone)]
pub struct CutResult {
    pub field: ScalarField,
    pub jumps: JumpSet,
    pub accepted: Vec<Polyline>,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CutParams {
    pub grad_threshold: f64,
    pub min_length: f64,
    pub min_height: f64,
    pub band_px: f64,
    /// Only the longest candidates are tried.
    pub max_candidates: usize,
    pub jump: JumpParams,
}

impl Default for CutParams {
    fn default() -> Self {
        Self {
            grad_threshold: 1.0,
            min_length: 0.0,
            min_height: 0.1,
            band_px: 2.0,
            max_candidates: 16,
            jump: JumpParams::default(),
        }
    }
}

/// Tries the longest candidate cuts in turn and keeps it only when `energy` strictly
/// decreases after sharpening `f` across it. Candidates that already lie on
/// an existing jump are skipped.
pub fn introduce_discontinuity(
    f: &ScalarField,
    existing: &JumpSet,
    params: &CutParams,
    energy: &dyn Fn(&ScalarField, &JumpSet) -> Result<f64>,
) -> Result<CutResult> {
    if !(params.grad_threshold > 0.0 && params.min_height > 0.0 && params.min_length >= 0.0) {
        return Err(Error::validation("cut thresholds must be positive"));
    }
    let jp = JumpParams {
        min_length: params.min_length,
        ..params.jump
    };
    let candidates = extract_jump_set(f, params.grad_threshold, &jp)?;
    let mut field = f.clone();
    let mut jumps = existing.clone();
    let mut e_cur = energy(&field, &jumps)?;
    let mut accepted = Vec::new();
    let near = 1.5 * f.spacing();
    let all_heights = candidates.heights();
    let mut order: Vec<usize> = (0..candidates.curves.polylines.len()).collect();
    order.sort_by(|&a, &b| {
        let (la, lb) = (candidates.curves.polylines[a].length(), candidates.curves.polylines[b].length());
        lb.total_cmp(&la).then(a.cmp(&b))
    });
    order.truncate(params.max_candidates);
    for k in order {
        let poly = &candidates.curves.polylines[k];
        let heights = &all_heights[k];
        let mean_h = heights.iter().sum::<f64>() / heights.len() as f64;
        if mean_h < params.min_height {
            continue;
        }
        let mid = poly.segment(0);
        let probe = [0.5 * (mid.0[0] + mid.1[0]), 0.5 * (mid.0[1] + mid.1[1])];
        if jumps.distance_to(probe) <= near {
            continue;
        }
        let trial = sharpen_across(&field, poly, params.band_px);
        let mut trial_jumps = jumps.clone();
        let single = JumpSet {
            curves: PolylineCurrent::single(poly.clone()),
            f1: vec![vec![0.0; poly.segment_count()]],
            f2: vec![vec![0.0; poly.segment_count()]],
        };
        trial_jumps.extend(single.resample(&trial, params.jump.trace_offset_px, params.min_height));
        let e_new = energy(&trial, &trial_jumps)?;
        if e_new < e_cur {
            field = trial;
            jumps = trial_jumps;
            e_cur = e_new;
            accepted.push(poly.clone());
        }
    }
    Ok(CutResult {
        field,
        jumps,
        accepted,
        energy: e_cur,
    })
}
