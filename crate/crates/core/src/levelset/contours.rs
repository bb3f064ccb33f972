//! Marching-squares level-set extraction.
//!
//! Contours are oriented with `{f > c}` on the left. Crossings are linearly
//! interpolated along cell edges; saddle cells join the two crossings whose
//! shared region agrees with the sign of the cell average.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::chain::polyline::dist;
use crate::chain::{Point, Polyline, PolylineCurrent};
use crate::error::{Error, Result};
use crate::field::ScalarField;

pub const MAX_LEVELS: usize = 256;

#[derive(Debug, Clone, Serialize)]
pub struct LevelSetFamily {
    pub levels: Vec<f64>,
    /// Unit-multiplicity contours, one current per level.
    pub contours: Vec<PolylineCurrent>,
}

/// `k` midpoint levels `(j - 1/2) / k`, `j = 1..=k`.
pub fn default_levels(k: usize) -> Vec<f64> {
    (1..=k).map(|j| (j as f64 - 0.5) / k as f64).collect()
}

pub fn extract_level_sets(f: &ScalarField, levels: &[f64]) -> Result<LevelSetFamily> {
    if levels.is_empty() || levels.len() > MAX_LEVELS {
        return Err(Error::validation(format!(
            "need between 1 and {MAX_LEVELS} levels, got {}",
            levels.len()
        )));
    }
    if levels.iter().any(|c| !c.is_finite()) {
        return Err(Error::validation("non-finite level"));
    }
    let contours = levels.par_iter().map(|&c| contour(f, c)).collect();
    Ok(LevelSetFamily {
        levels: levels.to_vec(),
        contours,
    })
}

/// Grid-edge identifier for a crossing: horizontal edges `(i,j)-(i+1,j)` are
/// even, vertical edges `(i,j)-(i,j+1)` are odd.
#[inline]
fn hedge(w: usize, i: usize, j: usize) -> usize {
    2 * (j * w + i)
}
#[inline]
fn vedge(w: usize, i: usize, j: usize) -> usize {
    2 * (j * w + i) + 1
}

pub fn contour(f: &ScalarField, c: f64) -> PolylineCurrent {
    let (w, h) = (f.width(), f.height());
    let above = |i: usize, j: usize| f.get(i, j) > c;
    let mut points: HashMap<usize, Point> = HashMap::new();
    let mut crossing = |id: usize, a: (usize, usize), b: (usize, usize)| -> usize {
        points.entry(id).or_insert_with(|| {
            let (fa, fb) = (f.get(a.0, a.1), f.get(b.0, b.1));
            let t = ((c - fa) / (fb - fa)).clamp(0.0, 1.0);
            let (pa, pb) = (f.center(a.0, a.1), f.center(b.0, b.1));
            [pa.0 + t * (pb.0 - pa.0), pa.1 + t * (pb.1 - pa.1)]
        });
        id
    };
    // next[start crossing] = end crossing
    let mut next: HashMap<usize, usize> = HashMap::new();
    for j in 0..h - 1 {
        for i in 0..w - 1 {
            // counter-clockwise corners and the edges leaving each corner
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let inside = corners.map(|(a, b)| above(a, b));
            let n_in = inside.iter().filter(|x| **x).count();
            if n_in == 0 || n_in == 4 {
                continue;
            }
            let edge_ids = [hedge(w, i, j), vedge(w, i + 1, j), hedge(w, i, j + 1), vedge(w, i, j)];
            // crossings in counter-clockwise order: (edge, leaves the region?)
            let mut xs: Vec<(usize, bool)> = Vec::with_capacity(4);
            for k in 0..4 {
                let (a, b) = (corners[k], corners[(k + 1) % 4]);
                if inside[k] != inside[(k + 1) % 4] {
                    let id = crossing(edge_ids[k], a, b);
                    xs.push((id, inside[k]));
                }
            }
            if xs.len() == 2 {
                let (s, e) = if xs[0].1 { (xs[0].0, xs[1].0) } else { (xs[1].0, xs[0].0) };
                next.insert(s, e);
            } else {
                let avg = corners.iter().map(|&(a, b)| f.get(a, b)).sum::<f64>() / 4.0;
                let joined = avg > c;
                for k in 0..4 {
                    if xs[k].1 {
                        let partner = if joined { (k + 1) % 4 } else { (k + 3) % 4 };
                        next.insert(xs[k].0, xs[partner].0);
                    }
                }
            }
        }
    }
    link(next, &points, f.spacing())
}

fn link(mut next: HashMap<usize, usize>, points: &HashMap<usize, Point>, spacing: f64) -> PolylineCurrent {
    let ends: std::collections::HashSet<usize> = next.values().copied().collect();
    let mut starts: Vec<usize> = next.keys().copied().filter(|s| !ends.contains(s)).collect();
    starts.sort_unstable();
    let mut polylines = Vec::new();
    let tol = 1e-9 * spacing;
    let mut emit = |ids: Vec<usize>, closed: bool| {
        let mut verts: Vec<Point> = Vec::with_capacity(ids.len());
        for id in ids {
            let p = points[&id];
            if verts.last().is_none_or(|q| dist(*q, p) > tol) {
                verts.push(p);
            }
        }
        if closed {
            while verts.len() > 1
                && dist(verts[0], *verts.last().unwrap()) <= tol
            {
                verts.pop();
            }
        }
        if let Ok(p) = Polyline::uniform(verts, closed, 1.0) {
            polylines.push(p);
        }
    };
    for s in starts {
        let mut ids = vec![s];
        let mut cur = s;
        while let Some(n) = next.remove(&cur) {
            ids.push(n);
            cur = n;
        }
        emit(ids, false);
    }
    let mut rest: Vec<usize> = next.keys().copied().collect();
    rest.sort_unstable();
    for s in rest {
        if !next.contains_key(&s) {
            continue;
        }
        let mut ids = vec![s];
        let mut cur = s;
        while let Some(n) = next.remove(&cur) {
            if n == s {
                break;
            }
            ids.push(n);
            cur = n;
        }
        emit(ids, true);
    }
    PolylineCurrent { polylines }
}
