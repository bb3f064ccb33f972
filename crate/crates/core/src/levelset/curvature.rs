//! Discrete curvature of polygonal curves.
//!
//! The signed turning angle at a vertex is spread with uniform density over
//! its two segments, `Δθ / (a + b)` on each, which gives the smooth density
//! `θ′`. A polygon inscribed in a circle then carries constant `θ′` however
//! unevenly its vertices are spaced, so the curvature current stays close to
//! a cycle.
//! Turns sharper than the corner threshold are kept as atoms instead.

use serde::Serialize;

use crate::chain::polyline::{cross, dot, sub};
use crate::chain::{Point, PolylineCurrent};
use crate::error::Result;

pub const DEFAULT_CORNER_THRESHOLD: f64 = std::f64::consts::PI / 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub polyline: usize,
    pub vertex: usize,
    pub position: Point,
    /// Signed turn in `[-π, π]`.
    pub delta: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureCurrent {
    pub carrier: PolylineCurrent,
    /// `θ′` per segment of each carrier polyline, radians per unit length.
    pub smooth_density: Vec<Vec<f64>>,
    pub atoms: Vec<Atom>,
}

/// Signed angle from direction `a` to direction `b`.
#[inline]
pub fn turn_angle(a: Point, b: Point) -> f64 {
    cross(a, b).atan2(dot(a, b))
}

/// Turning angle at every vertex of a polyline; zero at open ends.
pub fn vertex_turns(p: &crate::chain::Polyline) -> Vec<f64> {
    let n = p.vertices.len();
    let mut turns = vec![0.0; n];
    let segs = p.segment_count();
    for v in 0..n {
        let (prev, next) = if p.closed {
            ((v + segs - 1) % segs, v)
        } else if v == 0 || v == n - 1 {
            continue;
        } else {
            (v - 1, v)
        };
        let (a0, a1) = p.segment(prev);
        let (b0, b1) = p.segment(next);
        turns[v] = turn_angle(sub(a1, a0), sub(b1, b0));
    }
    turns
}

pub fn curvature_density(p: &PolylineCurrent) -> Result<CurvatureCurrent> {
    curvature_density_with(p, DEFAULT_CORNER_THRESHOLD)
}

pub fn curvature_density_with(p: &PolylineCurrent, corner_threshold: f64) -> Result<CurvatureCurrent> {
    let mut smooth = Vec::with_capacity(p.polylines.len());
    let mut atoms = Vec::new();
    for (pi, poly) in p.polylines.iter().enumerate() {
        poly.validate()?;
        let turns = vertex_turns(poly);
        let smooth_turn: Vec<f64> = turns
            .iter()
            .enumerate()
            .map(|(v, &t)| {
                if t.abs() > corner_threshold {
                    atoms.push(Atom {
                        polyline: pi,
                        vertex: v,
                        position: poly.vertices[v],
                        delta: t,
                        weight: 1.0,
                    });
                    0.0
                } else {
                    t
                }
            })
            .collect();
        let segs = poly.segment_count();
        let mut dens = vec![0.0; segs];
        for (v, &t) in smooth_turn.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            // Turned vertices always have two incident segments.
            let (prev, next) = if poly.closed { ((v + segs - 1) % segs, v % segs) } else { (v - 1, v) };
            let share = t / (poly.segment_length(prev) + poly.segment_length(next));
            dens[prev] += share;
            dens[next] += share;
        }
        smooth.push(dens);
    }
    Ok(CurvatureCurrent {
        carrier: p.clone(),
        smooth_density: smooth,
        atoms,
    })
}

impl CurvatureCurrent {
    /// `Σ θ′ · length + Σ Δθ`, signed.
    pub fn total_turning(&self) -> f64 {
        self.smooth_integral(|v| v) + self.atoms.iter().map(|a| a.delta).sum::<f64>()
    }

    /// `Σ |θ′| · length + Σ |Δθ|`, unweighted.
    pub fn total_unsigned(&self) -> f64 {
        self.smooth_integral(f64::abs) + self.atoms.iter().map(|a| a.delta.abs()).sum::<f64>()
    }

    fn smooth_integral(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.carrier
            .polylines
            .iter()
            .zip(&self.smooth_density)
            .map(|(p, d)| (0..p.segment_count()).map(|k| g(d[k]) * p.segment_length(k)).sum::<f64>())
            .sum()
    }

    /// The signed curvature as a 1-current: each segment carries
    /// `weight · θ′`, and each atom is spread over its two segments with
    /// density `Δθ / (a + b)` so its total mass stays `|Δθ|`.
    /// `seg_weight[p][k]` scales segment `k` of polyline `p`; atoms use their own weight.
    pub fn as_current(&self, seg_weight: Option<&[Vec<f64>]>) -> PolylineCurrent {
        let mut out = self.carrier.clone();
        for (pi, p) in out.polylines.iter_mut().enumerate() {
            for k in 0..p.multiplicity.len() {
                let w = seg_weight.map_or(1.0, |sw| sw[pi][k]);
                p.multiplicity[k] = w * self.smooth_density[pi][k];
            }
        }
        for a in &self.atoms {
            let p = &mut out.polylines[a.polyline];
            let segs = p.segment_count();
            let incident: Vec<usize> = if p.closed {
                vec![(a.vertex + segs - 1) % segs, a.vertex]
            } else {
                vec![a.vertex - 1, a.vertex]
            };
            let total: f64 = incident.iter().map(|&k| p.segment_length(k)).sum();
            for k in incident {
                p.multiplicity[k] += a.weight * a.delta / total;
            }
        }
        out
    }
}
