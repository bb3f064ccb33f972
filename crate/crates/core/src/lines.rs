//! Line detection in position-direction space.
//!
//! A 1-current in the plane is lifted to `A × S¹` by attaching to every
//! segment its direction angle. Pushing the lifted mass forward onto a line
//! `L` and reading the directions perpendicular to `L` shows where straight
//! pieces sit; collinear pieces separated by short gaps are joined when a
//! connecting segment costs less than the boundary it removes.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::chain::polyline::{dist, dot, sub};
use crate::chain::{Point, Polyline, PolylineCurrent, SegmentTuple};
use crate::error::{Error, Result};

/// Endpoints closer than this are treated as the same point.
const JOIN_TOL: f64 = 1e-9;

/// Angle in `[0, 2π)`.
pub fn wrap_angle(t: f64) -> f64 {
    let w = t.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Distance on S¹: `min(|Δθ|, 2π − |Δθ|)`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Signed turn from `a` to `b` in `(−π, π]`.
fn signed_turn(a: f64, b: f64) -> f64 {
    let d = (b - a).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftedSegment {
    /// Oriented so that `end − start` points along `theta`.
    pub start: Point,
    pub end: Point,
    /// Direction angle in `[0, 2π)`.
    pub theta: f64,
    /// Unsigned multiplicity; negative input multiplicities flip the segment.
    pub multiplicity: f64,
}

impl LiftedSegment {
    fn new(start: Point, end: Point, multiplicity: f64) -> Self {
        let (start, end) = if multiplicity < 0.0 { (end, start) } else { (start, end) };
        let d = sub(end, start);
        Self {
            start,
            end,
            theta: wrap_angle(d[1].atan2(d[0])),
            multiplicity: multiplicity.abs(),
        }
    }

    pub fn midpoint(&self) -> Point {
        [0.5 * (self.start[0] + self.end[0]), 0.5 * (self.start[1] + self.end[1])]
    }

    pub fn length(&self) -> f64 {
        dist(self.start, self.end)
    }

    pub fn mass(&self) -> f64 {
        self.multiplicity * self.length()
    }

    fn unit(&self) -> Point {
        [self.theta.cos(), self.theta.sin()]
    }
}

/// Motion along an S¹ fiber at a fixed position: a corner of the curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberArc {
    pub position: Point,
    pub theta_from: f64,
    /// Signed turn in `(−π, π]`.
    pub sweep: f64,
    pub multiplicity: f64,
}

impl FiberArc {
    /// Mass charged for the turn: `|Δθ| · turn_cost` per unit multiplicity.
    pub fn cost(&self, turn_cost: f64) -> f64 {
        self.sweep.abs() * turn_cost * self.multiplicity
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LiftedCurrent {
    pub segments: Vec<LiftedSegment>,
    pub arcs: Vec<FiberArc>,
}

impl LiftedCurrent {
    /// Mass of the lifted segments; fiber arcs are bookkeeping and excluded.
    pub fn mass(&self) -> f64 {
        self.segments.iter().map(LiftedSegment::mass).sum()
    }

    pub fn total_sweep(&self) -> f64 {
        self.arcs.iter().map(|a| a.sweep.abs()).sum()
    }

    pub fn to_segment_tuples(&self) -> Vec<SegmentTuple> {
        self.segments
            .iter()
            .map(|s| {
                let m = s.midpoint();
                let d = sub(s.end, s.start);
                SegmentTuple {
                    x: m[0],
                    y: m[1],
                    a: s.multiplicity * d[0],
                    b: s.multiplicity * d[1],
                }
            })
            .collect()
    }

    pub fn to_current(&self) -> Result<PolylineCurrent> {
        let polylines = self
            .segments
            .iter()
            .filter(|s| s.length() > 0.0)
            .map(|s| Polyline::new(vec![s.start, s.end], false, vec![s.multiplicity]))
            .collect::<Result<Vec<_>>>()?;
        PolylineCurrent::new(polylines)
    }
}

/// One lifted segment per nonzero polyline segment, and a fiber arc at every
/// vertex where two consecutive segments meet.
pub fn lift(c: &PolylineCurrent) -> LiftedCurrent {
    let mut out = LiftedCurrent::default();
    for p in &c.polylines {
        let segs: Vec<LiftedSegment> = (0..p.segment_count())
            .filter(|&k| p.multiplicity[k] != 0.0 && p.segment_length(k) > 0.0)
            .map(|k| {
                let (a, b) = p.segment(k);
                LiftedSegment::new(a, b, p.multiplicity[k])
            })
            .collect();
        let n = segs.len();
        let joins = if p.closed { n } else { n.saturating_sub(1) };
        for k in 0..joins {
            let (s, t) = (&segs[k], &segs[(k + 1) % n]);
            if dist(s.end, t.start) > JOIN_TOL {
                continue;
            }
            out.arcs.push(FiberArc {
                position: s.end,
                theta_from: s.theta,
                sweep: signed_turn(s.theta, t.theta),
                multiplicity: s.multiplicity.min(t.multiplicity),
            });
        }
        out.segments.extend(segs);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistogramBins {
    /// Direction bins over S¹; bin `k` is centred on `2πk / direction_bins`.
    pub direction_bins: usize,
    /// Width of a position bin along `L`, in domain units.
    pub position_bin_width: f64,
}

impl Default for HistogramBins {
    fn default() -> Self {
        Self {
            direction_bins: 36,
            position_bin_width: 1.0 / 64.0,
        }
    }
}

impl HistogramBins {
    pub fn validate(&self) -> Result<()> {
        if self.direction_bins < 4 {
            return Err(Error::validation(format!(
                "direction_bins must be at least 4, got {}",
                self.direction_bins
            )));
        }
        if !(self.position_bin_width > 0.0 && self.position_bin_width.is_finite()) {
            return Err(Error::validation(format!(
                "position_bin_width must be positive, got {}",
                self.position_bin_width
            )));
        }
        Ok(())
    }

    pub fn direction_width(&self) -> f64 {
        TAU / self.direction_bins as f64
    }

    pub fn direction_bin(&self, theta: f64) -> usize {
        ((wrap_angle(theta) / self.direction_width()).round() as usize) % self.direction_bins
    }

    pub fn position_bin(&self, p: f64) -> i64 {
        (p / self.position_bin_width).floor() as i64
    }
}

/// Lifted mass pushed forward to `L × S¹`, where `L` is the line through the
/// origin with direction `axis_angle` (0 is the x-axis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionHistogram {
    pub axis_angle: f64,
    pub bins: HistogramBins,
    /// Index of the first position bin; bin `k` covers `[k w, (k + 1) w)`.
    pub first_bin: i64,
    /// `mass[p][d]` for position bin `first_bin + p` and direction bin `d`.
    pub mass: Vec<Vec<f64>>,
}

pub fn project_direction_mass(l: &LiftedCurrent, axis_angle: f64, bins: &HistogramBins) -> Result<DirectionHistogram> {
    bins.validate()?;
    let axis = [axis_angle.cos(), axis_angle.sin()];
    let cells: Vec<(i64, usize, f64)> = l
        .segments
        .iter()
        .map(|s| (bins.position_bin(dot(s.midpoint(), axis)), bins.direction_bin(s.theta), s.mass()))
        .collect();
    let (lo, hi) = cells
        .iter()
        .fold((i64::MAX, i64::MIN), |(lo, hi), &(p, _, _)| (lo.min(p), hi.max(p)));
    let (first_bin, count) = if cells.is_empty() { (0, 0) } else { (lo, (hi - lo + 1) as usize) };
    let mut mass = vec![vec![0.0; bins.direction_bins]; count];
    for (p, d, m) in cells {
        mass[(p - first_bin) as usize][d] += m;
    }
    Ok(DirectionHistogram {
        axis_angle,
        bins: *bins,
        first_bin,
        mass,
    })
}

/// Histograms for several axes, computed in parallel.
pub fn project_axes(l: &LiftedCurrent, axes: &[f64], bins: &HistogramBins) -> Result<Vec<DirectionHistogram>> {
    axes.par_iter().map(|&a| project_direction_mass(l, a, bins)).collect()
}

/// A cell of a histogram holding mass perpendicular to its axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spike {
    pub axis_angle: f64,
    pub position_bin: i64,
    pub direction_bin: usize,
    pub mass: f64,
}

impl DirectionHistogram {
    pub fn total_mass(&self) -> f64 {
        self.mass.iter().flatten().sum()
    }

    /// The two direction bins perpendicular to `L`, one per orientation.
    pub fn perpendicular_bins(&self) -> [usize; 2] {
        [
            self.bins.direction_bin(self.axis_angle + 0.5 * PI),
            self.bins.direction_bin(self.axis_angle + 1.5 * PI),
        ]
    }

    /// Per position bin, the mass in the two perpendicular direction bins.
    pub fn perpendicular_profile(&self) -> Vec<(i64, [f64; 2])> {
        let [u, v] = self.perpendicular_bins();
        self.mass
            .iter()
            .enumerate()
            .map(|(p, row)| (self.first_bin + p as i64, [row[u], row[v]]))
            .collect()
    }

    pub fn perpendicular_cells(&self) -> Vec<Spike> {
        let dirs = self.perpendicular_bins();
        self.perpendicular_profile()
            .into_iter()
            .flat_map(|(p, m)| {
                dirs.into_iter().zip(m).map(move |(d, mass)| Spike {
                    axis_angle: self.axis_angle,
                    position_bin: p,
                    direction_bin: d,
                    mass,
                })
            })
            .filter(|s| s.mass > 0.0)
            .collect()
    }

    /// Mass per position bin summed over all directions.
    pub fn position_marginal(&self) -> Vec<f64> {
        self.mass.iter().map(|row| row.iter().sum()).collect()
    }

    /// `(frequency, amplitude)` of the position marginal, in cycles per unit
    /// length along `L`, for the non-negative frequencies.
    pub fn frequency_spectrum(&self) -> Vec<(f64, f64)> {
        let marginal = self.position_marginal();
        let n = marginal.len();
        if n == 0 {
            return Vec::new();
        }
        let mut buf: Vec<Complex<f64>> = marginal.iter().map(|&m| Complex::new(m, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let span = n as f64 * self.bins.position_bin_width;
        buf.iter().take(n / 2 + 1).enumerate().map(|(k, c)| (k as f64 / span, c.norm())).collect()
    }

    /// CSV with header `position_bin,direction_bin,mass`, nonzero cells only.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["position_bin", "direction_bin", "mass"]).expect("in-memory write");
        for (p, row) in self.mass.iter().enumerate() {
            for (d, &m) in row.iter().enumerate() {
                if m != 0.0 {
                    w.write_record([(self.first_bin + p as i64).to_string(), d.to_string(), format!("{m:.16e}")])
                        .expect("in-memory write");
                }
            }
        }
        w.into_inner().expect("in-memory write")
    }
}

/// Perpendicular cells holding at least `rel` of the largest such cell across
/// all histograms.
pub fn spikes(hists: &[DirectionHistogram], rel: f64) -> Vec<Spike> {
    let cells: Vec<Spike> = hists.iter().flat_map(DirectionHistogram::perpendicular_cells).collect();
    let max = cells.iter().map(|s| s.mass).fold(0.0, f64::max);
    cells.into_iter().filter(|s| max > 0.0 && s.mass >= rel * max).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionPenalty {
    /// Cost per unit of boundary multiplicity at a free endpoint.
    pub boundary_cost: f64,
    /// Multiplier on angular motion along S¹ fibers.
    pub turn_cost: f64,
}

impl Default for CompletionPenalty {
    fn default() -> Self {
        Self {
            boundary_cost: 1.0,
            turn_cost: 1.0,
        }
    }
}

impl CompletionPenalty {
    pub fn validate(&self) -> Result<()> {
        if !(self.boundary_cost > 0.0 && self.boundary_cost.is_finite()) {
            return Err(Error::validation(format!("boundary_cost must be positive, got {}", self.boundary_cost)));
        }
        if !(self.turn_cost > 0.0 && self.turn_cost.is_finite()) {
            return Err(Error::validation(format!("turn_cost must be positive, got {}", self.turn_cost)));
        }
        Ok(())
    }
}

/// Whether `t` continues `s` in the same direction bin and lies on its line.
fn collinear(s: &LiftedSegment, t: &LiftedSegment, bins: &HistogramBins) -> bool {
    if angle_distance(s.theta, t.theta) >= bins.direction_width() {
        return false;
    }
    let u = s.unit();
    let off = |p: Point| {
        let d = sub(p, s.start);
        (d[0] * u[1] - d[1] * u[0]).abs()
    };
    off(t.start) <= bins.position_bin_width && off(t.end) <= bins.position_bin_width
}

/// Joins collinear, same-direction pieces across gaps of at most `gap_max`
/// when the connecting segment, including its turns, costs less than the two
/// boundary penalties it removes. Candidate gaps are taken shortest first and
/// each free endpoint is used at most once, so the result is idempotent.
pub fn complete_lines(
    l: &LiftedCurrent,
    p: &CompletionPenalty,
    gap_max: f64,
    bins: &HistogramBins,
) -> Result<LiftedCurrent> {
    p.validate()?;
    bins.validate()?;
    if !(gap_max > 0.0 && gap_max.is_finite()) {
        return Err(Error::validation(format!("gap_max must be positive, got {gap_max}")));
    }
    let segs = &l.segments;
    let n = segs.len();
    let continues = |i: usize, j: usize| {
        i != j && dist(segs[i].end, segs[j].start) <= JOIN_TOL && angle_distance(segs[i].theta, segs[j].theta) < bins.direction_width()
    };
    let mut free_end: Vec<bool> = (0..n).map(|i| !(0..n).any(|j| continues(i, j))).collect();
    let mut free_start: Vec<bool> = (0..n).map(|j| !(0..n).any(|i| continues(i, j))).collect();

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j || !free_end[i] || !free_start[j] || !collinear(&segs[i], &segs[j], bins) {
                continue;
            }
            let gap = dot(sub(segs[j].start, segs[i].end), segs[i].unit());
            let len = dist(segs[i].end, segs[j].start);
            if gap > JOIN_TOL && len <= gap_max {
                candidates.push((len, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut out = l.clone();
    for (len, i, j) in candidates {
        if !free_end[i] || !free_start[j] {
            continue;
        }
        let (s, t) = (&segs[i], &segs[j]);
        let m = 0.5 * (s.multiplicity + t.multiplicity);
        let bridge = LiftedSegment::new(s.end, t.start, m);
        let turns = [signed_turn(s.theta, bridge.theta), signed_turn(bridge.theta, t.theta)];
        let cost = m * (len + p.turn_cost * (turns[0].abs() + turns[1].abs()));
        if cost >= p.boundary_cost * (s.multiplicity + t.multiplicity) {
            continue;
        }
        free_end[i] = false;
        free_start[j] = false;
        out.arcs.push(FiberArc {
            position: s.end,
            theta_from: s.theta,
            sweep: turns[0],
            multiplicity: m,
        });
        out.arcs.push(FiberArc {
            position: t.start,
            theta_from: bridge.theta,
            sweep: turns[1],
            multiplicity: m,
        });
        out.segments.push(bridge);
    }
    Ok(out)
}

/// Number of chains of lifted segments joined end to start within one
/// direction bin.
pub fn maximal_lines(l: &LiftedCurrent, bins: &HistogramBins) -> usize {
    let segs = &l.segments;
    let n = segs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    let mut count = n;
    for i in 0..n {
        for j in 0..n {
            if i != j
                && dist(segs[i].end, segs[j].start) <= JOIN_TOL
                && angle_distance(segs[i].theta, segs[j].theta) < bins.direction_width()
            {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a] = b;
                    count -= 1;
                }
            }
        }
    }
    count
}
