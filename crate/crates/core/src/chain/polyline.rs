use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}
#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}
#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}
#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// An oriented polygonal curve with one signed multiplicity per segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub vertices: Vec<Point>,
    pub closed: bool,
    /// One entry per segment; a closed polyline has as many segments as vertices.
    pub multiplicity: Vec<f64>,
}

impl Polyline {
    pub fn new(vertices: Vec<Point>, closed: bool, multiplicity: Vec<f64>) -> Result<Self> {
        let p = Self {
            vertices,
            closed,
            multiplicity,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn uniform(vertices: Vec<Point>, closed: bool, m: f64) -> Result<Self> {
        let n = segment_count(vertices.len(), closed);
        Self::new(vertices, closed, vec![m; n])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if self.closed && n < 3 {
            return Err(Error::validation("closed polyline needs at least 3 vertices"));
        }
        if !self.closed && n < 2 {
            return Err(Error::validation("open polyline needs at least 2 vertices"));
        }
        if self.multiplicity.len() != self.segment_count() {
            return Err(Error::Dimension(format!(
                "{} multiplicities for {} segments",
                self.multiplicity.len(),
                self.segment_count()
            )));
        }
        if self.vertices.iter().flatten().any(|c| !c.is_finite())
            || self.multiplicity.iter().any(|m| !m.is_finite())
        {
            return Err(Error::validation("non-finite polyline data"));
        }
        for k in 0..self.segment_count() {
            let (a, b) = self.segment(k);
            if a == b {
                return Err(Error::validation(format!("segment {k} has zero length")));
            }
        }
        Ok(())
    }

    pub fn segment_count(&self) -> usize {
        segment_count(self.vertices.len(), self.closed)
    }

    #[inline]
    pub fn segment(&self, k: usize) -> (Point, Point) {
        let n = self.vertices.len();
        (self.vertices[k], self.vertices[(k + 1) % n])
    }

    pub fn segment_length(&self, k: usize) -> f64 {
        let (a, b) = self.segment(k);
        dist(a, b)
    }

    pub fn length(&self) -> f64 {
        (0..self.segment_count()).map(|k| self.segment_length(k)).sum()
    }

    pub fn mass(&self) -> f64 {
        (0..self.segment_count())
            .map(|k| self.multiplicity[k].abs() * self.segment_length(k))
            .sum()
    }

    /// Same carrier traversed backwards, so the current changes sign.
    pub fn reversed(&self) -> Polyline {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        let mut multiplicity = self.multiplicity.clone();
        if self.closed {
            // segment k of the reversed loop is old segment n-2-k (mod n)
            let n = vertices.len();
            multiplicity = (0..n).map(|k| self.multiplicity[(2 * n - 2 - k) % n]).collect();
        } else {
            multiplicity.reverse();
        }
        Polyline {
            vertices,
            closed: self.closed,
            multiplicity,
        }
    }
}

fn segment_count(vertices: usize, closed: bool) -> usize {
    if closed {
        vertices
    } else {
        vertices.saturating_sub(1)
    }
}

/// Regular `m`-gon inscribed in the circle of radius `r`, counter-clockwise.
pub fn regular_polygon(center: Point, r: f64, m: usize, multiplicity: f64) -> Polyline {
    let vertices = (0..m)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / m as f64;
            [center[0] + r * t.cos(), center[1] + r * t.sin()]
        })
        .collect();
    Polyline {
        vertices,
        closed: true,
        multiplicity: vec![multiplicity; m],
    }
}

/// Douglas-Peucker simplification of an open vertex list.
pub fn simplify(pts: &[Point], tol: f64) -> Vec<Point> {
    if pts.len() <= 2 {
        return pts.to_vec();
    }
    let mut keep = vec![false; pts.len()];
    keep[0] = true;
    keep[pts.len() - 1] = true;
    let mut stack = vec![(0, pts.len() - 1)];
    while let Some((s, e)) = stack.pop() {
        let mut best = (0.0, 0);
        for k in s + 1..e {
            let d = if pts[s] == pts[e] {
                dist(pts[k], pts[s])
            } else {
                segment_distance(pts[k], pts[s], pts[e])
            };
            if d > best.0 {
                best = (d, k);
            }
        }
        if best.0 > tol {
            keep[best.1] = true;
            stack.push((s, best.1));
            stack.push((best.1, e));
        }
    }
    pts.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect()
}

/// Douglas-Peucker on an open or closed vertex list. Closed lists are split
/// at the vertex farthest from the first one so both halves keep their ends.
pub fn simplify_vertices(pts: &[Point], closed: bool, tol: f64) -> Vec<Point> {
    if !closed || pts.len() < 4 {
        return simplify(pts, tol);
    }
    let far = (0..pts.len())
        .max_by(|&a, &b| dist(pts[0], pts[a]).total_cmp(&dist(pts[0], pts[b])))
        .unwrap_or(0);
    let mut first = simplify(&pts[..=far], tol);
    let mut tail: Vec<Point> = pts[far..].to_vec();
    tail.push(pts[0]);
    let second = simplify(&tail, tol);
    first.extend_from_slice(&second[1..second.len() - 1]);
    first
}

/// Distance from `p` to the segment `ab`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let l2 = dot(ab, ab);
    let t = if l2 > 0.0 { (dot(sub(p, a), ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

/// A formal sum of weighted oriented polylines.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolylineCurrent {
    pub polylines: Vec<Polyline>,
}

impl PolylineCurrent {
    pub fn new(polylines: Vec<Polyline>) -> Result<Self> {
        for p in &polylines {
            p.validate()?;
        }
        Ok(Self { polylines })
    }

    pub fn single(p: Polyline) -> Self {
        Self { polylines: vec![p] }
    }

    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty()
    }

    pub fn segment_count(&self) -> usize {
        self.polylines.iter().map(Polyline::segment_count).sum()
    }

    pub fn mass(&self) -> f64 {
        self.polylines.iter().map(Polyline::mass).sum()
    }

    pub fn scaled_multiplicity(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.polylines {
            p.multiplicity.iter_mut().for_each(|m| *m *= alpha);
        }
        out
    }

    pub fn extend(&mut self, other: PolylineCurrent) {
        self.polylines.extend(other.polylines);
    }

    /// Image under `x -> factor * x`; multiplicities are unchanged.
    pub fn pushforward_homothety(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::validation(format!(
                "homothety factor must be positive and finite, got {factor}"
            )));
        }
        let mut out = self.clone();
        for p in &mut out.polylines {
            for v in &mut p.vertices {
                v[0] *= factor;
                v[1] *= factor;
            }
        }
        Ok(out)
    }

    pub fn to_segment_tuples(&self) -> Vec<SegmentTuple> {
        let mut out = Vec::with_capacity(self.segment_count());
        for p in &self.polylines {
            for k in 0..p.segment_count() {
                let (a, b) = p.segment(k);
                let m = p.multiplicity[k];
                if m == 0.0 {
                    continue;
                }
                out.push(SegmentTuple {
                    x: 0.5 * (a[0] + b[0]),
                    y: 0.5 * (a[1] + b[1]),
                    a: m * (b[0] - a[0]),
                    b: m * (b[1] - a[1]),
                });
            }
        }
        out
    }

    /// Each tuple becomes one unit-multiplicity segment centred at `(x, y)`
    /// with displacement `(a, b)`, which preserves the tuple's mass.
    pub fn from_segment_tuples(tuples: &[SegmentTuple]) -> Result<Self> {
        let polylines = tuples
            .iter()
            .filter(|t| t.a != 0.0 || t.b != 0.0)
            .map(|t| {
                Polyline::new(
                    vec![
                        [t.x - 0.5 * t.a, t.y - 0.5 * t.b],
                        [t.x + 0.5 * t.a, t.y + 0.5 * t.b],
                    ],
                    false,
                    vec![1.0],
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { polylines })
    }

    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        let mut it = self.polylines.iter().flat_map(|p| p.vertices.iter());
        let first = *it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| {
            ([lo[0].min(v[0]), lo[1].min(v[1])], [hi[0].max(v[0]), hi[1].max(v[1])])
        }))
    }
}

/// A segment in `a dx + b dy` form anchored at its midpoint; its mass is `|(a, b)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentTuple {
    pub x: f64,
    pub y: f64,
    pub a: f64,
    pub b: f64,
}

impl SegmentTuple {
    pub fn mass(&self) -> f64 {
        self.a.hypot(self.b)
    }
}

/// CSV with header `x,y,a,b`; values carry 17 significant digits so that
/// reading the file back reproduces every bit.
pub fn tuples_to_csv(tuples: &[SegmentTuple]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y", "a", "b"]).expect("in-memory write");
    for t in tuples {
        w.write_record([t.x, t.y, t.a, t.b].map(|v| format!("{v:.16e}")))
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

/// Parses `x,y,a,b` CSV; errors carry the 1-based data row.
pub fn tuples_from_csv(reader: impl Read) -> Result<Vec<SegmentTuple>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Csv {
        row: 0,
        message: e.to_string(),
    })?;
    let names: Vec<&str> = header.iter().collect();
    if names != ["x", "y", "a", "b"] {
        return Err(Error::Csv {
            row: 0,
            message: format!("expected header x,y,a,b, got {}", names.join(",")),
        });
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != 4 {
            return Err(Error::Csv {
                row,
                message: format!("expected 4 fields, got {}", rec.len()),
            });
        }
        let mut v = [0.0; 4];
        for (slot, field) in v.iter_mut().zip(rec.iter()) {
            *slot = field.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                Error::Csv {
                    row,
                    message: format!("'{field}' is not a finite number"),
                }
            })?;
        }
        out.push(SegmentTuple {
            x: v[0],
            y: v[1],
            a: v[2],
            b: v[3],
        });
    }
    Ok(out)
}
