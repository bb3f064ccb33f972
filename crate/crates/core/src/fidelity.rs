//! Fidelity terms: the L¹ distance F1 and the flat-norm distance F2 between
//! curvature currents.
//!
//! The curvature current of a field superposes three parts, all rasterized
//! onto one complex: level-set curvature over a ladder of levels weighted by
//! level spacing, jump-curve curvature weighted by jump height, and corner
//! turns weighted by jump height and spread over the incident segments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::polyline::simplify_vertices;
use crate::chain::{rasterize_to_chain, Chain, GridPattern, Polyline, PolylineCurrent, SimplicialComplex2};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::flatnorm::flat_norm_primal;
use crate::levelset::{curvature_density_with, extract_level_sets, JumpSet};

pub fn f1_l1(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    f.same_grid(g)?;
    let (a, b) = (f.values(), g.values());
    Ok(f.integrate(|i, j| {
        let k = f.index(i, j);
        (a[k] - b[k]).abs()
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentParams {
    pub levels: Vec<f64>,
    pub corner_threshold: f64,
    /// Ladder segments closer than this to a jump curve (pixels) are dropped;
    /// the jump terms carry that geometry.
    pub jump_exclusion_px: f64,
    /// Douglas-Peucker tolerance (pixels) applied to contours before the
    /// curvature estimate; removes marching-squares staircase turns.
    pub contour_simplify_px: f64,
}

impl CurrentParams {
    pub fn with_levels(levels: Vec<f64>) -> Self {
        Self {
            levels,
            corner_threshold: crate::levelset::curvature::DEFAULT_CORNER_THRESHOLD,
            jump_exclusion_px: 1.5,
            contour_simplify_px: 0.75,
        }
    }
}

/// Complex whose vertices sit on every `stride`-th pixel corner and which
/// covers the whole image domain: jump curves run along pixel edges and may
/// reach the border.
pub fn field_complex(f: &ScalarField, stride: usize, pattern: GridPattern) -> Result<SimplicialComplex2> {
    if stride == 0 {
        return Err(Error::validation("complex stride must be at least 1 pixel"));
    }
    let nx = f.width().div_ceil(stride);
    let ny = f.height().div_ceil(stride);
    SimplicialComplex2::grid([0.0, 0.0], nx, ny, stride as f64 * f.spacing(), pattern)
}

/// Width of the band of intensities each level represents: the levels split
/// `[0, 1]` at midpoints between neighbours.
pub fn level_weights(levels: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
    let mut w = vec![0.0; levels.len()];
    for (pos, &k) in order.iter().enumerate() {
        let lo = if pos == 0 { 0.0 } else { 0.5 * (levels[order[pos - 1]] + levels[k]) };
        let hi = if pos + 1 == order.len() { 1.0 } else { 0.5 * (levels[k] + levels[order[pos + 1]]) };
        w[k] = (hi - lo).max(0.0);
    }
    w
}

#[derive(Debug, Clone)]
pub struct CurvatureCurrentField {
    pub chain: Chain,
    /// The same current before rasterization.
    pub current: PolylineCurrent,
}

/// Signed curvature current of `f` with jump set `j`, as polylines.
/// Simplified copy of unit-multiplicity contours. Loops that would collapse
/// below three vertices are kept as extracted.
fn simplify_contours(c: &PolylineCurrent, tol: f64) -> PolylineCurrent {
    if tol <= 0.0 {
        return c.clone();
    }
    let polylines = c
        .polylines
        .iter()
        .map(|p| {
            let v = simplify_vertices(&p.vertices, p.closed, tol);
            Polyline::uniform(v, p.closed, 1.0).unwrap_or_else(|_| p.clone())
        })
        .collect();
    PolylineCurrent { polylines }
}

pub fn curvature_current_polylines(f: &ScalarField, j: &JumpSet, p: &CurrentParams) -> Result<Vec<PolylineCurrent>> {
    if p.levels.is_empty() {
        return Err(Error::validation("at least one level is required"));
    }
    let family = extract_level_sets(f, &p.levels)?;
    let weights = level_weights(&p.levels);
    let exclusion = (!j.is_empty()).then(|| {
        j.pixel_mask(f.width(), f.height(), f.spacing(), p.jump_exclusion_px)
    });
    let mut parts: Vec<PolylineCurrent> = family
        .contours
        .par_iter()
        .zip(weights.par_iter())
        .map(|(c, &w)| -> Result<PolylineCurrent> {
            let c = simplify_contours(c, p.contour_simplify_px * f.spacing());
            let curv = curvature_density_with(&c, p.corner_threshold)?;
            let mut cur = curv.as_current(None).scaled_multiplicity(w);
            if let Some(mask) = &exclusion {
                for poly in &mut cur.polylines {
                    for k in 0..poly.segment_count() {
                        let (a, b) = poly.segment(k);
                        let (i, jj) = pixel_of(f, [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                        if mask[jj * f.width() + i] == 0.0 {
                            poly.multiplicity[k] = 0.0;
                        }
                    }
                }
            }
            Ok(cur)
        })
        .collect::<Result<_>>()?;
    if !j.is_empty() {
        let mut curv = curvature_density_with(&j.curves, p.corner_threshold)?;
        let heights = j.heights();
        for a in &mut curv.atoms {
            let hs = &heights[a.polyline];
            let segs = hs.len();
            let poly = &j.curves.polylines[a.polyline];
            let prev = if poly.closed { (a.vertex + segs - 1) % segs } else { a.vertex - 1 };
            a.weight = 0.5 * (hs[prev] + hs[a.vertex % segs]);
        }
        parts.push(curv.as_current(Some(&heights)));
    }
    Ok(parts)
}

fn pixel_of(f: &ScalarField, p: [f64; 2]) -> (usize, usize) {
    let h = f.spacing();
    let i = ((p[0] / h).floor().max(0.0) as usize).min(f.width() - 1);
    let j = ((p[1] / h).floor().max(0.0) as usize).min(f.height() - 1);
    (i, j)
}

pub fn build_curvature_current(
    f: &ScalarField,
    j: &JumpSet,
    p: &CurrentParams,
    k: &SimplicialComplex2,
) -> Result<CurvatureCurrentField> {
    let parts = curvature_current_polylines(f, j, p)?;
    let chains = parts
        .par_iter()
        .map(|c| rasterize_to_chain(c, k))
        .collect::<Result<Vec<_>>>()?;
    let mut chain = k.zero_chain(1);
    for c in &chains {
        chain = chain.add(c)?;
    }
    let mut current = PolylineCurrent::default();
    for c in parts {
        current.extend(c);
    }
    Ok(CurvatureCurrentField { chain, current })
}

/// Flat-norm fidelity against a fixed target; the target current is built once.
#[derive(Debug, Clone)]
pub struct F2Context {
    pub complex: SimplicialComplex2,
    pub params: CurrentParams,
    pub scale: f64,
    pub target: Chain,
}

impl F2Context {
    pub fn new(g: &ScalarField, jg: &JumpSet, params: CurrentParams, complex: SimplicialComplex2, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::validation(format!("scale must be positive, got {scale}")));
        }
        let target = build_curvature_current(g, jg, &params, &complex)?.chain;
        Ok(Self {
            complex,
            params,
            scale,
            target,
        })
    }

    pub fn evaluate(&self, f: &ScalarField, jf: &JumpSet) -> Result<f64> {
        let x = build_curvature_current(f, jf, &self.params, &self.complex)?.chain;
        Ok(flat_norm_primal(&x.sub(&self.target)?, &self.complex, self.scale)?.value)
    }
}

/// Flat norm of a polyline current rasterized on a crossed grid of the given
/// spacing that covers its bounding box with a two-cell margin.
pub fn current_flat_norm(c: &PolylineCurrent, spacing: f64, scale: f64) -> Result<f64> {
    let Some((lo, hi)) = c.bounding_box() else {
        return Ok(0.0);
    };
    let pad = 2.0 * spacing;
    let k = SimplicialComplex2::grid_covering(
        [lo[0] - pad, lo[1] - pad],
        [hi[0] + pad, hi[1] + pad],
        spacing,
        GridPattern::Crossed,
    )?;
    Ok(flat_norm_primal(&rasterize_to_chain(c, &k)?, &k, scale)?.value)
}

/// `F(F_θ(f) − F_θ(g))` on a shared complex.
#[allow(clippy::too_many_arguments)]
pub fn f2_flat_fidelity(
    f: &ScalarField,
    jf: &JumpSet,
    g: &ScalarField,
    jg: &JumpSet,
    params: &CurrentParams,
    k: &SimplicialComplex2,
    scale: f64,
) -> Result<f64> {
    f.same_grid(g)?;
    F2Context::new(g, jg, params.clone(), k.clone(), scale)?.evaluate(f, jf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::default_levels;
    use std::f64::consts::{PI, TAU};

    fn unit(n: usize, f: impl Fn(f64, f64) -> f64 + Sync) -> ScalarField {
        ScalarField::from_fn(n, n, 1.0 / n as f64, f).unwrap()
    }

    #[test]
    fn f1_examples() {
        let g = unit(64, |x, y| x * y);
        assert_eq!(f1_l1(&g, &g).unwrap(), 0.0);
        let f = g.map(|v| v + 0.1).unwrap();
        assert!((f1_l1(&f, &g).unwrap() - 0.1).abs() < 1e-12);
        let n = 256;
        let disc = unit(n, |x, y| if (x - 0.5).hypot(y - 0.5) < 0.25 { 1.0 } else { 0.0 });
        let zero = ScalarField::constant(n, n, 1.0 / n as f64, 0.0).unwrap();
        let v = f1_l1(&zero, &disc).unwrap();
        assert!((v - PI / 16.0).abs() / (PI / 16.0) < 0.02);
        assert!(f1_l1(&zero, &unit(8, |_, _| 0.0)).is_err());
    }

    #[test]
    fn midpoint_ladder_weights_are_uniform() {
        let w = level_weights(&default_levels(8));
        assert!(w.iter().all(|v| (v - 0.125).abs() < 1e-15));
        assert!((level_weights(&[0.5])[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_field_has_zero_current() {
        let f = unit(32, |_, _| 0.3);
        let k = field_complex(&f, 2, GridPattern::Crossed).unwrap();
        let c = build_curvature_current(&f, &JumpSet::default(), &CurrentParams::with_levels(default_levels(8)), &k).unwrap();
        assert!(c.chain.is_zero());
    }

    #[test]
    fn disc_indicator_current_has_mass_two_pi() {
        let n = 128;
        let f = unit(n, |x, y| if (x - 0.5).hypot(y - 0.5) < 0.3 { 1.0 } else { 0.0 });
        let k = field_complex(&f, 2, GridPattern::Crossed).unwrap();
        let c = build_curvature_current(&f, &JumpSet::default(), &CurrentParams::with_levels(default_levels(8)), &k).unwrap();
        let m = k.mass(&c.chain);
        assert!((m - TAU).abs() / TAU < 0.10, "{m}");
    }

    #[test]
    fn reflection_maps_tuples_to_mirror_images() {
        // Mirroring x and reversing traversal send a segment (a, b) to (a, -b)
        // with unchanged curvature multiplicity.
        let n = 64;
        let f = unit(n, |x, y| (-(x - 0.4).powi(2) / 0.02 - (y - 0.55).powi(2) / 0.05).exp());
        let g = unit(n, |x, y| (-(1.0 - x - 0.4).powi(2) / 0.02 - (y - 0.55).powi(2) / 0.05).exp());
        let mut p = CurrentParams::with_levels(default_levels(8));
        p.contour_simplify_px = 0.0;
        let a = curvature_current_polylines(&f, &JumpSet::default(), &p).unwrap();
        let b = curvature_current_polylines(&g, &JumpSet::default(), &p).unwrap();
        let moments = |cs: &[PolylineCurrent]| -> [f64; 3] {
            let mut m = [0.0; 3];
            for t in cs.iter().flat_map(|c| c.to_segment_tuples()) {
                m[0] += t.mass();
                m[1] += t.y * t.a;
                m[2] += t.y * t.b;
            }
            m
        };
        let (ma, mb) = (moments(&a), moments(&b));
        assert!(ma[0] > 0.0);
        let tol = 1e-9 * ma[0];
        assert!((ma[0] - mb[0]).abs() < tol);
        assert!((ma[1] - mb[1]).abs() < tol);
        assert!((ma[2] + mb[2]).abs() < tol);
        assert!(ma[2].abs() > 1e3 * tol);
    }

    #[test]
    fn f2_vanishes_on_identical_fields() {
        let f = unit(32, |x, y| (6.0 * x).sin() * (4.0 * y).cos() * 0.4 + 0.5);
        let k = field_complex(&f, 2, GridPattern::Crossed).unwrap();
        let p = CurrentParams::with_levels(default_levels(4));
        let e = JumpSet::default();
        assert_eq!(f2_flat_fidelity(&f, &e, &f, &e, &p, &k, 1.0).unwrap(), 0.0);
    }
}
