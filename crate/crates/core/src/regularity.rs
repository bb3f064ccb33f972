//! Regularity functionals R1 to R5.
//!
//! Derivative-based integrands accept an optional per-pixel weight in
//! `[0, 1]`; the energy uses it to switch derivatives off next to jumps, where
//! the jump terms account for the geometry instead.

use serde::{Deserialize, Serialize};

use crate::field::{gradient, hessian, ScalarField};
use crate::levelset::{curvature_density, JumpSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianNorm {
    /// `f_xx² + f_yy² + (2 f_xy)²`.
    Squared,
    /// `|f_xx| + |f_yy| + |2 f_xy|`.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegularityParams {
    pub epsilon: f64,
    /// Gradient change across one pixel that marks a crease, intensity per length.
    pub crease_threshold: f64,
    /// Multiplicity of jump curves in the graph boundary (1 or 2).
    pub jump_factor: f64,
    pub hessian_norm: HessianNorm,
}

impl Default for RegularityParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            crease_threshold: 0.5,
            jump_factor: 2.0,
            hessian_norm: HessianNorm::Squared,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RegularityReport {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
}

#[inline]
fn weight(mask: Option<&[f64]>, k: usize) -> f64 {
    mask.map_or(1.0, |m| m[k])
}

/// `∫ |∇f| |κ|`, with `κ` the level-set curvature, as `|N| / (|∇f|² + ε²)` where
/// `N = f_xx f_y² − 2 f_xy f_x f_y + f_yy f_x²`. Pixels with `|∇f| < ε` are skipped.
pub fn r1_total_curvature(f: &ScalarField, epsilon: f64) -> f64 {
    r1_weighted(f, epsilon, None)
}

pub fn r1_weighted(f: &ScalarField, epsilon: f64, mask: Option<&[f64]>) -> f64 {
    let g = gradient(f);
    let hs = hessian(f);
    let e2 = epsilon * epsilon;
    f.integrate(|i, j| {
        let k = f.index(i, j);
        let w = weight(mask, k);
        if w == 0.0 {
            return 0.0;
        }
        let (fx, fy) = (g.fx[k], g.fy[k]);
        let g2 = fx * fx + fy * fy;
        if g2 < e2 {
            return 0.0;
        }
        let n = hs.fxx[k] * fy * fy - 2.0 * hs.fxy[k] * fx * fy + hs.fyy[k] * fx * fx;
        w * n.abs() / (g2 + e2)
    })
}

/// `Σ |Δθ|` over corners plus `∫ |θ′|` along the jump curves.
pub fn r2_jump_curvature(j: &JumpSet) -> f64 {
    curvature_density(&j.curves)
        .map(|c| c.total_unsigned())
        .unwrap_or(0.0)
}

/// Turning of the graph's unit normal across creases.
///
/// A pixel belongs to a crease when the central gradient changes by more
/// than `threshold` between its two neighbours along either axis; the crease
/// set is then widened by one pixel so the turning telescopes fully. Each
/// crease pixel contributes `h · |(a_x, a_y)|` where `a_x` is half the angle
/// between the normals of its left and right neighbours.
pub fn r3_crease_curvature(f: &ScalarField, threshold: f64) -> f64 {
    r3_weighted(f, threshold, None)
}

pub fn r3_weighted(f: &ScalarField, threshold: f64, mask: Option<&[f64]>) -> f64 {
    let (w, hgt, h) = (f.width(), f.height(), f.spacing());
    if w < 3 || hgt < 3 {
        return 0.0;
    }
    let g = gradient(f);
    let normal = |k: usize| {
        let (a, b) = (g.fx[k], g.fy[k]);
        let s = 1.0 / (1.0 + a * a + b * b).sqrt();
        [-a * s, -b * s, s]
    };
    let angle = |p: [f64; 3], q: [f64; 3]| {
        let c = [p[1] * q[2] - p[2] * q[1], p[2] * q[0] - p[0] * q[2], p[0] * q[1] - p[1] * q[0]];
        let cn = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        cn.atan2(p[0] * q[0] + p[1] * q[1] + p[2] * q[2])
    };
    let mut core = vec![false; w * hgt];
    for j in 1..hgt - 1 {
        for i in 1..w - 1 {
            let (l, r) = (j * w + i - 1, j * w + i + 1);
            let (d, u) = ((j - 1) * w + i, (j + 1) * w + i);
            let jx = (g.fx[r] - g.fx[l]).hypot(g.fy[r] - g.fy[l]);
            let jy = (g.fx[u] - g.fx[d]).hypot(g.fy[u] - g.fy[d]);
            core[j * w + i] = jx.max(jy) > threshold;
        }
    }
    let crease = |i: usize, j: usize| {
        (j.saturating_sub(1)..=(j + 1).min(hgt - 1))
            .any(|b| (i.saturating_sub(1)..=(i + 1).min(w - 1)).any(|a| core[b * w + a]))
    };
    let sum = crate::field::ordered_grid_sum(w, hgt, |i, j| {
        if i == 0 || j == 0 || i == w - 1 || j == hgt - 1 || !crease(i, j) {
            return 0.0;
        }
        let k = j * w + i;
        let wt = weight(mask, k);
        if wt == 0.0 {
            return 0.0;
        }
        let ax = 0.5 * angle(normal(k - 1), normal(k + 1));
        let ay = 0.5 * angle(normal(k - w), normal(k + w));
        wt * ax.hypot(ay)
    });
    sum * h
}

/// Graph area plus graph-boundary length: `∫ √(1 + |∇f|²)`, the length of the
/// graph over the domain border, and `jump_factor` times the jump length.
/// Masked pixels count as flat.
pub fn r4_graph_mass(f: &ScalarField, j: &JumpSet, jump_factor: f64, mask: Option<&[f64]>) -> f64 {
    let (area, border) = r4_parts(f, mask);
    area + border + jump_factor * j.length()
}

/// `(graph area, border trace length)`.
pub fn r4_parts(f: &ScalarField, mask: Option<&[f64]>) -> (f64, f64) {
    let g = gradient(f);
    let area = f.integrate(|i, j| {
        let k = f.index(i, j);
        let wt = weight(mask, k);
        (1.0 + wt * (g.fx[k] * g.fx[k] + g.fy[k] * g.fy[k])).sqrt()
    });
    let (w, hgt, h) = (f.width(), f.height(), f.spacing());
    let mut border = 0.0;
    for i in 0..w {
        for j in [0, hgt - 1] {
            border += h * (1.0 + g.fx[j * w + i].powi(2)).sqrt();
        }
    }
    for j in 0..hgt {
        for i in [0, w - 1] {
            border += h * (1.0 + g.fy[j * w + i].powi(2)).sqrt();
        }
    }
    (area, border)
}

pub fn r5_hessian_energy(f: &ScalarField) -> f64 {
    r5_weighted(f, HessianNorm::Squared, None)
}

pub fn r5_weighted(f: &ScalarField, norm: HessianNorm, mask: Option<&[f64]>) -> f64 {
    let hs = hessian(f);
    f.integrate(|i, j| {
        let k = f.index(i, j);
        let wt = weight(mask, k);
        if wt == 0.0 {
            return 0.0;
        }
        let (a, b, c) = (hs.fxx[k], hs.fyy[k], 2.0 * hs.fxy[k]);
        wt * match norm {
            HessianNorm::Squared => a * a + b * b + c * c,
            HessianNorm::Absolute => a.abs() + b.abs() + c.abs(),
        }
    })
}

/// All five terms, with derivatives masked within `mask_radius_px` of `j`.
pub fn regularity(f: &ScalarField, j: &JumpSet, p: &RegularityParams, mask_radius_px: f64) -> RegularityReport {
    let mask = (!j.is_empty()).then(|| j.pixel_mask(f.width(), f.height(), f.spacing(), mask_radius_px));
    let m = mask.as_deref();
    RegularityReport {
        r1: r1_weighted(f, p.epsilon, m),
        r2: r2_jump_curvature(j),
        r3: r3_weighted(f, p.crease_threshold, m),
        r4: r4_graph_mass(f, j, p.jump_factor, m),
        r5: r5_weighted(f, p.hessian_norm, m),
    }
}
