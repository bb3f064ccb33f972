//! Proposal families: curvature-flow smoothing, window flattening, and cuts.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{region_flatnorm_penalty, region_regularity_cost, DescentParams, DescentState, DescentTrace};
use crate::chain::SegmentTuple;
use crate::energy::EnergyContext;
use crate::error::Result;
use crate::fidelity::{curvature_current_polylines, f1_l1, field_complex, F2Context};
use crate::field::{gradient, hessian, ScalarField};
use crate::levelset::{introduce_discontinuity, CutParams, JumpParams, JumpSet};
use crate::registry::{Named, Registry};
use crate::regularity::{r1_weighted, r2_jump_curvature, r3_weighted, r4_parts, r5_weighted};

/// Trace offset used when jump traces are refreshed after a change.
const TRACE_OFFSET_PX: f64 = 1.0;

pub trait Proposal: Named + Send + Sync {
    /// Proposes and possibly commits changes to `state`; true when anything was accepted.
    fn run(
        &self,
        state: &mut DescentState,
        ctx: &EnergyContext,
        params: &DescentParams,
        sweep: usize,
        rng: &mut ChaCha8Rng,
        trace: &mut DescentTrace,
    ) -> Result<bool>;
}

pub fn proposals() -> Registry<dyn Proposal> {
    Registry::<dyn Proposal>::new("proposal")
        .with(Box::new(Smooth))
        .with(Box::new(Flatten))
        .with(Box::new(Discontinuity))
}

/// Lower median.
pub fn window_median(values: &mut [f64]) -> f64 {
    let mid = (values.len() - 1) / 2;
    *values.select_nth_unstable_by(mid, f64::total_cmp).1
}

fn refresh_jumps(j: &JumpSet, f: &ScalarField, params: &DescentParams) -> JumpSet {
    j.resample(f, TRACE_OFFSET_PX, params.min_jump_height)
}

struct Smooth;

impl Named for Smooth {
    fn name(&self) -> &'static str {
        "smooth"
    }
}

/// One explicit step of `f_t = |∇f| κ = N / (|∇f|² + ε²)`, frozen on masked pixels.
fn curvature_flow_step(f: &ScalarField, mask: Option<&[f64]>, dt: f64, eps: f64) -> Result<ScalarField> {
    let g = gradient(f);
    let hs = hessian(f);
    let v = f.values();
    let values = (0..v.len())
        .into_par_iter()
        .map(|k| {
            let (gx, gy) = (g.fx[k], g.fy[k]);
            let g2 = gx * gx + gy * gy;
            let wt = mask.map_or(1.0, |m| m[k]);
            if wt == 0.0 || g2.sqrt() < eps {
                return v[k];
            }
            let n = hs.fxx[k] * gy * gy - 2.0 * hs.fxy[k] * gx * gy + hs.fyy[k] * gx * gx;
            v[k] + wt * dt * n / (g2 + eps * eps)
        })
        .collect();
    ScalarField::new(f.width(), f.height(), f.spacing(), values)
}

impl Proposal for Smooth {
    fn run(
        &self,
        state: &mut DescentState,
        ctx: &EnergyContext,
        params: &DescentParams,
        sweep: usize,
        _rng: &mut ChaCha8Rng,
        trace: &mut DescentTrace,
    ) -> Result<bool> {
        let h = state.field.spacing();
        let mask = ctx.mask(&state.field, &state.jumps);
        for frac in [params.step, 0.25 * params.step] {
            let dt = frac * h * h / 4.0;
            let cand = curvature_flow_step(&state.field, mask.as_deref(), dt, ctx.config().regularity.epsilon)?;
            let jumps = refresh_jumps(&state.jumps, &cand, params);
            if state.offer(ctx, cand, jumps, trace, sweep, format!("smooth step {frac}"))? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

struct Flatten;

impl Named for Flatten {
    fn name(&self) -> &'static str {
        "flatten"
    }
}

#[derive(Debug, Clone, Copy)]
struct Window {
    i0: usize,
    j0: usize,
    w: usize,
    h: usize,
}

impl Window {
    fn contains(&self, i: usize, j: usize) -> bool {
        (self.i0..self.i0 + self.w).contains(&i) && (self.j0..self.j0 + self.h).contains(&j)
    }

    fn overlaps(&self, o: &Window) -> bool {
        self.i0 < o.i0 + o.w && o.i0 < self.i0 + self.w && self.j0 < o.j0 + o.h && o.j0 < self.j0 + self.h
    }
}

/// Windows of side `r` whose corners step by `stride` from the offset
/// `(ox, oy)`, clipped to the grid; slivers under 3 pixels are dropped. With
/// `stride = r/2` every feature of extent at most `r/2` lies inside some window.
fn tiling(width: usize, height: usize, r: usize, stride: usize, ox: usize, oy: usize) -> Vec<Window> {
    let starts = |n: usize, o: usize| -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut s = o as isize - r as isize;
        while s < n as isize {
            let a = s.max(0) as usize;
            let b = ((s + r as isize).max(0) as usize).min(n);
            if b >= a + 3 && out.last() != Some(&(a, b - a)) {
                out.push((a, b - a));
            }
            s += stride as isize;
        }
        out
    };
    let xs = starts(width, ox);
    let ys = starts(height, oy);
    ys.iter()
        .flat_map(|&(j0, h)| xs.iter().map(move |&(i0, w)| Window { i0, j0, w, h }))
        .collect()
}

/// Energy change from setting `win` to `value`, estimated on the window plus
/// a margin. Jump-dependent global terms are evaluated exactly.
fn local_delta(
    ctx: &EnergyContext,
    params: &DescentParams,
    state: &DescentState,
    mask_old: Option<&[f64]>,
    win: Window,
    value: f64,
) -> Result<f64> {
    let f = &state.field;
    let m = params.margin();
    let (ci0, cj0) = (win.i0.saturating_sub(m), win.j0.saturating_sub(m));
    let ci1 = (win.i0 + win.w + m).min(f.width());
    let cj1 = (win.j0 + win.h + m).min(f.height());
    let (cw, ch) = (ci1 - ci0, cj1 - cj0);

    let mut f_new = f.clone();
    f_new.paste(win.i0, win.j0, &ScalarField::constant(win.w, win.h, f.spacing(), value)?);
    let j_new = refresh_jumps(&state.jumps, &f_new, params);
    let mask_new = ctx.mask(&f_new, &j_new);
    let crop_mask = |mask: Option<&[f64]>| -> Option<Vec<f64>> {
        mask.map(|mk| {
            (cj0..cj1)
                .flat_map(|j| mk[j * f.width() + ci0..j * f.width() + ci1].iter().copied())
                .collect()
        })
    };
    let (old_c, new_c) = (f.crop(ci0, cj0, cw, ch)?, f_new.crop(ci0, cj0, cw, ch)?);
    let (mo, mn) = (crop_mask(mask_old), crop_mask(mask_new.as_deref()));
    let g_c = ctx.g().crop(ci0, cj0, cw, ch)?;
    let cfg = ctx.config();
    let w = ctx.weights().as_array();

    let terms = |fc: &ScalarField, mask: Option<&[f64]>, j: &JumpSet| -> Result<[f64; 6]> {
        let on = |i: usize| w[i] > 0.0;
        let (area, border) = if on(3) { r4_parts(fc, mask) } else { (0.0, 0.0) };
        Ok([
            if on(0) { r1_weighted(fc, cfg.regularity.epsilon, mask) } else { 0.0 },
            if on(1) { r2_jump_curvature(j) } else { 0.0 },
            if on(2) { r3_weighted(fc, cfg.regularity.crease_threshold, mask) } else { 0.0 },
            area + border + cfg.regularity.jump_factor * j.length(),
            if on(4) { r5_weighted(fc, cfg.regularity.hessian_norm, mask) } else { 0.0 },
            if on(5) { f1_l1(fc, &g_c)? } else { 0.0 },
        ])
    };
    let a = terms(&old_c, mo.as_deref(), &state.jumps)?;
    let b = terms(&new_c, mn.as_deref(), &j_new)?;
    let mut delta: f64 = (0..6).map(|i| if w[i] > 0.0 { w[i] * (b[i] - a[i]) } else { 0.0 }).sum();
    if w[6] > 0.0 {
        let k = field_complex(&g_c, cfg.stride_for(ctx.g()), cfg.pattern)?;
        let f2 = F2Context::new(&g_c, &JumpSet::default(), cfg.current_params(), k, cfg.scale)?;
        let none = JumpSet::default();
        delta += w[6] * (f2.evaluate(&new_c, &none)? - f2.evaluate(&old_c, &none)?);
    }
    Ok(delta)
}

impl Proposal for Flatten {
    fn run(
        &self,
        state: &mut DescentState,
        ctx: &EnergyContext,
        params: &DescentParams,
        sweep: usize,
        rng: &mut ChaCha8Rng,
        trace: &mut DescentTrace,
    ) -> Result<bool> {
        let f = &state.field;
        let (width, height, h) = (f.width(), f.height(), f.spacing());
        let r = params.region_size;
        let (ox, oy) = (rng.gen_range(0..r), rng.gen_range(0..r));
        let stride = (r / 2).max(1);
        let windows = tiling(width, height, r, stride, ox, oy);
        let mut located: Vec<(usize, usize, SegmentTuple)> = Vec::new();
        for part in curvature_current_polylines(f, &state.jumps, &ctx.config().current_params())? {
            for t in part.to_segment_tuples() {
                let i = ((t.x / h).floor().max(0.0) as usize).min(width - 1);
                let j = ((t.y / h).floor().max(0.0) as usize).min(height - 1);
                located.push((i, j, t));
            }
        }
        let mask_old = ctx.mask(f, &state.jumps);
        let triggered: Vec<(usize, Window, f64)> = windows
            .iter()
            .enumerate()
            .filter_map(|(n, win)| {
                let tuples: Vec<SegmentTuple> =
                    located.iter().filter(|(i, j, _)| win.contains(*i, *j)).map(|&(_, _, t)| t).collect();
                let cost = region_regularity_cost(&tuples);
                if !(cost > 0.0 && cost > params.trigger_ratio * region_flatnorm_penalty(&tuples)) {
                    return None;
                }
                let mut vals: Vec<f64> = (win.j0..win.j0 + win.h)
                    .flat_map(|j| (win.i0..win.i0 + win.w).map(move |i| (i, j)))
                    .map(|(i, j)| f.get(i, j))
                    .collect();
                let med = window_median(&mut vals);
                Some((n, *win, med))
            })
            .collect();
        let estimates: Vec<f64> = triggered
            .par_iter()
            .map(|&(_, win, med)| local_delta(ctx, params, state, mask_old.as_deref(), win, med))
            .collect::<Result<_>>()?;
        let mut gains: Vec<(f64, usize, Window, f64)> = triggered
            .iter()
            .zip(&estimates)
            .filter(|(_, d)| **d < 0.0)
            .map(|(&(n, win, med), &d)| (d, n, win, med))
            .collect();
        gains.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut chosen: Vec<(f64, usize, Window, f64)> = Vec::new();
        for g in gains {
            if chosen.iter().all(|c| !c.2.overlaps(&g.2)) {
                chosen.push(g);
            }
        }
        let gains = chosen;
        let mut take = gains.len();
        while take > 0 {
            let mut cand = state.field.clone();
            for &(_, _, win, med) in &gains[..take] {
                cand.paste(win.i0, win.j0, &ScalarField::constant(win.w, win.h, h, med)?);
            }
            let jumps = refresh_jumps(&state.jumps, &cand, params);
            if state.offer(ctx, cand, jumps, trace, sweep, format!("flatten {take} windows"))? {
                return Ok(true);
            }
            take /= 2;
        }
        Ok(false)
    }
}

struct Discontinuity;

impl Named for Discontinuity {
    fn name(&self) -> &'static str {
        "discontinuity"
    }
}

impl Proposal for Discontinuity {
    fn run(
        &self,
        state: &mut DescentState,
        ctx: &EnergyContext,
        params: &DescentParams,
        sweep: usize,
        _rng: &mut ChaCha8Rng,
        trace: &mut DescentTrace,
    ) -> Result<bool> {
        let cut = CutParams {
            grad_threshold: ctx.config().jump_threshold_px / state.field.spacing(),
            min_length: 0.0,
            min_height: params.min_jump_height,
            band_px: 2.0,
            max_candidates: params.max_cuts,
            jump: JumpParams::default(),
        };
        let res = introduce_discontinuity(&state.field, &state.jumps, &cut, &|f, j| ctx.total(f, j))?;
        if res.accepted.is_empty() {
            return Ok(false);
        }
        let n = res.accepted.len();
        state.offer(ctx, res.field, res.jumps, trace, sweep, format!("discontinuity {n} cuts"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even_lists() {
        assert_eq!(window_median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(window_median(&mut [4.0, 1.0, 3.0, 2.0]), 2.0);
    }

    #[test]
    fn tiling_covers_every_pixel_at_most_once_without_overlap() {
        for (ox, oy) in [(0, 0), (3, 5), (7, 1)] {
            let mut seen = vec![0u8; 37 * 29];
            for w in tiling(37, 29, 8, 8, ox, oy) {
                assert!(w.w >= 3 && w.h >= 3 && w.w <= 8 && w.h <= 8);
                for j in w.j0..w.j0 + w.h {
                    for i in w.i0..w.i0 + w.w {
                        seen[j * 37 + i] += 1;
                    }
                }
            }
            assert!(seen.iter().all(|&s| s <= 1));
        }
    }

    #[test]
    fn half_stride_tiling_contains_every_small_box() {
        let (r, n) = (12, 40);
        for (ox, oy) in [(0, 0), (5, 11)] {
            let wins = tiling(n, n, r, r / 2, ox, oy);
            for a in 0..=n - r / 2 {
                for b in 0..=n - r / 2 {
                    let inside = wins.iter().any(|w| {
                        w.i0 <= a && a + r / 2 <= w.i0 + w.w && w.j0 <= b && b + r / 2 <= w.j0 + w.h
                    });
                    assert!(inside, "box at ({a}, {b}) offset ({ox}, {oy})");
                }
            }
        }
    }

    #[test]
    fn flow_step_shrinks_a_bump_and_keeps_a_ramp() {
        let n = 32;
        let h = 1.0 / n as f64;
        let ramp = ScalarField::from_fn(n, n, h, |x, y| 0.3 * x + 0.2 * y).unwrap();
        let out = curvature_flow_step(&ramp, None, 0.5 * h * h / 4.0, 1e-3).unwrap();
        assert!(out.values().iter().zip(ramp.values()).all(|(a, b)| (a - b).abs() < 1e-12));
        let bump = ScalarField::from_fn(n, n, h, |x, y| (-((x - 0.5).powi(2) + (y - 0.5).powi(2)) / 0.02).exp()).unwrap();
        let out = curvature_flow_step(&bump, None, 0.5 * h * h / 4.0, 1e-3).unwrap();
        let (i, j) = (n / 2, n / 2);
        assert!(out.get(i, j) < bump.get(i, j));
    }
}
