//! Scalar fields on a regular pixel grid and their finite-difference derivatives.
//!
//! Pixel `(i, j)` is centred at `((i + 0.5) h, (j + 0.5) h)` where `h` is the
//! spacing; values are stored row-major with index `j * width + i`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    spacing: f64,
    values: Vec<f64>,
}

/// Grid metadata as echoed in reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub width: usize,
    pub height: usize,
    pub spacing: f64,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, spacing: f64, values: Vec<f64>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::validation(format!(
                "field must be at least 2x2, got {width}x{height}"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::validation(format!("spacing must be positive, got {spacing}")));
        }
        if values.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} values for a {width}x{height} grid",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite value at pixel ({}, {})",
                k % width,
                k / width
            )));
        }
        Ok(Self {
            width,
            height,
            spacing,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, spacing: f64, value: f64) -> Result<Self> {
        Self::new(width, height, spacing, vec![value; width * height])
    }

    /// Samples `f(x, y)` at every pixel centre.
    pub fn from_fn(
        width: usize,
        height: usize,
        spacing: f64,
        f: impl Fn(f64, f64) -> f64 + Sync,
    ) -> Result<Self> {
        let mut values = vec![0.0; width * height];
        values
            .par_chunks_mut(width.max(1))
            .enumerate()
            .for_each(|(j, row)| {
                let y = (j as f64 + 0.5) * spacing;
                for (i, v) in row.iter_mut().enumerate() {
                    *v = f((i as f64 + 0.5) * spacing, y);
                }
            });
        Self::new(width, height, spacing, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn info(&self) -> GridInfo {
        GridInfo {
            width: self.width,
            height: self.height,
            spacing: self.spacing,
        }
    }

    /// Domain extent `(width * h, height * h)`.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.spacing,
            self.height as f64 * self.spacing,
        )
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.width + i]
    }

    /// Panics on a non-finite value, which would break the field invariant.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(v.is_finite(), "non-finite value written to field");
        let w = self.width;
        self.values[j * w + i] = v;
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            (i as f64 + 0.5) * self.spacing,
            (j as f64 + 0.5) * self.spacing,
        )
    }

    /// Bilinear interpolation between pixel centres, clamped at the border.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let u = (x / self.spacing - 0.5).clamp(0.0, (self.width - 1) as f64);
        let v = (y / self.spacing - 0.5).clamp(0.0, (self.height - 1) as f64);
        let i0 = (u.floor() as usize).min(self.width - 2);
        let j0 = (v.floor() as usize).min(self.height - 2);
        let (a, b) = (u - i0 as f64, v - j0 as f64);
        let f00 = self.get(i0, j0);
        let f10 = self.get(i0 + 1, j0);
        let f01 = self.get(i0, j0 + 1);
        let f11 = self.get(i0 + 1, j0 + 1);
        (1.0 - b) * ((1.0 - a) * f00 + a * f10) + b * ((1.0 - a) * f01 + a * f11)
    }

    pub fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Dimension(format!(
                "grid {}x{} does not match {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        if (self.spacing - other.spacing).abs() > 1e-12 * self.spacing.max(other.spacing) {
            return Err(Error::Dimension(format!(
                "spacing {} does not match {}",
                self.spacing, other.spacing
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.spacing,
            self.values.par_iter().map(|&v| f(v)).collect(),
        )
    }

    /// `alpha * self + beta * other` on a shared grid.
    pub fn lincomb(&self, alpha: f64, other: &ScalarField, beta: f64) -> Result<Self> {
        self.same_grid(other)?;
        Self::new(
            self.width,
            self.height,
            self.spacing,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        )
    }

    /// The `w × h` block whose lower-left pixel is `(i0, j0)`.
    pub fn crop(&self, i0: usize, j0: usize, w: usize, h: usize) -> Result<Self> {
        if i0 + w > self.width || j0 + h > self.height {
            return Err(Error::Dimension(format!(
                "crop {w}x{h} at ({i0}, {j0}) exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut values = Vec::with_capacity(w * h);
        for j in j0..j0 + h {
            values.extend_from_slice(&self.values[self.index(i0, j)..self.index(i0 + w, j)]);
        }
        Self::new(w, h, self.spacing, values)
    }

    /// Copies `block` into this field with its lower-left pixel at `(i0, j0)`.
    pub fn paste(&mut self, i0: usize, j0: usize, block: &ScalarField) {
        assert!(i0 + block.width <= self.width && j0 + block.height <= self.height);
        for j in 0..block.height {
            let dst = self.index(i0, j0 + j);
            self.values[dst..dst + block.width]
                .copy_from_slice(&block.values[j * block.width..(j + 1) * block.width]);
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Midpoint-rule integral `Σ g(i, j) h²`, reduced row by row in a fixed order.
    pub fn integrate(&self, g: impl Fn(usize, usize) -> f64 + Sync) -> f64 {
        ordered_grid_sum(self.width, self.height, g) * self.spacing * self.spacing
    }
}

/// Sums `g` over a grid with rows evaluated in parallel and combined sequentially,
/// so the result does not depend on the thread count.
pub fn ordered_grid_sum(width: usize, height: usize, g: impl Fn(usize, usize) -> f64 + Sync) -> f64 {
    let rows: Vec<f64> = (0..height)
        .into_par_iter()
        .map(|j| (0..width).map(|i| g(i, j)).sum::<f64>())
        .collect();
    rows.iter().sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub width: usize,
    pub height: usize,
    pub spacing: f64,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
}

impl VectorField {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> (f64, f64) {
        let k = j * self.width + i;
        (self.fx[k], self.fy[k])
    }

    #[inline]
    pub fn norm(&self, i: usize, j: usize) -> f64 {
        let (a, b) = self.at(i, j);
        a.hypot(b)
    }
}

/// Quarter turn `(a, b) -> (-b, a)`; maps a gradient to a level-set tangent.
#[inline]
pub fn rotate_j(v: (f64, f64)) -> (f64, f64) {
    (-v.1, v.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianField {
    pub width: usize,
    pub height: usize,
    pub spacing: f64,
    pub fxx: Vec<f64>,
    pub fxy: Vec<f64>,
    pub fyy: Vec<f64>,
}

impl HessianField {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> (f64, f64, f64) {
        let k = j * self.width + i;
        (self.fxx[k], self.fxy[k], self.fyy[k])
    }
}

/// Derivative along an axis of `n` samples laid out `stride` apart in `v`.
#[inline]
fn first_diff(v: &[f64], k: usize, n: usize, stride: usize, h: f64) -> f64 {
    let at = |m: usize| v[m * stride];
    if k == 0 {
        (at(1) - at(0)) / h
    } else if k == n - 1 {
        (at(n - 1) - at(n - 2)) / h
    } else {
        (at(k + 1) - at(k - 1)) / (2.0 * h)
    }
}

/// Central differences inside, one-sided differences on the border.
pub fn gradient(f: &ScalarField) -> VectorField {
    let (w, hgt, h) = (f.width, f.height, f.spacing);
    let mut fx = vec![0.0; w * hgt];
    let mut fy = vec![0.0; w * hgt];
    fx.par_chunks_mut(w)
        .zip(fy.par_chunks_mut(w))
        .enumerate()
        .for_each(|(j, (rx, ry))| {
            let row = &f.values[j * w..(j + 1) * w];
            for i in 0..w {
                rx[i] = first_diff(row, i, w, 1, h);
                ry[i] = first_diff(&f.values[i..], j, hgt, w, h);
            }
        });
    VectorField {
        width: w,
        height: hgt,
        spacing: h,
        fx,
        fy,
    }
}

/// Five-point second differences. Border pixels copy the second differences of
/// the nearest interior pixel; an axis with fewer than three samples has zero
/// second derivative along it.
pub fn hessian(f: &ScalarField) -> HessianField {
    let (w, hgt, h) = (f.width, f.height, f.spacing);
    let h2 = h * h;
    let clamp = |k: usize, n: usize| k.clamp(1, n.saturating_sub(2).max(1));
    let v = &f.values;
    let n = w * hgt;
    let mut fxx = vec![0.0; n];
    let mut fxy = vec![0.0; n];
    let mut fyy = vec![0.0; n];
    fxx.par_chunks_mut(w)
        .zip(fxy.par_chunks_mut(w))
        .zip(fyy.par_chunks_mut(w))
        .enumerate()
        .for_each(|(j, ((rxx, rxy), ryy))| {
            let jc = clamp(j, hgt);
            for i in 0..w {
                let ic = clamp(i, w);
                let at = |a: usize, b: usize| v[b * w + a];
                if w >= 3 {
                    rxx[i] = (at(ic + 1, j) - 2.0 * at(ic, j) + at(ic - 1, j)) / h2;
                }
                if hgt >= 3 {
                    ryy[i] = (at(i, jc + 1) - 2.0 * at(i, jc) + at(i, jc - 1)) / h2;
                }
                if w >= 3 && hgt >= 3 {
                    rxy[i] = (at(ic + 1, jc + 1) - at(ic + 1, jc - 1) - at(ic - 1, jc + 1)
                        + at(ic - 1, jc - 1))
                        / (4.0 * h2);
                }
            }
        });
    HessianField {
        width: w,
        height: hgt,
        spacing: h,
        fxx,
        fxy,
        fyy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(w: usize, h: usize, sp: f64, f: impl Fn(f64, f64) -> f64 + Sync) -> ScalarField {
        ScalarField::from_fn(w, h, sp, f).unwrap()
    }

    #[test]
    fn rejects_bad_metadata() {
        assert!(ScalarField::new(1, 4, 1.0, vec![0.0; 4]).is_err());
        assert!(ScalarField::new(2, 2, 0.0, vec![0.0; 4]).is_err());
        assert!(ScalarField::new(2, 2, 1.0, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(ScalarField::new(2, 2, 1.0, vec![0.0; 3]).is_err());
    }

    #[test]
    fn ramp_gradient_is_exact() {
        let f = field(16, 9, 0.1, |x, _| x);
        let g = gradient(&f);
        for j in 0..9 {
            for i in 0..16 {
                let (a, b) = g.at(i, j);
                assert!((a - 1.0).abs() < 1e-12 && b.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let f = ScalarField::constant(7, 5, 0.3, 0.42).unwrap();
        let g = gradient(&f);
        let hs = hessian(&f);
        assert!(g.fx.iter().chain(&g.fy).all(|v| *v == 0.0));
        assert!(hs.fxx.iter().chain(&hs.fxy).chain(&hs.fyy).all(|v| *v == 0.0));
    }

    #[test]
    fn half_square_gradient_error_within_spacing_squared() {
        let n = 128;
        let h = 1.0 / n as f64;
        let f = field(n, n, h, |x, _| 0.5 * x * x);
        let g = gradient(&f);
        let mut worst: f64 = 0.0;
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let (x, _) = f.center(i, j);
                worst = worst.max((g.at(i, j).0 - x).abs());
            }
        }
        assert!(worst <= h * h, "{worst}");
    }

    #[test]
    fn quadratic_hessians_exact_including_border() {
        let f = field(12, 10, 0.25, |x, _| 0.5 * x * x);
        let hs = hessian(&f);
        for k in 0..120 {
            assert!((hs.fxx[k] - 1.0).abs() < 1e-9);
            assert!(hs.fyy[k].abs() < 1e-9 && hs.fxy[k].abs() < 1e-9);
        }
        let f = field(12, 10, 0.25, |x, y| x * y);
        let hs = hessian(&f);
        assert!(hs.fxy.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn sine_second_derivative_is_second_order() {
        let err = |n: usize| {
            let h = 6.0 / n as f64;
            let f = field(n, 4, h, |x, _| x.sin());
            let hs = hessian(&f);
            (1..n - 1)
                .map(|i| (hs.fxx[f.index(i, 1)] + f.center(i, 1).0.sin()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn bilinear_sample_reproduces_affine() {
        let f = field(10, 10, 0.5, |x, y| 2.0 * x - y);
        let v = f.sample(1.3, 2.1);
        assert!((v - (2.6 - 2.1)).abs() < 1e-12);
    }

    #[test]
    fn integrate_constant_is_area() {
        let f = ScalarField::constant(20, 10, 0.05, 3.0).unwrap();
        let a = f.integrate(|i, j| f.get(i, j));
        assert!((a - 3.0 * 0.5).abs() < 1e-12);
    }
}
