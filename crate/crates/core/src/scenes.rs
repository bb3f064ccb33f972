//! Synthetic scenes with exactly known boundary currents.
//!
//! Every scene lives in the unit square. Lengths quoted in "scene units"
//! (disc radius `1/n`, sawtooth period `2/n`, bump radius `1/n`) are mapped
//! into the square by a per-kind factor recorded in the metadata, so that
//! each family fits at every `n`. Boundaries are oriented with the raised
//! region on the left.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{regular_polygon, Point, Polyline, PolylineCurrent};
use crate::error::{Error, Result};
use crate::fidelity::current_flat_norm;
use crate::field::ScalarField;
use crate::levelset::curvature_density;
use crate::registry::{Named, Registry};

/// Segments per closed analytic curve (and per semicircular arc).
pub const CURVE_SEGMENTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub kind: String,
    /// Density parameter.
    pub n: u32,
    /// Sawtooth angle from the mean edge direction, radians.
    pub theta: f64,
    /// Pixels per side.
    pub res: usize,
    pub background: f64,
    /// Amplitude of a smooth variation added to the background; 0 keeps it constant.
    pub background_variation: f64,
    /// Raised regions sit `contrast` above the background.
    pub contrast: f64,
    /// Standard deviation of the Gaussian edge blur, in pixels; 0 keeps edges sharp.
    pub edge_px: f64,
    /// Probability that a pixel is replaced by 0 or 1.
    pub impulse: f64,
    pub seed: u64,
    /// Flat-norm unit length used for oracle values.
    pub scale: f64,
    /// Compute oracle values by solving flat-norm problems.
    pub oracle: bool,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            kind: "disc_pack".into(),
            n: 4,
            theta: PI / 6.0,
            res: 256,
            background: 0.2,
            background_variation: 0.0,
            contrast: 0.6,
            edge_px: 0.0,
            impulse: 0.0,
            seed: 0,
            scale: 1.0,
            oracle: true,
        }
    }
}

impl SceneSpec {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.into(),
            ..Self::default()
        }
    }

    fn validate_common(&self) -> Result<()> {
        if self.res < 8 {
            return Err(Error::validation(format!("resolution must be at least 8 pixels, got {}", self.res)));
        }
        if self.n == 0 {
            return Err(Error::validation("n must be at least 1"));
        }
        let lo = self.background - self.background_variation.abs();
        let hi = self.background + self.background_variation.abs() + self.contrast;
        if !(self.contrast > 0.0) {
            return Err(Error::validation(format!("contrast must be positive, got {}", self.contrast)));
        }
        if !(lo >= 0.0 && hi <= 1.0) {
            return Err(Error::validation(format!(
                "background {} ± {} with contrast {} must stay within [0, 1]",
                self.background, self.background_variation, self.contrast
            )));
        }
        if !(self.edge_px >= 0.0 && (0.0..=1.0).contains(&self.impulse) && self.scale > 0.0) {
            return Err(Error::validation("edge_px, impulse or scale out of range"));
        }
        Ok(())
    }

    /// The background alone, without raised regions or noise.
    pub fn background_image(&self) -> Result<ScalarField> {
        let (b, v) = (self.background, self.background_variation);
        ScalarField::from_fn(self.res, self.res, 1.0 / self.res as f64, |x, y| {
            b + v * (0.6 * (PI * x).sin() * (0.5 * PI * y).cos() + 0.4 * (2.0 * x - 1.0) * y)
        })
    }
}

/// Closed-form values from the scaling arguments, beside values measured by
/// this crate's own solvers. Both sets are reported; neither is adjusted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticValues {
    pub kind: String,
    pub closed_form: BTreeMap<String, f64>,
    pub oracle: BTreeMap<String, f64>,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: SceneSpec,
    pub image: ScalarField,
    /// Unit-multiplicity boundary of the raised region.
    pub current: PolylineCurrent,
    pub values: AnalyticValues,
}

pub trait SceneGenerator: Named + Send + Sync {
    fn validate(&self, s: &SceneSpec) -> Result<()>;
    fn boundary(&self, s: &SceneSpec) -> Result<PolylineCurrent>;
    fn inside(&self, s: &SceneSpec, p: Point) -> bool;
    fn closed_form_values(&self, s: &SceneSpec) -> BTreeMap<String, f64>;
    fn oracle_values(&self, s: &SceneSpec, boundary: &PolylineCurrent) -> Result<BTreeMap<String, f64>>;
    fn metadata(&self, s: &SceneSpec) -> BTreeMap<String, String>;
}

fn map<const N: usize>(pairs: [(&str, f64); N]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn meta<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn too_coarse(what: &str, px: f64) -> Result<()> {
    if px < 8.0 {
        return Err(Error::validation(format!(
            "resolution too coarse: {what} spans {px:.2} pixels, at least 8 are needed"
        )));
    }
    Ok(())
}

/// `n²` discs on an `n × n` lattice.
pub struct DiscPack;

impl DiscPack {
    /// Scene units per domain unit is 4: radius `1/n` becomes `1/(4n)` and
    /// centres sit `1/n` apart, leaving a gap of one diameter between discs.
    pub const SCENE_TO_DOMAIN: f64 = 0.25;

    pub fn radius(n: u32) -> f64 {
        Self::SCENE_TO_DOMAIN / n as f64
    }

    pub fn centers(n: u32) -> Vec<Point> {
        let c = |k: u32| (k as f64 + 0.5) / n as f64;
        (0..n).flat_map(|j| (0..n).map(move |i| [c(i), c(j)])).collect()
    }
}

impl Named for DiscPack {
    fn name(&self) -> &'static str {
        "disc_pack"
    }
}

impl SceneGenerator for DiscPack {
    fn validate(&self, s: &SceneSpec) -> Result<()> {
        too_coarse("a disc", 2.0 * Self::radius(s.n) * s.res as f64)
    }

    fn boundary(&self, s: &SceneSpec) -> Result<PolylineCurrent> {
        let r = Self::radius(s.n);
        PolylineCurrent::new(
            Self::centers(s.n)
                .into_iter()
                .map(|c| regular_polygon(c, r, CURVE_SEGMENTS, 1.0))
                .collect(),
        )
    }

    fn inside(&self, s: &SceneSpec, p: Point) -> bool {
        let n = s.n as f64;
        let cell = |v: f64| ((v * n).floor().clamp(0.0, n - 1.0) + 0.5) / n;
        (p[0] - cell(p[0])).hypot(p[1] - cell(p[1])) < Self::radius(s.n)
    }

    fn closed_form_values(&self, s: &SceneSpec) -> BTreeMap<String, f64> {
        let n2 = (s.n as f64).powi(2);
        map([
            ("unsigned_regularity", n2 * TAU),
            ("flat_norm_formula", n2 * TAU.min(PI / n2)),
        ])
    }

    fn oracle_values(&self, s: &SceneSpec, boundary: &PolylineCurrent) -> Result<BTreeMap<String, f64>> {
        let r = Self::radius(s.n);
        let n2 = (s.n as f64).powi(2);
        let one = PolylineCurrent::single(boundary.polylines[0].clone());
        let curv = curvature_density(&one)?;
        let per_disc = current_flat_norm(&curv.as_current(None), r / 16.0, s.scale)?;
        Ok(map([
            ("unsigned_regularity", n2 * curv.total_unsigned()),
            ("flat_norm", n2 * per_disc),
            ("flat_norm_closed_form", n2 * TAU.min(PI * r / s.scale)),
            ("flat_norm_per_disc", per_disc),
        ]))
    }

    fn metadata(&self, s: &SceneSpec) -> BTreeMap<String, String> {
        meta([
            ("scene_to_domain", Self::SCENE_TO_DOMAIN.to_string()),
            ("disc_radius", Self::radius(s.n).to_string()),
            ("center_spacing", (1.0 / s.n as f64).to_string()),
            ("layout", "centres 4/n scene units apart, one diameter of gap".into()),
            ("flat_norm_units", "domain".into()),
        ])
    }
}

/// A step edge whose boundary zigzags at `±θ` about the horizontal.
pub struct Sawtooth;

impl Sawtooth {
    /// The base of length 1/2 scene units spans the unit square.
    pub const SCENE_TO_DOMAIN: f64 = 2.0;
    pub const MEAN_HEIGHT: f64 = 0.5;

    /// Horizontal distance between successive corners, in domain units.
    pub fn corner_spacing(n: u32) -> f64 {
        Self::SCENE_TO_DOMAIN / n as f64
    }

    /// Edge height above the mean line at `x`.
    pub fn profile(n: u32, theta: f64, x: f64) -> f64 {
        let d = Self::corner_spacing(n);
        // distance from x to the nearest zero crossing at multiples of d, signed by slope
        let u = x / d;
        let k = u.floor();
        let frac = u - k;
        let tri = if frac < 0.5 { frac } else { 1.0 - frac } * d * theta.tan();
        if (k as i64) % 2 == 0 {
            tri
        } else {
            -tri
        }
    }

    /// Corners at `x = (k + ½) d`, mean-height ends at `x = 0` and `x = 1`.
    pub fn polyline(n: u32, theta: f64) -> Result<Polyline> {
        let d = Self::corner_spacing(n);
        let corners = n / 2;
        let mut v = vec![[0.0, Self::MEAN_HEIGHT]];
        for k in 0..corners {
            let x = (k as f64 + 0.5) * d;
            v.push([x, Self::MEAN_HEIGHT + Self::profile(n, theta, x)]);
        }
        v.push([corners as f64 * d, Self::MEAN_HEIGHT]);
        Ok(Polyline::uniform(v, false, 1.0)?.reversed())
    }
}

impl Named for Sawtooth {
    fn name(&self) -> &'static str {
        "sawtooth_edge"
    }
}

impl SceneGenerator for Sawtooth {
    fn validate(&self, s: &SceneSpec) -> Result<()> {
        if !s.n.is_multiple_of(2) {
            return Err(Error::validation(format!("sawtooth n must be even, got {}", s.n)));
        }
        if !(s.theta > 0.0 && s.theta < PI / 2.0) {
            return Err(Error::validation(format!("sawtooth angle must be in (0, π/2), got {}", s.theta)));
        }
        too_coarse("a sawtooth period", 2.0 * Self::corner_spacing(s.n) * s.res as f64)
    }

    fn boundary(&self, s: &SceneSpec) -> Result<PolylineCurrent> {
        Ok(PolylineCurrent::single(Self::polyline(s.n, s.theta)?))
    }

    fn inside(&self, s: &SceneSpec, p: Point) -> bool {
        p[1] < Self::MEAN_HEIGHT + Self::profile(s.n, s.theta, p[0])
    }

    fn closed_form_values(&self, s: &SceneSpec) -> BTreeMap<String, f64> {
        let (n, t) = (s.n as f64, s.theta);
        map([("regularity", n * t), ("fidelity_formula", n * (2.0 * t).min(t / (n * t.cos())))])
    }

    fn oracle_values(&self, s: &SceneSpec, boundary: &PolylineCurrent) -> Result<BTreeMap<String, f64>> {
        let curv = curvature_density(boundary)?;
        let amplitude = 0.5 * Self::corner_spacing(s.n) * s.theta.tan();
        let fidelity = current_flat_norm(&curv.as_current(None), amplitude / 8.0, s.scale)?;
        Ok(map([("regularity", curv.total_unsigned()), ("fidelity", fidelity)]))
    }

    fn metadata(&self, s: &SceneSpec) -> BTreeMap<String, String> {
        meta([
            ("scene_to_domain", Self::SCENE_TO_DOMAIN.to_string()),
            ("corner_spacing", Self::corner_spacing(s.n).to_string()),
            ("corner_turn", (2.0 * s.theta).to_string()),
            ("flat_norm_units", "domain".into()),
        ])
    }
}

/// A horizontal edge carrying `n` semicircular bumps.
pub struct SemicircleBumps;

impl SemicircleBumps {
    pub const SCENE_TO_DOMAIN: f64 = 0.25;
    pub const BASELINE: f64 = 0.5;

    pub fn radius(n: u32) -> f64 {
        Self::SCENE_TO_DOMAIN / n as f64
    }

    /// Counter-clockwise arc over the bump centred at `cx`.
    pub fn arc(n: u32, cx: f64) -> Result<Polyline> {
        let r = Self::radius(n);
        let v = (0..=CURVE_SEGMENTS)
            .map(|k| {
                let t = PI * k as f64 / CURVE_SEGMENTS as f64;
                [cx + r * t.cos(), Self::BASELINE + r * t.sin()]
            })
            .collect();
        Polyline::uniform(v, false, 1.0)
    }
}

impl Named for SemicircleBumps {
    fn name(&self) -> &'static str {
        "semicircle_bumps"
    }
}

impl SceneGenerator for SemicircleBumps {
    fn validate(&self, s: &SceneSpec) -> Result<()> {
        too_coarse("a bump", 2.0 * Self::radius(s.n) * s.res as f64)
    }

    /// Arcs and the baseline pieces between them are separate polylines, so
    /// each arc carries only its own turning.
    fn boundary(&self, s: &SceneSpec) -> Result<PolylineCurrent> {
        let r = Self::radius(s.n);
        let y = Self::BASELINE;
        let mut out = Vec::new();
        let mut right = 1.0;
        for k in (0..s.n).rev() {
            let cx = (k as f64 + 0.5) / s.n as f64;
            out.push(Polyline::uniform(vec![[right, y], [cx + r, y]], false, 1.0)?);
            out.push(Self::arc(s.n, cx)?);
            right = cx - r;
        }
        out.push(Polyline::uniform(vec![[right, y], [0.0, y]], false, 1.0)?);
        PolylineCurrent::new(out)
    }

    fn inside(&self, s: &SceneSpec, p: Point) -> bool {
        let n = s.n as f64;
        let cx = ((p[0] * n).floor().clamp(0.0, n - 1.0) + 0.5) / n;
        p[1] < Self::BASELINE || (p[0] - cx).hypot(p[1] - Self::BASELINE) < Self::radius(s.n)
    }

    fn closed_form_values(&self, s: &SceneSpec) -> BTreeMap<String, f64> {
        let n = s.n as f64;
        map([("regularity_per_bump", PI), ("flat_norm_per_bump_formula", PI / (2.0 * n * n) + 2.0 / n)])
    }

    fn oracle_values(&self, s: &SceneSpec, _boundary: &PolylineCurrent) -> Result<BTreeMap<String, f64>> {
        let arc = PolylineCurrent::single(Self::arc(s.n, 0.5)?);
        let r = Self::radius(s.n);
        Ok(map([
            ("regularity_per_bump", curvature_density(&arc)?.total_unsigned()),
            ("flat_norm_per_bump", current_flat_norm(&arc, r / 16.0, s.scale)?),
            ("flat_norm_closed_form", (PI * r * r / (2.0 * s.scale) + 2.0 * r).min(PI * r)),
        ]))
    }

    fn metadata(&self, s: &SceneSpec) -> BTreeMap<String, String> {
        meta([
            ("scene_to_domain", Self::SCENE_TO_DOMAIN.to_string()),
            ("bump_radius", Self::radius(s.n).to_string()),
            ("flat_norm_units", "domain".into()),
        ])
    }
}

/// Two perpendicular roads crossing at the centre; the four corner blocks
/// are bounded by eight segments meeting in pairs at right angles.
pub struct RoadIntersection;

impl RoadIntersection {
    pub const HALF_WIDTH: f64 = 0.08;

    /// Boundaries of the four blocks, each an L of two segments.
    pub fn blocks() -> Result<Vec<Polyline>> {
        let (a, b) = (0.5 - Self::HALF_WIDTH, 0.5 + Self::HALF_WIDTH);
        [
            vec![[0.0, a], [a, a], [a, 0.0]],
            vec![[b, 0.0], [b, a], [1.0, a]],
            vec![[1.0, b], [b, b], [b, 1.0]],
            vec![[a, 1.0], [a, b], [0.0, b]],
        ]
        .into_iter()
        .map(|v| Polyline::uniform(v, false, 1.0))
        .collect()
    }
}

impl Named for RoadIntersection {
    fn name(&self) -> &'static str {
        "road_intersection"
    }
}

impl SceneGenerator for RoadIntersection {
    fn validate(&self, s: &SceneSpec) -> Result<()> {
        too_coarse("a road", 2.0 * Self::HALF_WIDTH * s.res as f64)
    }

    fn boundary(&self, _s: &SceneSpec) -> Result<PolylineCurrent> {
        PolylineCurrent::new(Self::blocks()?)
    }

    fn inside(&self, _s: &SceneSpec, p: Point) -> bool {
        (p[0] - 0.5).abs() < Self::HALF_WIDTH || (p[1] - 0.5).abs() < Self::HALF_WIDTH
    }

    fn closed_form_values(&self, _s: &SceneSpec) -> BTreeMap<String, f64> {
        map([("segments", 8.0), ("maximal_lines", 4.0)])
    }

    fn oracle_values(&self, _s: &SceneSpec, boundary: &PolylineCurrent) -> Result<BTreeMap<String, f64>> {
        Ok(map([
            ("segments", boundary.segment_count() as f64),
            ("length", boundary.mass()),
        ]))
    }

    fn metadata(&self, _s: &SceneSpec) -> BTreeMap<String, String> {
        meta([("road_half_width", Self::HALF_WIDTH.to_string())])
    }
}

/// A single vertical step edge, brighter on the right.
pub struct StepEdge;

impl Named for StepEdge {
    fn name(&self) -> &'static str {
        "step_edge"
    }
}

impl SceneGenerator for StepEdge {
    fn validate(&self, _s: &SceneSpec) -> Result<()> {
        Ok(())
    }

    fn boundary(&self, _s: &SceneSpec) -> Result<PolylineCurrent> {
        Ok(PolylineCurrent::single(Polyline::uniform(vec![[0.5, 1.0], [0.5, 0.0]], false, 1.0)?))
    }

    fn inside(&self, _s: &SceneSpec, p: Point) -> bool {
        p[0] > 0.5
    }

    fn closed_form_values(&self, _s: &SceneSpec) -> BTreeMap<String, f64> {
        map([("maximal_lines", 1.0)])
    }

    fn oracle_values(&self, _s: &SceneSpec, boundary: &PolylineCurrent) -> Result<BTreeMap<String, f64>> {
        Ok(map([("length", boundary.mass())]))
    }

    fn metadata(&self, _s: &SceneSpec) -> BTreeMap<String, String> {
        BTreeMap::new()
    }
}

pub fn scene_generators() -> Registry<dyn SceneGenerator> {
    Registry::<dyn SceneGenerator>::new("scene kind")
        .with(Box::new(DiscPack))
        .with(Box::new(Sawtooth))
        .with(Box::new(SemicircleBumps))
        .with(Box::new(RoadIntersection))
        .with(Box::new(StepEdge))
}

/// Separable Gaussian blur with clamped borders.
fn gaussian_blur(v: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-r..=r).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = kernel.iter().sum();
    let pass = |src: &[f64], along_x: bool| -> Vec<f64> {
        let mut out = vec![0.0; w * h];
        for j in 0..h {
            for i in 0..w {
                let mut acc = 0.0;
                for (t, kv) in kernel.iter().enumerate() {
                    let o = t as isize - r;
                    let (ii, jj) = if along_x {
                        ((i as isize + o).clamp(0, w as isize - 1) as usize, j)
                    } else {
                        (i, (j as isize + o).clamp(0, h as isize - 1) as usize)
                    };
                    acc += kv * src[jj * w + ii];
                }
                out[j * w + i] = acc / norm;
            }
        }
        out
    };
    pass(&pass(v, true), false)
}

pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    let registry = scene_generators();
    let gen = registry.get(&spec.kind)?;
    spec.validate_common()?;
    gen.validate(spec)?;
    let res = spec.res;
    let h = 1.0 / res as f64;
    let mut ind: Vec<f64> = (0..res * res)
        .map(|k| {
            let p = [((k % res) as f64 + 0.5) * h, ((k / res) as f64 + 0.5) * h];
            if gen.inside(spec, p) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    if spec.edge_px > 0.0 {
        ind = gaussian_blur(&ind, res, res, spec.edge_px);
    }
    let bg = spec.background_image()?;
    let mut values: Vec<f64> = bg.values().iter().zip(&ind).map(|(b, i)| b + spec.contrast * i).collect();
    if spec.impulse > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for v in &mut values {
            if rng.gen::<f64>() < spec.impulse {
                *v = if rng.gen::<bool>() { 1.0 } else { 0.0 };
            }
        }
    }
    let image = ScalarField::new(res, res, h, values)?;
    let current = gen.boundary(spec)?;
    let oracle = if spec.oracle {
        gen.oracle_values(spec, &current)?
    } else {
        BTreeMap::new()
    };
    let values = AnalyticValues {
        kind: spec.kind.clone(),
        closed_form: gen.closed_form_values(spec),
        oracle,
        metadata: gen.metadata(spec),
    };
    Ok(Scene {
        spec: spec.clone(),
        image,
        current,
        values,
    })
}
